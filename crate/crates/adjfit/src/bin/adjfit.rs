//! Command-line harness: generate observation data, fit models against it,
//! and verify gradients, driven by a JSON config plus flag overrides.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure,
//! 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adjfit::error::Error;
use adjfit::experiment::{
    run_fit, run_generate, run_gradcheck, ExperimentConfig, SampleMode,
};
use adjfit::gradcheck::DEFAULT_THRESHOLD;

#[derive(Parser)]
#[command(
    name = "adjfit",
    version,
    about = "Fit ODE parameters to sampled observations via adjoint gradients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment settings: a JSON config file, overridden by any flags given.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in model: si, lotka_volterra, or exponential
    #[arg(long)]
    model: Option<String>,
    /// Observation flavor
    #[arg(long, value_parser = ["continuous", "discrete"])]
    mode: Option<String>,
    /// Observed state component (defaults to the model's customary one)
    #[arg(long)]
    obs_index: Option<usize>,
    /// Value-noise spread for generated data
    #[arg(long)]
    noise_std: Option<f64>,
    /// Subinterval count for discrete mode
    #[arg(long = "intervals")]
    intervals: Option<usize>,
    /// Observation-time spread for discrete mode (default: width / 6)
    #[arg(long)]
    time_std: Option<f64>,
    /// Grid size for continuous mode
    #[arg(long)]
    grid_size: Option<usize>,
    /// Relative spread of the start-triple perturbation
    #[arg(long)]
    rel_std: Option<f64>,
    /// Descent updates per repetition
    #[arg(long)]
    steps: Option<usize>,
    /// Base descent step size
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Number of fit repetitions
    #[arg(long)]
    repetitions: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.mode {
            cfg.mode = match v.as_str() {
                "continuous" => SampleMode::Continuous,
                "discrete" => SampleMode::Discrete,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown mode '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = self.obs_index {
            cfg.obs_index = Some(v);
        }
        if let Some(v) = self.noise_std {
            cfg.noise_std = v;
        }
        if let Some(v) = self.intervals {
            cfg.n_intervals = v;
        }
        if let Some(v) = self.time_std {
            cfg.time_std = Some(v);
        }
        if let Some(v) = self.grid_size {
            cfg.grid_size = v;
        }
        if let Some(v) = self.rel_std {
            cfg.rel_std = v;
        }
        if let Some(v) = self.steps {
            cfg.fit.steps = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.fit.learning_rate = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the true model and write an observation data file
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the data file
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Fit perturbed starts against a data file, one trace per repetition
    Fit {
        #[command(flatten)]
        config: ConfigArgs,
        /// Observation data file from `generate`
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Directory for trace/summary CSVs
        #[arg(short, long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Comma-separated step indices to dump predicted curves at
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<usize>,
    },
    /// Compare the adjoint gradient against central finite differences
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        /// Optional data file; omitted, observations are synthesized
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        /// Central-difference step
        #[arg(long)]
        fd_step: Option<f64>,
        /// Largest acceptable relative deviation
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

fn failure_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::InvalidInput(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn format_triple(flat: &[f64], d: usize) -> String {
    let x0: Vec<String> = flat[1..1 + d].iter().map(|v| format!("{v}")).collect();
    let theta: Vec<String> = flat[1 + d..].iter().map(|v| format!("{v}")).collect();
    format!(
        "t0 = {}, x0 = [{}], theta = [{}]",
        flat[0],
        x0.join(", "),
        theta.join(", ")
    )
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate { config, output } => {
            let cfg = config.resolve()?;
            let truth = run_generate(&cfg, &output)?;
            println!(
                "wrote {} ({} mode, model '{}')",
                output.display(),
                match cfg.mode {
                    SampleMode::Continuous => "continuous",
                    SampleMode::Discrete => "discrete",
                },
                cfg.model
            );
            println!(
                "ground truth: {}",
                format_triple(&truth.flatten(), truth.dim_state())
            );
            Ok(0)
        }
        Command::Fit {
            config,
            data,
            out_dir,
            snapshots,
        } => {
            let cfg = config.resolve()?;
            let outcome = run_fit(&cfg, &data, &out_dir, &snapshots)?;
            for (i, rep) in outcome.reps.iter().enumerate() {
                match rep {
                    Ok(trace) => println!(
                        "rep {i}: loss {:.6e} -> {:.6e} in {} steps",
                        trace.initial_loss(),
                        trace.final_loss(),
                        cfg.fit.steps
                    ),
                    Err(err) => println!("rep {i}: failed: {err}"),
                }
            }
            if let Some(path) = &outcome.summary_path {
                println!("summary: {}", path.display());
            }
            if outcome.successes() == 0 {
                eprintln!("all {} repetitions failed", cfg.repetitions);
                return Ok(2);
            }
            Ok(0)
        }
        Command::Gradcheck {
            config,
            data,
            fd_step,
            threshold,
        } => {
            let cfg = config.resolve()?;
            let report = run_gradcheck(&cfg, data.as_deref(), fd_step)?;
            println!("{report}");
            if report.passes(threshold) {
                println!("PASS (threshold {threshold:.3e})");
                Ok(0)
            } else {
                println!("FAIL (threshold {threshold:.3e})");
                Ok(2)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; anything else is a
            // usage error.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(failure_code(&err))
        }
    }
}
