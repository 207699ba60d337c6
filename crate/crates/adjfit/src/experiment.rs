//! End-to-end experiment harness: generate observation data from a built-in
//! model, fit perturbed starts against it over several repetitions, and run
//! gradient checks — all driven by one JSON-serializable configuration.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{fit, perturb, FitConfig, FitTrace};
use crate::error::{Error, Result};
use crate::gradcheck::{check_gradient, GradCheckReport, DEFAULT_FD_STEP};
use crate::loss::ErrorFunctional;
use crate::measure::SamplingMeasure;
use crate::models::{builtin, ParamTriple, VectorField};
use crate::odesolve::{solve_forward, SolverConfig};
use crate::sampling::{
    default_time_std, make_continuous_sample, make_discrete_sample, DataFile, SampleData,
};

/// Observation-set flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Continuous,
    Discrete,
}

fn default_model() -> String {
    "si".to_string()
}
fn default_mode() -> SampleMode {
    SampleMode::Continuous
}
fn default_n_intervals() -> usize {
    20
}
fn default_grid_size() -> usize {
    1001
}
fn default_rel_std() -> f64 {
    0.05
}
fn default_repetitions() -> usize {
    4
}

/// One experiment, JSON-round-trippable.  Every field has a default so
/// config files may specify only what they change.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Built-in model name (`si`, `lotka_volterra`, `exponential`).
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_mode")]
    pub mode: SampleMode,
    /// Observed state component; `None` picks the model's customary one
    /// (`I` for si, the first component otherwise).
    #[serde(default)]
    pub obs_index: Option<usize>,
    /// Value-noise spread for generated data.
    #[serde(default)]
    pub noise_std: f64,
    /// Subinterval count for discrete mode.
    #[serde(default = "default_n_intervals")]
    pub n_intervals: usize,
    /// Observation-time spread for discrete mode; `None` = width / 6.
    #[serde(default)]
    pub time_std: Option<f64>,
    /// Grid size for continuous mode.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Relative spread of the start-triple perturbation.
    #[serde(default = "default_rel_std")]
    pub rel_std: f64,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// The observed component: explicit, or the model's customary one.
    pub fn resolve_obs_index(&self) -> usize {
        self.obs_index.unwrap_or(match self.model.as_str() {
            "si" => 1,
            _ => 0,
        })
    }

    fn resolve_time_std(&self) -> f64 {
        self.time_std.unwrap_or_else(|| default_time_std(self.n_intervals))
    }
}

/// Stream-splitting for per-purpose RNGs: every (seed, salt) pair gets an
/// independent deterministic generator.
fn salted_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const SALT_GENERATE: u64 = 1;
const SALT_GRADCHECK: u64 = 2;
const SALT_REP_BASE: u64 = 1000;

/// Tolerance for data generation and gradcheck reference solves.
fn reference_solver() -> SolverConfig {
    SolverConfig::with_tol(1e-10, 1e-10)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

/// Solve the model at its true triple and write the sampled observation
/// file.  Returns the ground-truth triple.
pub fn run_generate(cfg: &ExperimentConfig, out_path: &Path) -> Result<ParamTriple> {
    let built = builtin(&cfg.model)?;
    let obs = cfg.resolve_obs_index();
    if obs >= built.model.dim_state() {
        return Err(Error::invalid(format!(
            "obs_index {obs} out of range for model '{}' with {} states",
            cfg.model,
            built.model.dim_state()
        )));
    }
    let traj = solve_forward(built.model.as_ref(), &built.truth, &reference_solver())?;
    let mut rng = salted_rng(cfg.seed, SALT_GENERATE);
    let file = match cfg.mode {
        SampleMode::Continuous => {
            let sample =
                make_continuous_sample(&traj, obs, cfg.noise_std, cfg.grid_size, &mut rng)?;
            DataFile::from_continuous(&sample, obs, cfg.noise_std, cfg.seed)
        }
        SampleMode::Discrete => {
            let (sample, _) = make_discrete_sample(
                &traj,
                obs,
                cfg.n_intervals,
                cfg.resolve_time_std(),
                cfg.noise_std,
                &mut rng,
            )?;
            DataFile::from_discrete(&sample, obs, cfg.noise_std, cfg.seed)
        }
    };
    file.save(out_path)?;
    Ok(built.truth)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Everything `run_fit` produced: per-repetition outcomes plus the paths it
/// wrote.
#[derive(Debug)]
pub struct FitRunOutcome {
    /// One entry per repetition, in order.
    pub reps: Vec<std::result::Result<FitTrace, Error>>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub snapshot_paths: Vec<PathBuf>,
}

impl FitRunOutcome {
    pub fn successes(&self) -> usize {
        self.reps.iter().filter(|r| r.is_ok()).count()
    }
}

#[derive(Serialize)]
struct SnapshotCurve {
    step: usize,
    triple: Vec<f64>,
    tau: Vec<f64>,
    values: Vec<f64>,
}

fn repetition_thread_cap(repetitions: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = match std::env::var("ADJFIT_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n >= 1).unwrap_or(available),
        Err(_) => available,
    };
    cap.min(repetitions).max(1)
}

/// Run the perturb-and-fit experiment against a generated data file.
///
/// Each repetition perturbs the model's true triple with an independent
/// seeded generator, fits it, and writes `rep{i}_trace.csv` into `out_dir`;
/// a `summary.csv` aggregates the per-step losses (min/median/max) over the
/// successful repetitions.  With `snapshots` nonempty, each repetition also
/// writes `rep{i}_snapshots.json` holding the predicted observed-component
/// curve at the requested steps.  Repetitions run concurrently, capped by
/// the `ADJFIT_THREADS` environment variable; failures are recorded
/// per-repetition rather than aborting the whole run.
pub fn run_fit(
    cfg: &ExperimentConfig,
    data_path: &Path,
    out_dir: &Path,
    snapshots: &[usize],
) -> Result<FitRunOutcome> {
    let built = builtin(&cfg.model)?;
    let model = built.model.as_ref();
    let file = DataFile::load(data_path)?;
    if file.obs_index >= model.dim_state() {
        return Err(Error::invalid(format!(
            "data file observes component {} but model '{}' has {} states",
            file.obs_index,
            cfg.model,
            model.dim_state()
        )));
    }
    let (sample, sigma) = file.into_sample()?;
    let h = ErrorFunctional::squared(sample, file.obs_index);
    for &s in snapshots {
        if s > cfg.fit.steps {
            return Err(Error::invalid(format!(
                "snapshot step {s} beyond the last fit step {}",
                cfg.fit.steps
            )));
        }
    }
    if cfg.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    std::fs::create_dir_all(out_dir)?;

    let reps = run_repetitions(cfg, model, &built.truth, &h, &sigma);

    let mut outcome = FitRunOutcome {
        reps,
        trace_paths: Vec::new(),
        summary_path: None,
        snapshot_paths: Vec::new(),
    };
    for (i, rep) in outcome.reps.iter().enumerate() {
        if let Ok(trace) = rep {
            let path = out_dir.join(format!("rep{i}_trace.csv"));
            std::fs::write(&path, trace.to_csv())?;
            outcome.trace_paths.push(path);
            if !snapshots.is_empty() {
                let path = out_dir.join(format!("rep{i}_snapshots.json"));
                let curves =
                    snapshot_curves(model, &cfg.fit, trace, snapshots, file.obs_index)?;
                std::fs::write(&path, serde_json::to_string_pretty(&curves)?)?;
                outcome.snapshot_paths.push(path);
            }
        }
    }
    if outcome.successes() > 0 {
        let path = out_dir.join("summary.csv");
        std::fs::write(&path, summary_csv(&outcome.reps))?;
        outcome.summary_path = Some(path);
    }
    Ok(outcome)
}

/// Fit every repetition, at most `ADJFIT_THREADS` at a time, preserving
/// repetition order in the result.
fn run_repetitions(
    cfg: &ExperimentConfig,
    model: &dyn VectorField,
    truth: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
) -> Vec<std::result::Result<FitTrace, Error>> {
    let cap = repetition_thread_cap(cfg.repetitions);
    let mut results: Vec<Option<std::result::Result<FitTrace, Error>>> =
        (0..cfg.repetitions).map(|_| None).collect();
    for batch_start in (0..cfg.repetitions).step_by(cap) {
        let batch_end = (batch_start + cap).min(cfg.repetitions);
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(batch_end - batch_start);
            for rep in batch_start..batch_end {
                handles.push((
                    rep,
                    scope.spawn(move || {
                        let mut rng = salted_rng(cfg.seed, SALT_REP_BASE + rep as u64);
                        let start = perturb(truth, cfg.rel_std, &mut rng);
                        let mut fit_cfg = cfg.fit.clone();
                        fit_cfg.seed = rng.random::<u64>();
                        fit(model, h, sigma, &start, &fit_cfg)
                    }),
                ));
            }
            for (rep, handle) in handles {
                let result = handle.join().unwrap_or_else(|_| {
                    Err(Error::invalid(format!("repetition {rep} panicked")))
                });
                results[rep] = Some(result);
            }
        });
    }
    results.into_iter().map(|r| r.expect("every repetition ran")).collect()
}

/// Forward-solve the trace's triple at each snapshot step and record the
/// observed component on a fixed 201-point grid.
fn snapshot_curves(
    model: &dyn VectorField,
    fit_cfg: &FitConfig,
    trace: &FitTrace,
    snapshots: &[usize],
    obs_index: usize,
) -> Result<Vec<SnapshotCurve>> {
    const CURVE_POINTS: usize = 201;
    let mut curves = Vec::with_capacity(snapshots.len());
    for &step in snapshots {
        let record = trace
            .records
            .iter()
            .find(|r| r.step == step)
            .ok_or_else(|| Error::invalid(format!("trace has no record for step {step}")))?;
        let triple =
            ParamTriple::unflatten(&record.flat, trace.dim_state(), trace.dim_param())?;
        let traj = solve_forward(model, &triple, &fit_cfg.solver)?;
        let mut tau = Vec::with_capacity(CURVE_POINTS);
        let mut values = Vec::with_capacity(CURVE_POINTS);
        for i in 0..CURVE_POINTS {
            let t = i as f64 / (CURVE_POINTS - 1) as f64;
            tau.push(t);
            values.push(traj.eval_component(triple.t0 + t, obs_index)?);
        }
        curves.push(SnapshotCurve {
            step,
            triple: record.flat.clone(),
            tau,
            values,
        });
    }
    Ok(curves)
}

/// Aggregate per-step losses over successful repetitions into
/// `step,loss_min,loss_median,loss_max` rows (only steps where every
/// successful repetition evaluated its loss).
fn summary_csv(reps: &[std::result::Result<FitTrace, Error>]) -> String {
    let traces: Vec<&FitTrace> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut out = String::from("step,loss_min,loss_median,loss_max\n");
    if traces.is_empty() {
        return out;
    }
    let steps = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    for idx in 0..steps {
        let mut losses: Vec<f64> = Vec::with_capacity(traces.len());
        let mut all_present = true;
        for trace in &traces {
            match trace.records[idx].loss {
                Some(l) => losses.push(l),
                None => {
                    all_present = false;
                    break;
                }
            }
        }
        if !all_present {
            continue;
        }
        losses.sort_by(|a, b| a.total_cmp(b));
        let min = losses[0];
        let max = losses[losses.len() - 1];
        let median = if losses.len() % 2 == 1 {
            losses[losses.len() / 2]
        } else {
            0.5 * (losses[losses.len() / 2 - 1] + losses[losses.len() / 2])
        };
        out.push_str(&format!(
            "{},{min:.16e},{median:.16e},{max:.16e}\n",
            traces[0].records[idx].step
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

/// Check adjoint vs finite-difference gradients at a perturbed triple.
///
/// With a data path, the observations and measure come from the file;
/// otherwise they are synthesized in memory exactly as `run_generate`
/// would.  The FD step defaults to [`DEFAULT_FD_STEP`] when `None`.
pub fn run_gradcheck(
    cfg: &ExperimentConfig,
    data_path: Option<&Path>,
    fd_step: Option<f64>,
) -> Result<GradCheckReport> {
    let built = builtin(&cfg.model)?;
    let model = built.model.as_ref();
    let (sample, sigma, obs) = match data_path {
        Some(path) => {
            let file = DataFile::load(path)?;
            let (sample, sigma) = file.into_sample()?;
            (sample, sigma, file.obs_index)
        }
        None => {
            let obs = cfg.resolve_obs_index();
            let traj = solve_forward(model, &built.truth, &reference_solver())?;
            let mut rng = salted_rng(cfg.seed, SALT_GENERATE);
            match cfg.mode {
                SampleMode::Continuous => {
                    let sample =
                        make_continuous_sample(&traj, obs, cfg.noise_std, cfg.grid_size, &mut rng)?;
                    (SampleData::Continuous(sample), SamplingMeasure::lebesgue(), obs)
                }
                SampleMode::Discrete => {
                    let (sample, sigma) = make_discrete_sample(
                        &traj,
                        obs,
                        cfg.n_intervals,
                        cfg.resolve_time_std(),
                        cfg.noise_std,
                        &mut rng,
                    )?;
                    (SampleData::Discrete(sample), sigma, obs)
                }
            }
        }
    };
    if obs >= model.dim_state() {
        return Err(Error::invalid(format!(
            "obs_index {obs} out of range for model '{}'",
            cfg.model
        )));
    }
    let h = ErrorFunctional::squared(sample, obs);
    let mut rng = salted_rng(cfg.seed, SALT_GRADCHECK);
    let triple = perturb(&built.truth, cfg.rel_std, &mut rng);
    check_gradient(
        model,
        &triple,
        &h,
        &sigma,
        &SolverConfig::default(),
        fd_step.unwrap_or(DEFAULT_FD_STEP),
    )
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
