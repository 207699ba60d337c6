//! The config-driven pipeline behind the `adjfit` binary, called as a
//! library: generate a data file, fit repeated perturbed starts against it,
//! and finish with a gradient check — all from one `ExperimentConfig`.
//!
//! Run with `cargo run --example experiment_pipeline`.

use adjfit::{run_fit, run_generate, run_gradcheck, ExperimentConfig};

fn main() -> adjfit::Result<()> {
    let dir = tempfile::tempdir()?;
    let data_path = dir.path().join("si.json");
    let out_dir = dir.path().join("fits");

    let mut cfg = ExperimentConfig::default();
    cfg.model = "si".into();
    cfg.noise_std = 0.05;
    cfg.grid_size = 201;
    cfg.repetitions = 3;
    cfg.seed = 9;
    cfg.fit.steps = 30;

    let truth = run_generate(&cfg, &data_path)?;
    println!(
        "generated {} (model {}, t0 = {}, x0 = {:?}, theta = {:?})",
        data_path.display(),
        cfg.model,
        truth.t0,
        truth.x0,
        truth.theta
    );

    let outcome = run_fit(&cfg, &data_path, &out_dir, &[])?;
    for (i, rep) in outcome.reps.iter().enumerate() {
        match rep {
            Ok(trace) => println!(
                "rep {i}: loss {:.4e} -> {:.4e}",
                trace.initial_loss(),
                trace.final_loss()
            ),
            Err(err) => println!("rep {i}: failed: {err}"),
        }
    }
    if let Some(path) = &outcome.summary_path {
        let lines = std::fs::read_to_string(path)?.lines().count();
        println!("summary: {} ({} lines)", path.display(), lines);
    }

    let report = run_gradcheck(&cfg, Some(&data_path), None)?;
    println!(
        "gradcheck on the same data: max rel diff {:.3e}",
        report.max_rel_diff
    );
    Ok(())
}
