//! Recover the state and parameters of a two-compartment system from
//! observations of just one compartment.  The susceptible count never
//! appears in the data; it is pinned down through the coupling in the
//! dynamics.  (The start time `t0` is the exception: the flow is
//! autonomous, so shifting `t0` does not move the trajectory and its
//! gradient is identically zero.)
//!
//! Not every pairing works this way — observing only the prey of the
//! predator-prey model, say, leaves a scaling of the predator exactly
//! invisible — so identifiability has to be argued per model and
//! observation, not assumed.
//!
//! Run with `cargo run --example single_observation`.

use adjfit::{
    builtin, fit, make_continuous_sample, perturb, solve_forward, ErrorFunctional, FitConfig,
    SampleData, SamplingMeasure, SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adjfit::Result<()> {
    let b = builtin("si")?;
    let obs = 1; // infected only; the susceptible coordinate is never observed

    let traj = solve_forward(b.model.as_ref(), &b.truth, &SolverConfig::with_tol(1e-10, 1e-10))?;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sample = make_continuous_sample(&traj, obs, 0.0, 201, &mut rng)?;
    let h = ErrorFunctional::squared(SampleData::Continuous(sample), obs);
    let sigma = SamplingMeasure::lebesgue();

    let start = perturb(&b.truth, 0.10, &mut rng);
    let cfg = FitConfig { steps: 400, ..FitConfig::default() };
    let trace = fit(b.model.as_ref(), &h, &sigma, &start, &cfg)?;

    let fitted = trace.final_triple();
    let labels = ["t0", "x0[0]", "x0[1]", "theta[0]", "theta[1]"];
    println!("relative error against the truth (x0[0] is the unobserved compartment):\n");
    println!("            start        fitted");
    for (i, label) in labels.iter().enumerate() {
        let t = b.truth.flatten()[i];
        let rel = |v: f64| (v - t).abs() / t.abs().max(1.0);
        let note = if i == 0 { "   (zero gradient: autonomous)" } else { "" };
        println!(
            "{label:<10}  {:>9.2e}    {:>9.2e}{note}",
            rel(start.flatten()[i]),
            rel(fitted.flatten()[i])
        );
    }
    println!(
        "\nloss {:.4e} -> {:.4e} over {} steps",
        trace.initial_loss(),
        trace.final_loss(),
        cfg.steps
    );
    Ok(())
}
