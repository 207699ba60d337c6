//! The random-measure machinery behind stochastic descent.
//!
//! `random_measure` draws a normalized mixture of truncated-normal bumps
//! whose expectation is the uniform measure, so gradients under fresh draws
//! are unbiased estimates of the uniform-measure gradient.  Part one checks
//! that by averaging; part two runs the fit loop with a fresh draw per step
//! and shows the loss under the fixed target measure still falls.
//!
//! Run with `cargo run --example stochastic_measure`.

use adjfit::{
    builtin, fit, gradient, make_continuous_sample, perturb, random_measure, solve_forward,
    ErrorFunctional, FitConfig, SampleData, SamplingMeasure, SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adjfit::Result<()> {
    let b = builtin("si")?;
    let obs = 1;
    let traj = solve_forward(b.model.as_ref(), &b.truth, &SolverConfig::with_tol(1e-10, 1e-10))?;
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let sample = make_continuous_sample(&traj, obs, 0.0, 201, &mut rng)?;
    let h = ErrorFunctional::squared(SampleData::Continuous(sample), obs);
    let triple = perturb(&b.truth, 0.10, &mut rng);

    // Part one: the mean gradient over random measures approaches the
    // uniform-measure gradient (Monte-Carlo error ~ 1/sqrt(draws)).
    let cfg = SolverConfig::with_tol(1e-9, 1e-9);
    let exact = gradient(b.model.as_ref(), &triple, &h, &SamplingMeasure::lebesgue(), &cfg)?;
    let draws = 200;
    let mut mean = vec![0.0; exact.len()];
    for _ in 0..draws {
        let sigma = random_measure(8, &mut rng)?;
        let g = gradient(b.model.as_ref(), &triple, &h, &sigma, &cfg)?;
        for (m, gi) in mean.iter_mut().zip(&g) {
            *m += gi / draws as f64;
        }
    }
    println!("coordinate-wise gradient, uniform measure vs mean of {draws} draws:");
    for (e, m) in exact.iter().zip(&mean) {
        println!("  {e:>12.6}   {m:>12.6}");
    }

    // Part two: descend with a fresh measure each step.  Recorded losses
    // always refer to the fixed `sigma` passed in, so the trace is
    // comparable to a deterministic run.
    let start = perturb(&b.truth, 0.10, &mut ChaCha8Rng::seed_from_u64(52));
    let cfg = FitConfig {
        steps: 50,
        learning_rate: 5e-3,
        stochastic_measure: true,
        stochastic_bumps: 8,
        seed: 5,
        ..FitConfig::default()
    };
    let trace = fit(b.model.as_ref(), &h, &SamplingMeasure::lebesgue(), &start, &cfg)?;
    println!("\nstochastic fit, loss under the uniform measure:");
    for rec in trace.records.iter().filter(|r| r.step % 10 == 0) {
        if let Some(loss) = rec.loss {
            println!("  step {:>3}   loss {loss:.6e}", rec.step);
        }
    }
    Ok(())
}
