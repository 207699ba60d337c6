//! One misfit, four sampling measures.  The loss integrates the pointwise
//! squared error against a measure on the unit window, so choosing the
//! measure chooses what the fit pays attention to: everywhere equally, a
//! few calendar dates, a bump of interest, or a late-window emphasis via a
//! pointwise weight.
//!
//! Run with `cargo run --example measures`.

use adjfit::measure::{Atom, Density};
use adjfit::{
    builtin, evaluate_loss, gradient, make_continuous_sample, perturb, solve_forward,
    ErrorFunctional, SampleData, SamplingMeasure, SolverConfig, TruncNormSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adjfit::Result<()> {
    let b = builtin("si")?;
    let obs = 1;
    let cfg = SolverConfig::with_tol(1e-9, 1e-9);

    let traj = solve_forward(b.model.as_ref(), &b.truth, &SolverConfig::with_tol(1e-10, 1e-10))?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let sample = make_continuous_sample(&traj, obs, 0.02, 201, &mut rng)?;
    let h = ErrorFunctional::squared(SampleData::Continuous(sample.clone()), obs);
    let triple = perturb(&b.truth, 0.08, &mut rng);

    let bump = SamplingMeasure::from_parts(
        Density::piecewise_truncnorm(vec![TruncNormSpec::new(0.3, 0.1, 0.0, 1.0)?], vec![0.8])?,
        vec![Atom { tau: 1.0, weight: 0.2 }],
    )?;
    let cases: Vec<(&str, SamplingMeasure, ErrorFunctional)> = vec![
        ("uniform", SamplingMeasure::lebesgue(), h.clone()),
        (
            "five atoms",
            SamplingMeasure::uniform_atoms(&[0.2, 0.4, 0.6, 0.8, 1.0])?,
            h.clone(),
        ),
        ("bump + endpoint", bump, h.clone()),
        (
            "late-weighted",
            SamplingMeasure::lebesgue(),
            ErrorFunctional::squared(SampleData::Continuous(sample), obs).with_weight(|tau| 2.0 * tau),
        ),
    ];

    println!("measure           loss         density part  atom part     |grad|");
    for (label, sigma, h) in cases {
        let report = evaluate_loss(b.model.as_ref(), &triple, &h, &sigma, &cfg)?;
        let grad = gradient(b.model.as_ref(), &triple, &h, &sigma, &cfg)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        println!(
            "{label:<16}  {:.4e}   {:.4e}    {:.4e}    {norm:.4e}",
            report.value, report.continuous_part, report.discrete_part
        );
    }
    Ok(())
}
