//! Discrete observations as a limit of concentrating densities.
//!
//! A discrete sample draws one observation time per subinterval from a
//! truncated normal around the midpoint; its companion measure carries
//! exactly those densities.  As the time spread shrinks (regenerating with
//! the same seed, so the underlying quantiles match), observation times
//! collapse onto the midpoints, the companion measure concentrates there
//! too, and the noiseless loss at the truth falls toward zero.
//!
//! Run with `cargo run --example discrete_limit`.

use adjfit::{
    builtin, evaluate_loss, make_discrete_sample, solve_forward, ErrorFunctional, SampleData,
    SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adjfit::Result<()> {
    let b = builtin("si")?;
    let obs = 1;
    let n = 64;
    let width = 1.0 / n as f64;
    let cfg = SolverConfig::with_tol(1e-10, 1e-10);
    let traj = solve_forward(b.model.as_ref(), &b.truth, &cfg)?;

    println!("time spread     loss at the truth");
    for div in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (sample, sigma) =
            make_discrete_sample(&traj, obs, n, width / div, 0.0, &mut rng)?;
        let h = ErrorFunctional::squared(SampleData::Discrete(sample), obs);
        let report = evaluate_loss(b.model.as_ref(), &b.truth, &h, &sigma, &cfg)?;
        println!("width / {div:<5}   {:.6e}", report.value);
    }
    Ok(())
}
