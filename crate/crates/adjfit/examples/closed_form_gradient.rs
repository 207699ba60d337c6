//! Check the adjoint gradient against pencil-and-paper calculus on the one
//! case where that is easy: scalar exponential growth, `x' = theta * x`,
//! observed at finitely many atoms.
//!
//! With `x(t0 + tau) = x0 * exp(theta * tau)` and a constant target `y`,
//! the loss under an atomic measure is
//!
//! ```text
//! L = sum_j w_j * (x0 * exp(theta * tau_j) - y)^2
//! ```
//!
//! so the exact gradient in `(t0, x0, theta)` is
//!
//! ```text
//! dL/dt0    = 0                    (the flow is autonomous)
//! dL/dx0    = sum_j 2 w_j r_j * exp(theta * tau_j)
//! dL/dtheta = sum_j 2 w_j r_j * tau_j * x0 * exp(theta * tau_j)
//! ```
//!
//! Run with `cargo run --example closed_form_gradient`.

use adjfit::measure::{Atom, Density};
use adjfit::{gradient, ErrorFunctional, SampleData, SamplingMeasure, SolverConfig};

fn main() -> adjfit::Result<()> {
    let (x0, theta, y) = (0.9, 0.7, 0.8);
    let atoms = [(0.3, 0.2), (0.7, 0.3), (1.0, 0.5)];

    let b = adjfit::builtin("exponential")?;
    let mut triple = b.truth.clone();
    triple.x0[0] = x0;
    triple.theta[0] = theta;

    let sigma = SamplingMeasure::from_parts(
        Density::Zero,
        atoms.iter().map(|&(tau, weight)| Atom { tau, weight }).collect(),
    )?;
    let h = ErrorFunctional::squared(SampleData::constant(y), 0);

    let mut exact = [0.0f64; 3];
    for &(tau, w) in &atoms {
        let e = (theta * tau).exp();
        let r = x0 * e - y;
        exact[1] += 2.0 * w * r * e;
        exact[2] += 2.0 * w * r * tau * x0 * e;
    }

    let adj = gradient(
        b.model.as_ref(),
        &triple,
        &h,
        &sigma,
        &SolverConfig::with_tol(1e-10, 1e-10),
    )?;

    println!("coordinate   closed form        adjoint            rel diff");
    let mut worst = 0.0f64;
    for (i, label) in ["t0", "x0", "theta"].iter().enumerate() {
        let rel = (adj[i] - exact[i]).abs() / exact[i].abs().max(1.0);
        worst = worst.max(rel);
        println!(
            "{label:<10}   {:>16.12}   {:>16.12}   {rel:.3e}",
            exact[i], adj[i]
        );
    }
    println!("\nworst relative deviation: {worst:.3e}");
    Ok(())
}
