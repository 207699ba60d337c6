//! Solve each built-in model over its unit observation window and print the
//! state at a handful of window times.
//!
//! Run with `cargo run --example simulate`.

use adjfit::{builtin, solve_forward, SolverConfig};

fn main() -> adjfit::Result<()> {
    let cfg = SolverConfig::with_tol(1e-10, 1e-10);
    for name in ["exponential", "si", "lotka_volterra"] {
        let b = builtin(name)?;
        let traj = solve_forward(b.model.as_ref(), &b.truth, &cfg)?;
        println!(
            "{name}: {} solver nodes on [{}, {}]",
            traj.node_count(),
            traj.t_start(),
            traj.t_end()
        );
        for i in 0..=4 {
            let tau = i as f64 / 4.0;
            let x = traj.eval(traj.t_start() + tau)?;
            let cells: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
            println!("  tau = {tau:.2}   x = [{}]", cells.join(", "));
        }
        println!();
    }
    Ok(())
}
