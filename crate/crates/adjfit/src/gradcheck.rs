//! Finite-difference verification of adjoint gradients.
//!
//! Central differences of the loss, taken coordinate by coordinate through
//! the flattened `(t0, x0, theta)` vector, are compared against the adjoint
//! gradient.  The loss evaluations behind the difference quotient always run
//! at a fixed tight tolerance because their error is amplified by the
//! reciprocal step.

use crate::adjoint;
use crate::error::{Error, Result};
use crate::loss::{evaluate_loss, ErrorFunctional};
use crate::measure::SamplingMeasure;
use crate::models::{ParamTriple, VectorField};
use crate::odesolve::SolverConfig;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Default acceptance threshold on the worst relative deviation.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Solver/quadrature tolerance for the loss evaluations inside
/// [`fd_gradient`].
const FD_LOSS_TOL: f64 = 1e-11;

/// Floor on the denominator of relative deviations, so coordinates where
/// both gradients vanish compare on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

/// Human-readable name of flat coordinate `i` for dimensions `(d, k)`.
pub fn coordinate_label(i: usize, d: usize, k: usize) -> String {
    if i == 0 {
        "t0".to_string()
    } else if i < 1 + d {
        format!("x0[{}]", i - 1)
    } else if i < 1 + d + k {
        format!("theta[{}]", i - 1 - d)
    } else {
        format!("coord[{i}]")
    }
}

/// One coordinate of a gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheckRow {
    pub coordinate: String,
    pub adjoint: f64,
    pub fd: f64,
    pub abs_diff: f64,
    /// `abs_diff / max(|adjoint|, |fd|, 1e-6)`.
    pub rel_diff: f64,
}

/// Comparison of the adjoint gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub max_rel_diff: f64,
    pub max_abs_diff: f64,
    pub step: f64,
}

impl GradCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_diff <= threshold
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<10} {:>24} {:>24} {:>13} {:>13}",
            "coordinate", "adjoint", "central-diff", "abs diff", "rel diff"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<10} {:>24.16e} {:>24.16e} {:>13.6e} {:>13.6e}",
                row.coordinate, row.adjoint, row.fd, row.abs_diff, row.rel_diff
            )?;
        }
        write!(
            f,
            "worst deviation: {:.6e} relative, {:.6e} absolute (fd step {:.3e})",
            self.max_rel_diff, self.max_abs_diff, self.step
        )
    }
}

/// Central-difference gradient of the loss in the flattened
/// `(t0, x0, theta)` vector.
pub fn fd_gradient(
    model: &dyn VectorField,
    triple: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("fd step must be positive and finite"));
    }
    let cfg = SolverConfig::with_tol(FD_LOSS_TOL, FD_LOSS_TOL);
    let (d, k) = (triple.dim_state(), triple.dim_param());
    let flat = triple.flatten();
    let mut grad = vec![0.0; flat.len()];
    for (i, gi) in grad.iter_mut().enumerate() {
        let mut plus = flat.clone();
        plus[i] += step;
        let mut minus = flat.clone();
        minus[i] -= step;
        let tp = ParamTriple::unflatten(&plus, d, k)?;
        let tm = ParamTriple::unflatten(&minus, d, k)?;
        let lp = evaluate_loss(model, &tp, h, sigma, &cfg)?.value;
        let lm = evaluate_loss(model, &tm, h, sigma, &cfg)?.value;
        *gi = (lp - lm) / (2.0 * step);
    }
    Ok(grad)
}

/// Compare the adjoint gradient (computed at `cfg`) against central
/// differences with the given step.
pub fn check_gradient(
    model: &dyn VectorField,
    triple: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    cfg: &SolverConfig,
    step: f64,
) -> Result<GradCheckReport> {
    let adj = adjoint::gradient(model, triple, h, sigma, cfg)?;
    let fd = fd_gradient(model, triple, h, sigma, step)?;
    let (d, k) = (triple.dim_state(), triple.dim_param());
    let mut rows = Vec::with_capacity(adj.len());
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..adj.len() {
        let abs_diff = (adj[i] - fd[i]).abs();
        let rel_diff = abs_diff / adj[i].abs().max(fd[i].abs()).max(REL_FLOOR);
        max_rel = max_rel.max(rel_diff);
        max_abs = max_abs.max(abs_diff);
        rows.push(GradCheckRow {
            coordinate: coordinate_label(i, d, k),
            adjoint: adj[i],
            fd: fd[i],
            abs_diff,
            rel_diff,
        });
    }
    Ok(GradCheckReport {
        rows,
        max_rel_diff: max_rel,
        max_abs_diff: max_abs,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Exponential;
    use crate::sampling::{ContinuousSample, SampleData};

    fn constant_sample(value: f64) -> SampleData {
        SampleData::Continuous(
            ContinuousSample::from_values(vec![0.0, 1.0], vec![value, value]).unwrap(),
        )
    }

    #[test]
    fn flat_trajectory_with_constant_data_agrees_to_machine_level() {
        // With theta = 0 the trajectory is constant, the loss is quadratic
        // in x0, and a central difference is exact up to roundoff.
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = ParamTriple::new(0.0, vec![0.7], vec![0.0]);
        let h = ErrorFunctional::squared(constant_sample(0.3), 0);
        let sigma = SamplingMeasure::lebesgue();
        let report =
            check_gradient(&Exponential, &triple, &h, &sigma, &cfg, DEFAULT_FD_STEP).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].coordinate, "t0");
        assert_eq!(report.rows[1].coordinate, "x0[0]");
        assert_eq!(report.rows[2].coordinate, "theta[0]");
        assert!(report.rows[0].rel_diff <= 1e-9, "{report}");
        assert!(report.rows[1].rel_diff <= 1e-9, "{report}");
        assert!(report.rows[2].rel_diff <= DEFAULT_THRESHOLD, "{report}");
        assert!(report.passes(DEFAULT_THRESHOLD));
    }

    #[test]
    fn deviation_shrinks_quadratically_with_the_step() {
        // On a genuinely nonlinear coordinate the central-difference
        // truncation error scales with the square of the step.
        let cfg = SolverConfig::with_tol(1e-11, 1e-11);
        let triple = Exponential::truth();
        let h = ErrorFunctional::squared(constant_sample(1.0), 0);
        let sigma = SamplingMeasure::uniform_atoms(&[1.0]).unwrap();

        let adj = adjoint::gradient(&Exponential, &triple, &h, &sigma, &cfg).unwrap();
        let coarse = fd_gradient(&Exponential, &triple, &h, &sigma, 1e-2).unwrap();
        let fine = fd_gradient(&Exponential, &triple, &h, &sigma, 1e-3).unwrap();

        let err_coarse = (coarse[2] - adj[2]).abs();
        let err_fine = (fine[2] - adj[2]).abs();
        assert!(err_coarse > 1e-6, "coarse step should show truncation error");
        assert!(
            err_fine < err_coarse / 10.0,
            "expected roughly quadratic decay: {err_coarse} -> {err_fine}"
        );
    }

    #[test]
    fn perfect_fit_gives_near_zero_gradients_from_both_engines() {
        use crate::odesolve::solve_forward;
        use crate::sampling::make_continuous_sample;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = Exponential::truth();
        let traj = solve_forward(&Exponential, &triple, &cfg).unwrap();
        let sample =
            make_continuous_sample(&traj, 0, 0.0, 4001, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let h = ErrorFunctional::squared(SampleData::Continuous(sample), 0);
        let sigma = SamplingMeasure::lebesgue();
        let report = check_gradient(&Exponential, &triple, &h, &sigma, &cfg, 1e-5).unwrap();
        for row in &report.rows {
            assert!(row.adjoint.abs() <= 1e-7, "{report}");
            assert!(row.fd.abs() <= 1e-7, "{report}");
        }
    }

    #[test]
    fn max_rel_diff_is_the_row_maximum() {
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = Exponential::truth();
        let h = ErrorFunctional::squared(constant_sample(2.0), 0);
        let sigma = SamplingMeasure::lebesgue();
        let report = check_gradient(&Exponential, &triple, &h, &sigma, &cfg, 1e-5).unwrap();
        let expect = report
            .rows
            .iter()
            .fold(0.0f64, |m, r| m.max(r.rel_diff));
        assert_eq!(report.max_rel_diff, expect);
    }

    #[test]
    fn fd_step_must_be_positive() {
        let triple = Exponential::truth();
        let h = ErrorFunctional::squared(constant_sample(1.0), 0);
        let sigma = SamplingMeasure::lebesgue();
        assert!(fd_gradient(&Exponential, &triple, &h, &sigma, 0.0).is_err());
        assert!(fd_gradient(&Exponential, &triple, &h, &sigma, -1e-5).is_err());
    }
}
