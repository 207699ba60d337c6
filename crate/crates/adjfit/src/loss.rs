//! Loss functionals: pointwise data-mismatch error integrated against a
//! sampling measure.
//!
//! The pointwise error at window-relative time `tau` compares one state
//! coordinate against the observed value: `w(tau) * (x_obs - y(tau))^2`.
//! The loss is that error integrated over the measure's density plus its
//! weighted sum over the measure's atoms.  Purely atomic measures never
//! touch quadrature.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::SamplingMeasure;
use crate::models::{ParamTriple, VectorField};
use crate::odesolve::{solve_forward, SolverConfig, Trajectory};
use crate::quad::{integrate_with_knots, QuadConfig};
use crate::sampling::SampleData;

// ---------------------------------------------------------------------------
// Error functional
// ---------------------------------------------------------------------------

/// Squared-error functional against observed data, with an optional
/// time-dependent weight.
///
/// The weight defaults to one; time preferences normally live in the
/// sampling measure instead, which is what the discrete pipeline does.
#[derive(Clone)]
pub struct ErrorFunctional {
    sample: SampleData,
    obs_index: usize,
    weight: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for ErrorFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ErrorFunctional")
            .field("sample", &self.sample)
            .field("obs_index", &self.obs_index)
            .field("weighted", &self.weight.is_some())
            .finish()
    }
}

impl ErrorFunctional {
    /// Plain squared error `(x[obs_index] - y(tau))^2`.
    pub fn squared(sample: SampleData, obs_index: usize) -> Self {
        ErrorFunctional {
            sample,
            obs_index,
            weight: None,
        }
    }

    /// Attach a pointwise weight `w(tau)`; the error becomes
    /// `w(tau) * (x[obs_index] - y(tau))^2`.
    pub fn with_weight(mut self, w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.weight = Some(Arc::new(w));
        self
    }

    pub fn sample(&self) -> &SampleData {
        &self.sample
    }

    pub fn obs_index(&self) -> usize {
        self.obs_index
    }

    /// Weight at `tau` (one unless a weight was attached).
    pub fn weight_at(&self, tau: f64) -> f64 {
        match &self.weight {
            None => 1.0,
            Some(w) => w(tau),
        }
    }

    /// Observed value at `tau`.
    pub fn target(&self, tau: f64) -> f64 {
        self.sample.eval(tau)
    }

    /// Points in `[0, 1]` where the sample function is not smooth; loss
    /// quadrature splits there.
    pub fn knots(&self) -> Vec<f64> {
        self.sample.knots()
    }

    /// Pointwise error at `tau` for a full state vector.
    pub fn pointwise_error(&self, tau: f64, state: &[f64]) -> Result<f64> {
        if self.obs_index >= state.len() {
            return Err(Error::invalid(format!(
                "obs_index {} out of range for state dimension {}",
                self.obs_index,
                state.len()
            )));
        }
        Ok(self.error_from_component(tau, state[self.obs_index]))
    }

    /// Pointwise error given just the observed component.
    #[inline]
    pub(crate) fn error_from_component(&self, tau: f64, x_obs: f64) -> f64 {
        let r = x_obs - self.target(tau);
        self.weight_at(tau) * r * r
    }

    /// Gradient of the pointwise error in the extended variable
    /// `(t, x, theta)`: zero everywhere except the observed coordinate,
    /// which carries `2 w(tau) (x_obs - y(tau))`.
    ///
    /// The window time `tau` is the integration variable of the loss, not a
    /// flowed quantity, so the time slot stays zero.
    pub fn error_gradient(&self, tau: f64, state: &[f64], dim_param: usize) -> Result<Vec<f64>> {
        if self.obs_index >= state.len() {
            return Err(Error::invalid(format!(
                "obs_index {} out of range for state dimension {}",
                self.obs_index,
                state.len()
            )));
        }
        let d = state.len();
        let mut g = vec![0.0; 1 + d + dim_param];
        let r = state[self.obs_index] - self.target(tau);
        g[1 + self.obs_index] = 2.0 * self.weight_at(tau) * r;
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Loss evaluation
// ---------------------------------------------------------------------------

/// A loss value split into its measure components; `value` is always their
/// sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub continuous_part: f64,
    pub discrete_part: f64,
}

/// Loss of an already-solved trajectory under measure `sigma`.
///
/// Quadrature tolerances are tied to the solver tolerances in `cfg` so both
/// error sources stay comparable.  The trajectory must span the unit window
/// whose start is `traj.t_start()`.
pub fn loss_of_trajectory(
    traj: &Trajectory,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    cfg: &SolverConfig,
) -> Result<LossReport> {
    if h.obs_index() >= traj.dim() {
        return Err(Error::invalid(format!(
            "obs_index {} out of range for trajectory dimension {}",
            h.obs_index(),
            traj.dim()
        )));
    }
    let t0 = traj.t_start();

    let mut discrete_part = 0.0;
    for atom in sigma.atoms() {
        let x_obs = traj.eval_component(t0 + atom.tau, h.obs_index())?;
        discrete_part += atom.weight * h.error_from_component(atom.tau, x_obs);
    }

    let continuous_part = if sigma.has_continuous_part() {
        let mut knots = sigma.density_knots();
        knots.extend(h.knots());
        let quad_cfg = QuadConfig::from_solver_tol(cfg.rel_tol, cfg.abs_tol);
        integrate_with_knots(
            &mut |tau| {
                let x_obs = traj.eval_component(t0 + tau, h.obs_index())?;
                Ok(h.error_from_component(tau, x_obs) * sigma.density(tau))
            },
            0.0,
            1.0,
            &knots,
            &quad_cfg,
        )?
    } else {
        0.0
    };

    Ok(LossReport {
        value: continuous_part + discrete_part,
        continuous_part,
        discrete_part,
    })
}

/// Solve the model over the unit window and evaluate the loss in one call.
pub fn evaluate_loss(
    model: &dyn VectorField,
    triple: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    cfg: &SolverConfig,
) -> Result<LossReport> {
    let traj = solve_forward(model, triple, cfg)?;
    loss_of_trajectory(&traj, h, sigma, cfg)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Exponential;
    use crate::sampling::{make_continuous_sample, ContinuousSample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_sample(value: f64) -> SampleData {
        SampleData::Continuous(
            ContinuousSample::from_values(vec![0.0, 1.0], vec![value, value]).unwrap(),
        )
    }

    #[test]
    fn perfect_fit_has_negligible_loss() {
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = Exponential::truth();
        let traj = solve_forward(&Exponential, &triple, &cfg).unwrap();
        let sample = make_continuous_sample(&traj, 0, 0.0, 1001, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let h = ErrorFunctional::squared(SampleData::Continuous(sample), 0);
        let report =
            evaluate_loss(&Exponential, &triple, &h, &SamplingMeasure::lebesgue(), &cfg).unwrap();
        assert!(report.value.abs() <= 1e-10, "loss {}", report.value);
    }

    #[test]
    fn constant_offset_gives_offset_squared() {
        // x' = 0 keeps the state at c; data is identically zero, so the
        // Lebesgue loss is exactly c^2.
        let cfg = SolverConfig::default();
        let triple = ParamTriple::new(0.0, vec![0.7], vec![0.0]);
        let h = ErrorFunctional::squared(constant_sample(0.0), 0);
        let report =
            evaluate_loss(&Exponential, &triple, &h, &SamplingMeasure::lebesgue(), &cfg).unwrap();
        assert!((report.value - 0.49).abs() < 1e-12);
        assert_eq!(report.discrete_part, 0.0);
    }

    #[test]
    fn single_atom_matches_direct_formula() {
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = Exponential::truth();
        let sigma = SamplingMeasure::uniform_atoms(&[0.3]).unwrap();
        let h = ErrorFunctional::squared(constant_sample(1.5), 0);
        let traj = solve_forward(&Exponential, &triple, &cfg).unwrap();
        let x = traj.eval_component(0.3, 0).unwrap();
        let expected = (x - 1.5) * (x - 1.5);
        let report = loss_of_trajectory(&traj, &h, &sigma, &cfg).unwrap();
        assert!((report.value - expected).abs() <= 1e-12);
        assert_eq!(report.continuous_part, 0.0);
    }

    #[test]
    fn atomic_measure_sums_match_by_hand_sum() {
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let triple = Exponential::truth();
        let taus = [0.1, 0.4, 0.9];
        let sigma = SamplingMeasure::uniform_atoms(&taus).unwrap();
        let h = ErrorFunctional::squared(constant_sample(1.0), 0);
        let traj = solve_forward(&Exponential, &triple, &cfg).unwrap();
        let mut expected = 0.0;
        for &tau in &taus {
            let x = traj.eval_component(tau, 0).unwrap();
            expected += (x - 1.0) * (x - 1.0) / 3.0;
        }
        let report = loss_of_trajectory(&traj, &h, &sigma, &cfg).unwrap();
        assert!((report.value - expected).abs() <= 1e-12);
        assert_eq!(report.value, report.discrete_part);
    }

    #[test]
    fn report_parts_always_sum_to_value() {
        let cfg = SolverConfig::default();
        let triple = Exponential::truth();
        let sigma = SamplingMeasure::from_parts(
            crate::measure::Density::Uniform { value: 1.0 },
            vec![crate::measure::Atom { tau: 0.25, weight: 0.5 }],
        )
        .unwrap();
        let h = ErrorFunctional::squared(constant_sample(2.0), 0);
        let report = evaluate_loss(&Exponential, &triple, &h, &sigma, &cfg).unwrap();
        assert_eq!(report.value, report.continuous_part + report.discrete_part);
        assert!(report.continuous_part > 0.0);
        assert!(report.discrete_part > 0.0);
    }

    #[test]
    fn weight_scales_the_loss() {
        let cfg = SolverConfig::default();
        let triple = ParamTriple::new(0.0, vec![0.7], vec![0.0]);
        let h1 = ErrorFunctional::squared(constant_sample(0.0), 0);
        let h2 = ErrorFunctional::squared(constant_sample(0.0), 0).with_weight(|_| 2.0);
        let sigma = SamplingMeasure::lebesgue();
        let a = evaluate_loss(&Exponential, &triple, &h1, &sigma, &cfg).unwrap();
        let b = evaluate_loss(&Exponential, &triple, &h2, &sigma, &cfg).unwrap();
        assert!((b.value - 2.0 * a.value).abs() < 1e-12);
    }

    #[test]
    fn error_gradient_shape_and_content() {
        let h = ErrorFunctional::squared(constant_sample(1.0), 1);
        let g = h.error_gradient(0.5, &[3.0, 4.0], 2).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 0.0);
        assert!((g[2] - 2.0 * (4.0 - 1.0)).abs() < 1e-15);
        assert_eq!(g[3], 0.0);
        assert_eq!(g[4], 0.0);
    }

    #[test]
    fn obs_index_bounds_are_checked() {
        let cfg = SolverConfig::default();
        let triple = Exponential::truth();
        let h = ErrorFunctional::squared(constant_sample(0.0), 3);
        assert!(
            evaluate_loss(&Exponential, &triple, &h, &SamplingMeasure::lebesgue(), &cfg).is_err()
        );
        assert!(h.pointwise_error(0.5, &[1.0]).is_err());
        assert!(h.error_gradient(0.5, &[1.0], 1).is_err());
    }
}
