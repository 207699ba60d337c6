//! Gradient-descent fitting of the `(t0, x0, theta)` triple, with optional
//! Armijo backtracking, coordinate freezing, and a stochastic mode that
//! redraws the sampling measure every step.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::AdjointProblem;
use crate::error::{Error, Result};
use crate::gradcheck::coordinate_label;
use crate::loss::{evaluate_loss, loss_of_trajectory, ErrorFunctional};
use crate::measure::{Density, SamplingMeasure};
use crate::models::{ParamTriple, VectorField};
use crate::odesolve::{solve_forward, SolverConfig};
use crate::quad::{integrate_adaptive, QuadConfig};
use crate::sampling::{standard_normal_draw, TruncNormSpec};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;

/// Maximum number of step halvings in the backtracking line search.
const MAX_HALVINGS: u32 = 30;

/// Bump spread of [`random_measure`] components.
const BUMP_STD: f64 = 0.1;

fn default_steps() -> usize {
    100
}
fn default_learning_rate() -> f64 {
    1e-2
}
fn default_line_search() -> bool {
    true
}
fn default_eval_loss_every() -> usize {
    1
}
fn default_stochastic_bumps() -> usize {
    8
}
fn default_fit_solver() -> SolverConfig {
    SolverConfig::with_tol(1e-6, 1e-6)
}

/// Settings for [`fit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of descent updates; the trace holds `steps + 1` records.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Base step size (the largest one the line search will try).
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Armijo backtracking on the candidate update.  Ignored in stochastic
    /// mode, where consecutive steps optimize different draws of the
    /// objective.
    #[serde(default = "default_line_search")]
    pub line_search: bool,
    /// Record the loss every this many steps (the first and last step are
    /// always recorded, and line search needs the loss at every step).
    #[serde(default = "default_eval_loss_every")]
    pub eval_loss_every: usize,
    /// Seed for the per-step measures of stochastic mode.
    #[serde(default)]
    pub seed: u64,
    /// Redraw the sampling measure each step via [`random_measure`].
    #[serde(default)]
    pub stochastic_measure: bool,
    /// Bump count for the stochastic measures.
    #[serde(default = "default_stochastic_bumps")]
    pub stochastic_bumps: usize,
    /// Flat coordinate indices (in `(t0, x0, theta)` order) held fixed.
    #[serde(default)]
    pub frozen_coords: Vec<usize>,
    /// Solver and quadrature tolerances for the descent iterations.
    #[serde(default = "default_fit_solver")]
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            steps: default_steps(),
            learning_rate: default_learning_rate(),
            line_search: default_line_search(),
            eval_loss_every: default_eval_loss_every(),
            seed: 0,
            stochastic_measure: false,
            stochastic_bumps: default_stochastic_bumps(),
            frozen_coords: Vec::new(),
            solver: default_fit_solver(),
        }
    }
}

/// State of the fit after `step` updates.
#[derive(Debug, Clone)]
pub struct FitRecord {
    pub step: usize,
    /// Loss at this triple, when evaluated (see `eval_loss_every`).
    pub loss: Option<f64>,
    /// Euclidean norm of the (masked) gradient at this triple.
    pub grad_norm: f64,
    /// Flattened `(t0, x0, theta)` at this step.
    pub flat: Vec<f64>,
}

/// Full history of one fit.
#[derive(Debug, Clone)]
pub struct FitTrace {
    dim_state: usize,
    dim_param: usize,
    pub records: Vec<FitRecord>,
}

impl FitTrace {
    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_param(&self) -> usize {
        self.dim_param
    }

    pub fn initial_loss(&self) -> f64 {
        self.records
            .first()
            .and_then(|r| r.loss)
            .expect("first record always carries a loss")
    }

    pub fn final_loss(&self) -> f64 {
        self.records
            .last()
            .and_then(|r| r.loss)
            .expect("last record always carries a loss")
    }

    pub fn final_triple(&self) -> ParamTriple {
        let flat = &self.records.last().expect("trace is never empty").flat;
        ParamTriple::unflatten(flat, self.dim_state, self.dim_param)
            .expect("trace records have consistent dimensions")
    }

    /// Render as CSV: `step,loss,grad_norm` followed by one column per flat
    /// coordinate.  Floats carry 17 significant digits so equal traces give
    /// byte-equal files; an unevaluated loss leaves its field empty.
    pub fn to_csv(&self) -> String {
        let (d, k) = (self.dim_state, self.dim_param);
        let mut out = String::from("step,loss,grad_norm");
        for i in 0..1 + d + k {
            out.push(',');
            out.push_str(&coordinate_label(i, d, k));
        }
        out.push('\n');
        for rec in &self.records {
            out.push_str(&rec.step.to_string());
            out.push(',');
            if let Some(loss) = rec.loss {
                out.push_str(&format!("{loss:.16e}"));
            }
            out.push_str(&format!(",{:.16e}", rec.grad_norm));
            for v in &rec.flat {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

/// Multiplicative normal perturbation of every flat coordinate:
/// `c -> c * (1 + N(0, rel_std^2))`, with additive `N(0, rel_std^2)` noise
/// for coordinates that are exactly zero.
pub fn perturb<R: Rng + ?Sized>(triple: &ParamTriple, rel_std: f64, rng: &mut R) -> ParamTriple {
    let mut flat = triple.flatten();
    for c in &mut flat {
        let z = rel_std * standard_normal_draw(rng);
        if *c == 0.0 {
            *c = z;
        } else {
            *c *= 1.0 + z;
        }
    }
    ParamTriple::unflatten(&flat, triple.dim_state(), triple.dim_param())
        .expect("perturbation preserves dimensions")
}

// ---------------------------------------------------------------------------
// Random measures
// ---------------------------------------------------------------------------

const ENVELOPE_POINTS: usize = 513;

/// Mean density at `tau` of a single bump with uniformly random center,
/// tabulated on a uniform grid.  Dividing a drawn mixture by this envelope
/// makes the expected density approximately uniform.
fn bump_envelope() -> &'static [f64] {
    static ENVELOPE: OnceLock<Vec<f64>> = OnceLock::new();
    ENVELOPE.get_or_init(|| {
        let quad = QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 30,
        };
        (0..ENVELOPE_POINTS)
            .map(|i| {
                let tau = i as f64 / (ENVELOPE_POINTS - 1) as f64;
                integrate_adaptive(
                    &mut |center| {
                        let spec = TruncNormSpec::new(center, BUMP_STD, 0.0, 1.0)?;
                        Ok(spec.pdf(tau))
                    },
                    0.0,
                    1.0,
                    &quad,
                )
                .expect("envelope integrand is smooth and bounded")
            })
            .collect()
    })
}

fn envelope_at(tau: f64) -> f64 {
    let table = bump_envelope();
    let x = tau.clamp(0.0, 1.0) * (ENVELOPE_POINTS - 1) as f64;
    let i = (x.floor() as usize).min(ENVELOPE_POINTS - 2);
    let s = x - i as f64;
    table[i] * (1.0 - s) + table[i + 1] * s
}

/// Draw a random sampling measure: a normalized mixture of `n_bumps`
/// truncated normals (centers uniform on `[0, 1]`, spread 0.1), divided by
/// the expected mixture envelope so that averaging many draws approximates
/// the uniform measure.
pub fn random_measure<R: Rng + ?Sized>(n_bumps: usize, rng: &mut R) -> Result<SamplingMeasure> {
    if n_bumps == 0 {
        return Err(Error::invalid("n_bumps must be at least 1"));
    }
    let specs: Vec<TruncNormSpec> = (0..n_bumps)
        .map(|_| TruncNormSpec::new(rng.random::<f64>(), BUMP_STD, 0.0, 1.0))
        .collect::<Result<_>>()?;
    let inv_n = 1.0 / n_bumps as f64;
    let density = Density::custom(move |tau| {
        let mixture: f64 = specs.iter().map(|s| s.pdf(tau)).sum();
        inv_n * mixture / envelope_at(tau)
    });
    SamplingMeasure::from_parts(density, Vec::new())
}

// ---------------------------------------------------------------------------
// The fit loop
// ---------------------------------------------------------------------------

fn masked_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Gradient descent on the loss, starting from `start`.
///
/// Each step solves the forward problem once, runs the backward adjoint
/// sweep for the gradient, and updates `triple <- triple - eta * grad`.
/// With `line_search` on, `eta` backtracks from `learning_rate` by halving
/// (at most 30 times) until the Armijo condition holds; a candidate whose
/// forward solve fails counts as a rejection.  In stochastic mode the
/// gradient of each step is taken under a fresh [`random_measure`] draw,
/// while recorded losses always refer to the caller's `sigma`.
pub fn fit(
    model: &dyn VectorField,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    start: &ParamTriple,
    cfg: &FitConfig,
) -> Result<FitTrace> {
    let (d, k) = (start.dim_state(), start.dim_param());
    let n_flat = 1 + d + k;
    if cfg.steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::invalid("learning_rate must be positive and finite"));
    }
    if cfg.eval_loss_every == 0 {
        return Err(Error::invalid("eval_loss_every must be at least 1"));
    }
    for &i in &cfg.frozen_coords {
        if i >= n_flat {
            return Err(Error::invalid(format!(
                "frozen coordinate {i} out of range for {n_flat} flat coordinates"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let line_search = cfg.line_search && !cfg.stochastic_measure;
    let mut triple = start.clone();
    let mut records = Vec::with_capacity(cfg.steps + 1);
    // Warm-started backtracking: each step's search begins where the last
    // accepted step left off (doubled, so the size can climb on an easy
    // stretch), starting from the configured rate.
    let mut eta_start = cfg.learning_rate;

    for step in 0..=cfg.steps {
        let step_measure = if cfg.stochastic_measure {
            Some(random_measure(cfg.stochastic_bumps, &mut rng)?)
        } else {
            None
        };
        let grad_measure = step_measure.as_ref().unwrap_or(sigma);

        let traj = solve_forward(model, &triple, &cfg.solver)?;
        let solution =
            AdjointProblem::new(model, &triple, &traj, h, grad_measure, cfg.solver.clone())?
                .solve()?;
        let mut grad = solution.gradient().to_vec();
        for &i in &cfg.frozen_coords {
            grad[i] = 0.0;
        }
        let grad_norm = masked_norm(&grad);

        let eval_loss = line_search || step % cfg.eval_loss_every == 0 || step == cfg.steps;
        let loss = if eval_loss {
            Some(loss_of_trajectory(&traj, h, sigma, &cfg.solver)?.value)
        } else {
            None
        };
        records.push(FitRecord {
            step,
            loss,
            grad_norm,
            flat: triple.flatten(),
        });
        if step == cfg.steps {
            break;
        }

        let flat = triple.flatten();
        let next_flat = if line_search {
            let reference = loss.expect("line search evaluates the loss every step");
            let g_sq = grad.iter().map(|g| g * g).sum::<f64>();
            let mut accepted = None;
            for halving in 0..=MAX_HALVINGS {
                let eta = eta_start * 0.5f64.powi(halving as i32);
                let candidate: Vec<f64> =
                    flat.iter().zip(&grad).map(|(c, g)| c - eta * g).collect();
                // Once `eta * grad` is below one ulp of every coordinate the
                // update cannot move the point, and no shorter step can
                // either: the iterate is a numerical minimum.  Stay put
                // instead of reporting a failed search.
                if candidate == flat {
                    accepted = Some(candidate);
                    break;
                }
                let cand_triple = ParamTriple::unflatten(&candidate, d, k)?;
                match evaluate_loss(model, &cand_triple, h, sigma, &cfg.solver) {
                    Ok(report) if report.value <= reference - ARMIJO_C * eta * g_sq => {
                        accepted = Some(candidate);
                        eta_start = 2.0 * eta;
                        break;
                    }
                    Ok(_) | Err(_) => continue,
                }
            }
            accepted.ok_or_else(|| {
                Error::LineSearchFailed(format!(
                    "no acceptable step within {MAX_HALVINGS} halvings at step {step} \
                     (loss {reference:.6e}, |grad| {grad_norm:.6e})"
                ))
            })?
        } else {
            flat.iter()
                .zip(&grad)
                .map(|(c, g)| c - cfg.learning_rate * g)
                .collect()
        };
        triple = ParamTriple::unflatten(&next_flat, d, k)?;
    }

    Ok(FitTrace {
        dim_state: d,
        dim_param: k,
        records,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Exponential, Si};
    use crate::sampling::{make_continuous_sample, SampleData};

    fn si_data_on_grid(noise_std: f64, seed: u64, grid_size: usize) -> ErrorFunctional {
        let cfg = SolverConfig::with_tol(1e-10, 1e-10);
        let traj = solve_forward(&Si, &Si::truth(), &cfg).unwrap();
        let sample = make_continuous_sample(
            &traj,
            1,
            noise_std,
            grid_size,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        ErrorFunctional::squared(SampleData::Continuous(sample), 1)
    }

    fn si_data(noise_std: f64, seed: u64) -> ErrorFunctional {
        si_data_on_grid(noise_std, seed, 1001)
    }

    #[test]
    fn truth_is_nearly_stationary() {
        // A dense grid keeps the data's interpolation error from masking
        // the stationarity of the true triple.
        let h = si_data_on_grid(0.0, 7, 4001);
        let sigma = SamplingMeasure::lebesgue();
        let cfg = FitConfig {
            steps: 5,
            solver: SolverConfig::with_tol(1e-9, 1e-9),
            ..FitConfig::default()
        };
        let trace = fit(&Si, &h, &sigma, &Si::truth(), &cfg).unwrap();
        assert_eq!(trace.records.len(), 6);
        assert!(trace.records[0].grad_norm <= 1e-6, "{}", trace.records[0].grad_norm);
        let start = &trace.records[0].flat;
        let end = &trace.records[5].flat;
        for (a, b) in start.iter().zip(end) {
            assert!((a - b).abs() <= 1e-6, "moved from {a} to {b}");
        }
    }

    #[test]
    fn line_search_makes_losses_non_increasing() {
        let h = si_data(0.0, 11);
        let sigma = SamplingMeasure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = perturb(&Si::truth(), 0.05, &mut rng);
        let cfg = FitConfig {
            steps: 30,
            ..FitConfig::default()
        };
        let trace = fit(&Si, &h, &sigma, &start, &cfg).unwrap();
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss.unwrap()).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
        assert!(
            trace.final_loss() < trace.initial_loss(),
            "no progress: {} -> {}",
            trace.initial_loss(),
            trace.final_loss()
        );
    }

    #[test]
    fn default_config_cuts_the_loss_tenfold() {
        // Noiseless observations, a 5% start perturbation, and the default
        // 100 line-searched steps reduce the loss by at least 10x.
        let h = si_data(0.0, 11);
        let sigma = SamplingMeasure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let start = perturb(&Si::truth(), 0.05, &mut rng);
        let trace = fit(&Si, &h, &sigma, &start, &FitConfig::default()).unwrap();
        assert_eq!(trace.records.len(), 101);
        assert!(
            trace.final_loss() <= 0.1 * trace.initial_loss(),
            "insufficient reduction: {:.3e} -> {:.3e}",
            trace.initial_loss(),
            trace.final_loss()
        );
    }

    #[test]
    fn frozen_coordinates_do_not_move() {
        let h = si_data(0.0, 11);
        let sigma = SamplingMeasure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = perturb(&Si::truth(), 0.05, &mut rng);
        let cfg = FitConfig {
            steps: 10,
            frozen_coords: vec![0, 2],
            ..FitConfig::default()
        };
        let trace = fit(&Si, &h, &sigma, &start, &cfg).unwrap();
        for rec in &trace.records {
            assert_eq!(rec.flat[0], start.t0);
            assert_eq!(rec.flat[2], start.x0[1]);
        }
        // Unfrozen coordinates did move.
        assert_ne!(trace.records[0].flat[1], trace.records[10].flat[1]);
    }

    #[test]
    fn fit_is_bit_reproducible() {
        let h = si_data(0.05, 13);
        let sigma = SamplingMeasure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let start = perturb(&Si::truth(), 0.05, &mut rng);
        for stochastic in [false, true] {
            let cfg = FitConfig {
                steps: 6,
                stochastic_measure: stochastic,
                seed: 99,
                ..FitConfig::default()
            };
            let a = fit(&Si, &h, &sigma, &start, &cfg).unwrap();
            let b = fit(&Si, &h, &sigma, &start, &cfg).unwrap();
            assert_eq!(a.records.len(), b.records.len());
            for (ra, rb) in a.records.iter().zip(&b.records) {
                assert_eq!(ra.flat, rb.flat, "stochastic={stochastic}");
                assert_eq!(ra.loss, rb.loss);
                assert_eq!(ra.grad_norm, rb.grad_norm);
            }
        }
    }

    #[test]
    fn stochastic_mode_still_reduces_the_loss() {
        let h = si_data(0.0, 11);
        let sigma = SamplingMeasure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let start = perturb(&Si::truth(), 0.05, &mut rng);
        let cfg = FitConfig {
            steps: 25,
            learning_rate: 5e-3,
            stochastic_measure: true,
            seed: 4,
            ..FitConfig::default()
        };
        let trace = fit(&Si, &h, &sigma, &start, &cfg).unwrap();
        assert!(
            trace.final_loss() < trace.initial_loss(),
            "{} -> {}",
            trace.initial_loss(),
            trace.final_loss()
        );
    }

    #[test]
    fn line_search_survives_reaching_a_numerical_minimum() {
        // Exactly attainable target: the loss bottoms out near 1e-30,
        // where `eta * grad` underflows below one ulp of the coordinates
        // and no Armijo decrease is representable.  The fit must park
        // there, not abort.
        let h = ErrorFunctional::squared(SampleData::constant(2.0), 0);
        let sigma = SamplingMeasure::uniform_atoms(&[1.0]).unwrap();
        let start = ParamTriple::new(0.0, vec![1.0], vec![0.3]);
        let cfg = FitConfig { steps: 60, ..FitConfig::default() };
        let trace = fit(&Exponential, &h, &sigma, &start, &cfg).unwrap();
        assert_eq!(trace.records.len(), 61);
        assert!(trace.final_loss() <= 1e-25, "{}", trace.final_loss());
    }

    #[test]
    fn divergent_start_aborts_with_an_error() {
        let h = ErrorFunctional::squared(
            SampleData::Continuous(
                crate::sampling::ContinuousSample::from_values(vec![0.0, 1.0], vec![1.0, 1.0])
                    .unwrap(),
            ),
            0,
        );
        let sigma = SamplingMeasure::lebesgue();
        let start = ParamTriple::new(0.0, vec![1.0], vec![500.0]);
        let cfg = FitConfig {
            steps: 3,
            line_search: false,
            ..FitConfig::default()
        };
        assert!(fit(&Exponential, &h, &sigma, &start, &cfg).is_err());
    }

    #[test]
    fn perturb_matches_its_contract() {
        let triple = ParamTriple::new(0.0, vec![10.0], vec![2.0]);

        // Zero spread is the identity.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let same = perturb(&triple, 0.0, &mut rng);
        assert_eq!(same.flatten(), triple.flatten());

        // Same seed, same result.
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            perturb(&triple, 0.05, &mut r1).flatten(),
            perturb(&triple, 0.05, &mut r2).flatten()
        );

        // Multiplicative on nonzero coordinates: mostly within two sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut within = 0;
        for _ in 0..100 {
            let p = perturb(&triple, 0.05, &mut rng);
            if (9.0..=11.0).contains(&p.x0[0]) {
                within += 1;
            }
            // Zero coordinate gets small absolute noise.
            assert!(p.t0 != 0.0);
            assert!(p.t0.abs() <= 0.05 * 6.0);
        }
        assert!(within >= 85, "only {within} of 100 inside two sigma");
    }

    #[test]
    fn random_measure_is_normalized_and_approximately_uniform_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);

        // Single draw: valid probability measure.
        let m = random_measure(4, &mut rng).unwrap();
        let mass = m.mass_check().unwrap();
        assert!((mass - 1.0).abs() <= 1e-8, "mass {mass}");
        assert!(m.atoms().is_empty());

        // Monte-Carlo mean density close to one on a grid.
        let grid: Vec<f64> = (0..64).map(|i| (i as f64 + 0.5) / 64.0).collect();
        let mut mean = vec![0.0; grid.len()];
        let draws = 2000;
        for _ in 0..draws {
            let m = random_measure(4, &mut rng).unwrap();
            for (acc, &tau) in mean.iter_mut().zip(&grid) {
                *acc += m.density(tau);
            }
        }
        for (acc, &tau) in mean.iter_mut().zip(&grid) {
            *acc /= draws as f64;
            assert!(
                (*acc - 1.0).abs() <= 0.15,
                "mean density {acc} at tau = {tau}"
            );
        }
    }

    #[test]
    fn random_measure_rejects_zero_bumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_measure(0, &mut rng).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let h = si_data(0.0, 7);
        let sigma = SamplingMeasure::lebesgue();
        let start = Si::truth();
        for cfg in [
            FitConfig {
                steps: 0,
                ..FitConfig::default()
            },
            FitConfig {
                learning_rate: 0.0,
                ..FitConfig::default()
            },
            FitConfig {
                eval_loss_every: 0,
                ..FitConfig::default()
            },
            FitConfig {
                frozen_coords: vec![9],
                ..FitConfig::default()
            },
        ] {
            assert!(fit(&Si, &h, &sigma, &start, &cfg).is_err());
        }
    }

    #[test]
    fn csv_rendering_has_stable_shape() {
        let h = si_data(0.0, 7);
        let sigma = SamplingMeasure::lebesgue();
        let cfg = FitConfig {
            steps: 2,
            eval_loss_every: 2,
            line_search: false,
            learning_rate: 1e-4,
            ..FitConfig::default()
        };
        let trace = fit(&Si, &h, &sigma, &Si::truth(), &cfg).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "step,loss,grad_norm,t0,x0[0],x0[1],theta[0],theta[1]");
        // Step 1 is skipped by eval_loss_every = 2: empty loss field.
        assert!(lines[2].starts_with("1,,"));
        // Steps 0 and 2 carry losses.
        assert!(!lines[1].starts_with("0,,"));
        assert!(!lines[3].starts_with("2,,"));
    }
}
