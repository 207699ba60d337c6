//! Exact loss gradients through the backward adjoint equation.
//!
//! With the forward trajectory fixed, the adjoint state `a(tau)` in the
//! extended variable `(t0, x0, theta)` solves a linear ODE backward over the
//! window, driven by the error gradient weighted by the measure density:
//!
//! ```text
//!     a'(tau) = -rho_c(tau) * g(tau) - J(tau)^T-contracted a(tau)
//! ```
//!
//! where `g` is the pointwise error gradient and `J` the model Jacobian in
//! `(t, x, theta)` along the forward solution.  Each atom of the measure
//! contributes a jump `weight * g(tau)` as the sweep crosses it: an atom at
//! the window end seeds the terminal value, interior atoms split the sweep
//! into exactly-resolved segments, and an atom at the window start is added
//! after integration finishes.  The gradient of the loss with respect to the
//! flattened `(t0, x0, theta)` vector is `a(0)`.

use crate::error::{Error, Result};
use crate::loss::ErrorFunctional;
use crate::measure::SamplingMeasure;
use crate::models::{Jacobian, ParamTriple, VectorField};
use crate::odesolve::{integrate_with_stops, solve_forward, SolverConfig, Trajectory};

/// Absolute slack when checking that a forward trajectory spans the unit
/// window of its triple.
const SPAN_TOL: f64 = 1e-9;

/// Split a flat adjoint (or gradient) vector of length `1 + d + k` into its
/// time, state, and parameter blocks.
pub fn adjoint_blocks(a: &[f64], d: usize, k: usize) -> Result<(f64, &[f64], &[f64])> {
    if a.len() != 1 + d + k {
        return Err(Error::invalid(format!(
            "adjoint vector has length {}, expected 1 + {d} + {k}",
            a.len()
        )));
    }
    Ok((a[0], &a[1..1 + d], &a[1 + d..]))
}

// ---------------------------------------------------------------------------
// Problem setup
// ---------------------------------------------------------------------------

/// A gradient computation bound to one forward trajectory.
///
/// Borrowing the trajectory lets a caller evaluate the loss and its gradient
/// from a single forward solve.
pub struct AdjointProblem<'a> {
    model: &'a dyn VectorField,
    triple: &'a ParamTriple,
    traj: &'a Trajectory,
    h: &'a ErrorFunctional,
    sigma: &'a SamplingMeasure,
    cfg: SolverConfig,
}

impl<'a> AdjointProblem<'a> {
    pub fn new(
        model: &'a dyn VectorField,
        triple: &'a ParamTriple,
        traj: &'a Trajectory,
        h: &'a ErrorFunctional,
        sigma: &'a SamplingMeasure,
        cfg: SolverConfig,
    ) -> Result<Self> {
        let (d, k) = (model.dim_state(), model.dim_param());
        if triple.dim_state() != d || triple.dim_param() != k {
            return Err(Error::invalid(format!(
                "triple dimensions ({}, {}) do not match model '{}' ({d}, {k})",
                triple.dim_state(),
                triple.dim_param(),
                model.name()
            )));
        }
        if traj.dim() != d {
            return Err(Error::invalid(format!(
                "trajectory dimension {} does not match model '{}' dimension {d}",
                traj.dim(),
                model.name()
            )));
        }
        if (traj.t_start() - triple.t0).abs() > SPAN_TOL
            || (traj.t_end() - (triple.t0 + 1.0)).abs() > SPAN_TOL
        {
            return Err(Error::invalid(format!(
                "trajectory spans [{}, {}] but the triple's window is [{}, {}]",
                traj.t_start(),
                traj.t_end(),
                triple.t0,
                triple.t0 + 1.0
            )));
        }
        if h.obs_index() >= d {
            return Err(Error::invalid(format!(
                "obs_index {} out of range for state dimension {d}",
                h.obs_index()
            )));
        }
        Ok(AdjointProblem {
            model,
            triple,
            traj,
            h,
            sigma,
            cfg,
        })
    }

    fn dims(&self) -> (usize, usize) {
        (self.model.dim_state(), self.model.dim_param())
    }

    /// Right-hand side of the backward adjoint ODE at window time `tau`.
    ///
    /// Writes `-rho_c(tau) g(tau) - sum_j a2_j * J_row_j(tau)` into `out`
    /// (length `1 + d + k`).
    pub fn rhs(&self, tau: f64, a: &[f64], out: &mut [f64]) -> Result<()> {
        let (d, k) = self.dims();
        let n = 1 + d + k;
        if a.len() != n || out.len() != n {
            return Err(Error::invalid(format!(
                "adjoint state must have length {n}, got {} (out {})",
                a.len(),
                out.len()
            )));
        }
        let x = self.traj.eval(self.triple.t0 + tau)?;
        let mut jac = Jacobian::zeros(d, k);
        self.model
            .jacobian_into(self.triple.t0 + tau, &x, &self.triple.theta, jac.as_mut_slice());
        for col in 0..n {
            let mut s = 0.0;
            for j in 0..d {
                s += a[1 + j] * jac.at(j, col);
            }
            out[col] = -s;
        }
        let rho = self.sigma.density(tau);
        if rho != 0.0 {
            let g = self.h.error_gradient(tau, &x, k)?;
            for (o, gi) in out.iter_mut().zip(&g) {
                *o -= rho * gi;
            }
        }
        Ok(())
    }

    /// Error gradient at window time `tau` scaled by `weight` — the jump an
    /// atom of that weight inserts into the backward sweep.
    fn scaled_error_gradient(&self, tau: f64, weight: f64) -> Result<Vec<f64>> {
        let (_, k) = self.dims();
        let x = self.traj.eval(self.triple.t0 + tau)?;
        let mut g = self.h.error_gradient(tau, &x, k)?;
        for gi in &mut g {
            *gi *= weight;
        }
        Ok(g)
    }

    /// Run the backward sweep and assemble the full adjoint solution.
    pub fn solve(&self) -> Result<AdjointSolution> {
        let (d, k) = self.dims();
        let n = 1 + d + k;
        let atoms = self.sigma.atoms();

        // Terminal value at tau = 1: the end-of-window atom, if any.
        let mut a = vec![0.0; n];
        let mut jumps: Vec<AdjointJump> = Vec::new();
        if let Some(atom) = atoms.iter().find(|at| at.tau == 1.0) {
            let delta = self.scaled_error_gradient(1.0, atom.weight)?;
            a.copy_from_slice(&delta);
            jumps.push(AdjointJump { tau: 1.0, delta });
        }

        // Nothing on (0, 1] drives the adjoint, so it is identically zero
        // there and only a start-of-window atom can contribute.
        let driven = self.sigma.has_continuous_part() || atoms.iter().any(|at| at.tau > 0.0);
        let mut segments = Vec::new();
        if driven {
            // When a density feeds the data into the backward equation, the
            // right-hand side inherits the data's interpolation seams (and
            // the density's own cell boundaries).  Force step endpoints onto
            // them, exactly as the loss quadrature splits its panels there.
            let stops = if self.sigma.has_continuous_part() {
                let mut stops = self.h.knots();
                stops.extend(self.sigma.density_knots());
                stops
            } else {
                Vec::new()
            };
            let mut hi = 1.0;
            for atom in atoms.iter().rev().filter(|at| at.tau > 0.0 && at.tau < 1.0) {
                let seg = integrate_with_stops(
                    |tau, a, out| self.rhs(tau, a, out),
                    hi,
                    &a,
                    atom.tau,
                    &stops,
                    &self.cfg,
                )?;
                a.copy_from_slice(seg.end_state());
                segments.push(seg);
                let delta = self.scaled_error_gradient(atom.tau, atom.weight)?;
                for (ai, di) in a.iter_mut().zip(&delta) {
                    *ai += di;
                }
                jumps.push(AdjointJump {
                    tau: atom.tau,
                    delta,
                });
                hi = atom.tau;
            }
            let seg = integrate_with_stops(
                |tau, a, out| self.rhs(tau, a, out),
                hi,
                &a,
                0.0,
                &stops,
                &self.cfg,
            )?;
            a.copy_from_slice(seg.end_state());
            segments.push(seg);
        }

        if let Some(atom) = atoms.iter().find(|at| at.tau == 0.0) {
            let delta = self.scaled_error_gradient(0.0, atom.weight)?;
            for (ai, di) in a.iter_mut().zip(&delta) {
                *ai += di;
            }
            jumps.push(AdjointJump { tau: 0.0, delta });
        }

        segments.reverse();
        jumps.reverse();
        let initial_condition = match jumps.last() {
            Some(j) if j.tau == 1.0 => j.delta.clone(),
            _ => vec![0.0; n],
        };
        Ok(AdjointSolution {
            dim_state: d,
            dim_param: k,
            initial_condition,
            segments,
            jumps,
            gradient: a,
        })
    }
}

// ---------------------------------------------------------------------------
// Solution
// ---------------------------------------------------------------------------

/// One atom's contribution to the backward sweep: crossing window time `tau`
/// adds `delta = weight * g(tau)` to the adjoint state.
#[derive(Debug, Clone)]
pub struct AdjointJump {
    pub tau: f64,
    pub delta: Vec<f64>,
}

/// The assembled backward solution.
///
/// `eval` treats the adjoint as left-continuous: at an atom the returned
/// value includes that atom's jump, and `eval(0.0)` returns the gradient
/// (including a start-of-window atom, if any).
#[derive(Debug)]
pub struct AdjointSolution {
    dim_state: usize,
    dim_param: usize,
    /// Terminal value `a(1)`: the end-of-window atom's `weight * g(1)`, or
    /// zero when the measure has no atom there.
    initial_condition: Vec<f64>,
    /// Backward trajectory pieces between consecutive atoms, in ascending
    /// window-time order.
    segments: Vec<Trajectory>,
    /// Atom contributions in ascending window-time order.
    jumps: Vec<AdjointJump>,
    /// `a(0)`: the loss gradient with respect to the flattened triple.
    gradient: Vec<f64>,
}

impl AdjointSolution {
    pub fn dim(&self) -> usize {
        1 + self.dim_state + self.dim_param
    }

    pub fn initial_condition(&self) -> &[f64] {
        &self.initial_condition
    }

    pub fn segments(&self) -> &[Trajectory] {
        &self.segments
    }

    pub fn jumps(&self) -> &[AdjointJump] {
        &self.jumps
    }

    /// Gradient of the loss with respect to the flattened `(t0, x0, theta)`.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Gradient blocks `(d/dt0, d/dx0, d/dtheta)`.
    pub fn gradient_blocks(&self) -> (f64, &[f64], &[f64]) {
        adjoint_blocks(&self.gradient, self.dim_state, self.dim_param)
            .expect("gradient length is fixed at construction")
    }

    /// Adjoint state at window time `tau` in `[0, 1]`.
    pub fn eval(&self, tau: f64) -> Result<Vec<f64>> {
        if !((-1e-12..=1.0 + 1e-12).contains(&tau)) {
            return Err(Error::OutOfSpan {
                t: tau,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if tau <= 0.0 {
            return Ok(self.gradient.clone());
        }
        if self.segments.is_empty() {
            // Undriven sweep: zero everywhere above the window start.
            return Ok(vec![0.0; self.dim()]);
        }
        // Segments ascend; each was integrated backward, so its window span
        // is [t_end, t_start].  Pick the lowest segment containing tau so a
        // value exactly at an atom includes the jump.
        let idx = self
            .segments
            .partition_point(|seg| seg.t_start() < tau)
            .min(self.segments.len() - 1);
        self.segments[idx].eval(tau)
    }
}

// ---------------------------------------------------------------------------
// Convenience front ends
// ---------------------------------------------------------------------------

/// Loss and gradient from one forward solve.
pub fn loss_and_gradient(
    model: &dyn VectorField,
    triple: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    cfg: &SolverConfig,
) -> Result<(crate::loss::LossReport, AdjointSolution)> {
    let traj = solve_forward(model, triple, cfg)?;
    let report = crate::loss::loss_of_trajectory(&traj, h, sigma, cfg)?;
    let solution = AdjointProblem::new(model, triple, &traj, h, sigma, cfg.clone())?.solve()?;
    Ok((report, solution))
}

/// Gradient of the loss with respect to the flattened `(t0, x0, theta)`.
pub fn gradient(
    model: &dyn VectorField,
    triple: &ParamTriple,
    h: &ErrorFunctional,
    sigma: &SamplingMeasure,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let traj = solve_forward(model, triple, cfg)?;
    let solution = AdjointProblem::new(model, triple, &traj, h, sigma, cfg.clone())?.solve()?;
    Ok(solution.gradient)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
