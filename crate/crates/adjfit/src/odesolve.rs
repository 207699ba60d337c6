//! Adaptive explicit Runge-Kutta integration with dense output.
//!
//! The integrator is a Dormand-Prince 5(4) embedded pair: fifth-order
//! propagation, fourth-order error estimate, first-same-as-last stage reuse,
//! and a PI step-size controller.  Every accepted step stores `(t, y, y')`
//! together with the pair's quartic interpolation coefficients, so a
//! trajectory is solved once and then evaluated anywhere in its span with
//! accuracy matching the step error -- including by the backward adjoint
//! pass, which never re-solves the forward problem.
//!
//! Integration runs in either time direction: pass `t_to < t_from` and the
//! controller works with negative steps.

use crate::error::{Error, Result};
use crate::models::{ParamTriple, VectorField};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Tolerances and budgets for [`integrate`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative tolerance per component (weighted RMS test).
    pub rel_tol: f64,
    /// Absolute tolerance per component.
    pub abs_tol: f64,
    /// First step-size magnitude; `0.0` selects one automatically.
    pub initial_step: f64,
    /// Maximum number of step attempts before giving up.
    pub max_steps: usize,
}

impl Default for SolverConfig {
    /// Tight default (`1e-9` both tolerances) used by gradient computations;
    /// descent loops typically relax to `1e-6` via [`SolverConfig::with_tol`].
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            initial_step: 0.0,
            max_steps: 1_000_000,
        }
    }
}

impl SolverConfig {
    /// Default configuration with both tolerances replaced.
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        SolverConfig {
            rel_tol,
            abs_tol,
            ..SolverConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol must be positive and finite"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("abs_tol must be positive and finite"));
        }
        if !(self.initial_step >= 0.0 && self.initial_step.is_finite()) {
            return Err(Error::invalid("initial_step must be >= 0 and finite"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Trajectory (dense output)
// ---------------------------------------------------------------------------

/// Slack allowed when querying just past a trajectory endpoint, to absorb
/// rounding in expressions like `t0 + tau`.
const SPAN_SLACK: f64 = 1e-12;

/// Dense solver output: accepted nodes `(t_i, y_i, y'_i)` plus the solver's
/// quartic interpolation coefficients on each step interval.
///
/// Node times are strictly monotone from `t_start()` to `t_end()` in the
/// direction of integration.  Queries at node times reproduce the stored
/// values exactly; between nodes the interpolant is continuous across
/// boundaries because adjacent segments share the node value, and its local
/// error tracks the step error estimate.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    /// Node states, flat row-major (`node * dim + component`).
    ys: Vec<f64>,
    /// Node derivatives, same layout.
    dys: Vec<f64>,
    /// Interpolation coefficients for each step interval (`(node_count - 1)
    /// * dim` entries each); see [`dense_value`] for the evaluation scheme.
    c3: Vec<f64>,
    c4: Vec<f64>,
    c5: Vec<f64>,
}

/// Evaluate the stored quartic interpolant at normalized position `s` in
/// `[0, 1]` across one step.  `ya`/`yb` are the segment's endpoint states and
/// `c3..c5` its coefficients: the polynomial is exact at both endpoints by
/// construction.
#[inline]
fn dense_value(ya: f64, yb: f64, c3: f64, c4: f64, c5: f64, s: f64) -> f64 {
    let s1 = 1.0 - s;
    ya + s * ((yb - ya) + s1 * (c3 + s * (c4 + s1 * c5)))
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            ts: Vec::new(),
            ys: Vec::new(),
            dys: Vec::new(),
            c3: Vec::new(),
            c4: Vec::new(),
            c5: Vec::new(),
        }
    }

    fn push_node(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(dy.len(), self.dim);
        self.ts.push(t);
        self.ys.extend_from_slice(y);
        self.dys.extend_from_slice(dy);
    }

    fn push_dense_coeffs(&mut self, c3: &[f64], c4: &[f64], c5: &[f64]) {
        self.c3.extend_from_slice(c3);
        self.c4.extend_from_slice(c4);
        self.c5.extend_from_slice(c5);
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored nodes (accepted steps plus the initial point).
    pub fn node_count(&self) -> usize {
        self.ts.len()
    }

    /// Node times in integration order.
    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    /// First node time.
    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    /// Last node time.
    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    /// Stored state at node `idx`.
    pub fn node_state(&self, idx: usize) -> &[f64] {
        &self.ys[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Stored derivative at node `idx`.
    pub fn node_derivative(&self, idx: usize) -> &[f64] {
        &self.dys[idx * self.dim..(idx + 1) * self.dim]
    }

    /// State at the final node.
    pub fn end_state(&self) -> &[f64] {
        self.node_state(self.node_count() - 1)
    }

    /// Locate the segment containing `t` and the normalized position within
    /// it.  Returns `Err(OutOfSpan)` when `t` lies outside the span by more
    /// than a tiny slack; queries inside the slack are clamped.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.ts.len();
        let (t0, t1) = (self.ts[0], self.ts[n - 1]);
        let lo = t0.min(t1);
        let hi = t0.max(t1);
        let slack = SPAN_SLACK * lo.abs().max(hi.abs()).max(1.0);
        if t < lo - slack || t > hi + slack {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        if n == 1 {
            return Ok((0, 0.0));
        }
        // Map onto an ascending axis regardless of integration direction.
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let key = dir * t;
        let idx = self.ts.partition_point(|&tt| dir * tt <= key);
        let seg = idx.clamp(1, n - 1);
        let ta = self.ts[seg - 1];
        let tb = self.ts[seg];
        let s = (t - ta) / (tb - ta);
        Ok((seg, s))
    }

    /// Interpolated state at `t`, written into `out` (length `dim`).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dim {
            return Err(Error::invalid(format!(
                "output buffer has length {}, expected {}",
                out.len(),
                self.dim
            )));
        }
        let (seg, s) = self.locate(t)?;
        if self.ts.len() == 1 {
            out.copy_from_slice(self.node_state(0));
            return Ok(());
        }
        let ya = self.node_state(seg - 1);
        let yb = self.node_state(seg);
        let base = (seg - 1) * self.dim;
        for c in 0..self.dim {
            out[c] = dense_value(
                ya[c],
                yb[c],
                self.c3[base + c],
                self.c4[base + c],
                self.c5[base + c],
                s,
            );
        }
        Ok(())
    }

    /// Interpolated state at `t` as a fresh vector.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Single interpolated component at `t`; avoids allocation, which matters
    /// inside quadrature loops.
    pub fn eval_component(&self, t: f64, comp: usize) -> Result<f64> {
        if comp >= self.dim {
            return Err(Error::invalid(format!(
                "component {comp} out of range for dimension {}",
                self.dim
            )));
        }
        let (seg, s) = self.locate(t)?;
        if self.ts.len() == 1 {
            return Ok(self.node_state(0)[comp]);
        }
        let base = (seg - 1) * self.dim + comp;
        Ok(dense_value(
            self.node_state(seg - 1)[comp],
            self.node_state(seg)[comp],
            self.c3[base],
            self.c4[base],
            self.c5[base],
            s,
        ))
    }
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) coefficients
// ---------------------------------------------------------------------------

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

/// Fifth-order propagation weights (also the last stage row: FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

/// Difference between the fifth- and embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Weights of the pair's quartic continuous extension (the `c5` term).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller: h_new = h * safety * err^(-ALPHA) * err_prev^(BETA),
// clamped to [FAC_MIN, FAC_MAX].
const SAFETY: f64 = 0.9;
const ALPHA: f64 = 0.17; // 1/5 - 0.75 * BETA
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Integrate `y' = rhs(t, y)` from `(t_from, y_from)` to `t_to`, in either
/// time direction, and return the dense trajectory.
///
/// The right-hand side writes its value into the provided buffer and may
/// fail (the adjoint right-hand side queries a stored trajectory, for
/// example); any such error aborts the integration.
pub fn integrate<F>(
    rhs: F,
    t_from: f64,
    y_from: &[f64],
    t_to: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_with_stops(rhs, t_from, y_from, t_to, &[], cfg)
}

/// Like [`integrate`], but every listed time strictly inside the span becomes
/// a mandatory step endpoint.
///
/// Use this when the right-hand side is only piecewise smooth (the backward
/// gradient pass drives its state with interpolated data, which has a seam at
/// every grid point).  Landing the steps exactly on the seams keeps each step
/// on a single smooth piece, so the embedded error estimate — which assumes
/// smoothness — remains trustworthy.  Times outside the open span are
/// ignored; order and duplicates don't matter.
pub fn integrate_with_stops<F>(
    mut rhs: F,
    t_from: f64,
    y_from: &[f64],
    t_to: f64,
    stops: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    let m = y_from.len();
    if m == 0 {
        return Err(Error::invalid("state must have at least one component"));
    }
    if !t_from.is_finite() || !t_to.is_finite() {
        return Err(Error::invalid("integration endpoints must be finite"));
    }
    if y_from.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state contains a non-finite value"));
    }

    let mut traj = Trajectory::new(m);
    let mut y = y_from.to_vec();
    let mut k1 = vec![0.0; m];
    rhs(t_from, &y, &mut k1)?;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(format!(
            "right-hand side not finite at initial time {t_from}"
        )));
    }
    traj.push_node(t_from, &y, &k1);
    if t_to == t_from {
        return Ok(traj);
    }

    let dir = if t_to > t_from { 1.0 } else { -1.0 };
    let span = (t_to - t_from).abs();

    // Mandatory interior landings, ordered along the direction of
    // integration, with near-coincident times merged.
    let mut stops_sorted: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|s| s.is_finite() && (s - t_from) * dir > 0.0 && (t_to - s) * dir > 0.0)
        .collect();
    stops_sorted.sort_by(|a, b| if dir > 0.0 { a.total_cmp(b) } else { b.total_cmp(a) });
    stops_sorted.dedup_by(|a, b| (*a - *b).abs() <= 64.0 * f64::EPSILON * a.abs().max(1.0));
    let mut stop_idx = 0usize;

    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut k5 = vec![0.0; m];
    let mut k6 = vec![0.0; m];
    let mut k7 = vec![0.0; m];
    let mut ytmp = vec![0.0; m];
    let mut ynew = vec![0.0; m];
    let mut c3 = vec![0.0; m];
    let mut c4 = vec![0.0; m];
    let mut c5 = vec![0.0; m];

    let mut h_abs = if cfg.initial_step > 0.0 {
        cfg.initial_step.min(span)
    } else {
        initial_step_guess(&y, &k1, cfg).min(span)
    };

    let mut t = t_from;
    let mut err_prev: f64 = 1e-4;
    let mut attempts = 0usize;

    loop {
        if attempts >= cfg.max_steps {
            return Err(Error::StepLimit(format!(
                "no convergence within {} step attempts (reached t = {t})",
                cfg.max_steps
            )));
        }
        attempts += 1;

        let min_h = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h_abs < min_h {
            return Err(Error::Diverged(format!(
                "step size underflow at t = {t} (h = {h_abs:e})"
            )));
        }

        // Passed stops (we land on them exactly) scroll out of view.
        while stop_idx < stops_sorted.len() && (stops_sorted[stop_idx] - t) * dir <= 0.0 {
            stop_idx += 1;
        }
        let remaining = t_to - t;
        let mut last = false;
        // Exact landing time when the step is clamped to a stop or the end.
        let mut target = None;
        let h = match stops_sorted.get(stop_idx) {
            Some(&s) if h_abs >= (s - t).abs() => {
                target = Some(s);
                s - t
            }
            _ if h_abs >= remaining.abs() => {
                last = true;
                target = Some(t_to);
                remaining
            }
            _ => h_abs * dir,
        };

        // Stages 2..6.
        for c in 0..m {
            ytmp[c] = y[c] + h * A21 * k1[c];
        }
        rhs(t + C2 * h, &ytmp, &mut k2)?;
        for c in 0..m {
            ytmp[c] = y[c] + h * (A31 * k1[c] + A32 * k2[c]);
        }
        rhs(t + C3 * h, &ytmp, &mut k3)?;
        for c in 0..m {
            ytmp[c] = y[c] + h * (A41 * k1[c] + A42 * k2[c] + A43 * k3[c]);
        }
        rhs(t + C4 * h, &ytmp, &mut k4)?;
        for c in 0..m {
            ytmp[c] = y[c] + h * (A51 * k1[c] + A52 * k2[c] + A53 * k3[c] + A54 * k4[c]);
        }
        rhs(t + C5 * h, &ytmp, &mut k5)?;
        for c in 0..m {
            ytmp[c] =
                y[c] + h * (A61 * k1[c] + A62 * k2[c] + A63 * k3[c] + A64 * k4[c] + A65 * k5[c]);
        }
        rhs(t + h, &ytmp, &mut k6)?;

        // Fifth-order solution; its derivative is the FSAL stage.
        for c in 0..m {
            ynew[c] =
                y[c] + h * (B1 * k1[c] + B3 * k3[c] + B4 * k4[c] + B5 * k5[c] + B6 * k6[c]);
        }
        let t_new = target.unwrap_or(t + h);
        rhs(t_new, &ynew, &mut k7)?;

        // Weighted RMS error estimate.
        let mut err_sq = 0.0;
        for c in 0..m {
            let e = h
                * (E1 * k1[c]
                    + E3 * k3[c]
                    + E4 * k4[c]
                    + E5 * k5[c]
                    + E6 * k6[c]
                    + E7 * k7[c]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[c].abs().max(ynew[c].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / m as f64).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!(
                "solution or error estimate not finite near t = {t}"
            )));
        }

        if err <= 1.0 {
            // Accept: derive the interval's interpolation coefficients from
            // the stages, then roll the state forward.
            for c in 0..m {
                let dy = ynew[c] - y[c];
                let bspl = h * k1[c] - dy;
                c3[c] = bspl;
                c4[c] = dy - h * k7[c] - bspl;
                c5[c] = h
                    * (D1 * k1[c]
                        + D3 * k3[c]
                        + D4 * k4[c]
                        + D5 * k5[c]
                        + D6 * k6[c]
                        + D7 * k7[c]);
            }
            traj.push_dense_coeffs(&c3, &c4, &c5);
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            traj.push_node(t_new, &y, &k1);
            if last {
                return Ok(traj);
            }
            t = t_new;
            let fac = (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX);
            h_abs *= fac;
            err_prev = err.max(1e-10);
        } else {
            // Reject: shrink without allowing growth.
            let fac = (SAFETY * err.powf(-ALPHA)).clamp(FAC_MIN, 1.0);
            h_abs *= fac;
        }
    }
}

/// Cheap starting-step heuristic from the initial state/derivative balance.
fn initial_step_guess(y: &[f64], dy: &[f64], cfg: &SolverConfig) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for c in 0..y.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * y[c].abs();
        d0 += (y[c] / sc) * (y[c] / sc);
        d1 += (dy[c] / sc) * (dy[c] / sc);
    }
    let d0 = (d0 / y.len() as f64).sqrt();
    let d1 = (d1 / y.len() as f64).sqrt();
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

// ---------------------------------------------------------------------------
// Model front ends
// ---------------------------------------------------------------------------

/// Solve the model over the unit observation window `[t0, t0 + 1]`.
pub fn solve_forward(
    model: &dyn VectorField,
    triple: &ParamTriple,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    solve_span(model, triple, triple.t0 + 1.0, cfg)
}

/// Solve the model from `t0` to an arbitrary end time.
pub fn solve_span(
    model: &dyn VectorField,
    triple: &ParamTriple,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if triple.dim_state() != model.dim_state() || triple.dim_param() != model.dim_param() {
        return Err(Error::invalid(format!(
            "triple dimensions ({}, {}) do not match model '{}' ({}, {})",
            triple.dim_state(),
            triple.dim_param(),
            model.name(),
            model.dim_state(),
            model.dim_param()
        )));
    }
    let theta = triple.theta.clone();
    integrate(
        |t, x, out| {
            model.field_into(t, x, &theta, out);
            Ok(())
        },
        triple.t0,
        &triple.x0,
        t_end,
        cfg,
    )
}

/// Sup-norm discrepancy between solving for duration `s + t` directly and
/// solving for `s`, restarting, and solving for `t`.
///
/// Small values certify the semigroup behaviour of the numerical flow at the
/// configured tolerance.
pub fn flow_compose_diff(
    model: &dyn VectorField,
    triple: &ParamTriple,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::invalid("durations must be non-negative"));
    }
    let direct = solve_span(model, triple, triple.t0 + s + t, cfg)?;
    let first = solve_span(model, triple, triple.t0 + s, cfg)?;
    let mid = ParamTriple::new(
        triple.t0 + s,
        first.end_state().to_vec(),
        triple.theta.clone(),
    );
    let second = solve_span(model, &mid, triple.t0 + s + t, cfg)?;
    let a = direct.end_state();
    let b = second.end_state();
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    Ok(diff)
}

/// Whether [`flow_compose_diff`] stays within `10 * (rel_tol * |x|_inf + abs_tol)`,
/// a generous multiple of the one-solve error level.
pub fn flow_compose_check(
    model: &dyn VectorField,
    triple: &ParamTriple,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<bool> {
    let diff = flow_compose_diff(model, triple, s, t, cfg)?;
    let direct = solve_span(model, triple, triple.t0 + s + t, cfg)?;
    let scale = direct
        .end_state()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(diff <= 10.0 * (cfg.rel_tol * scale + cfg.abs_tol))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
