//! Parametric vector fields and the flat parameter layout shared by the
//! whole crate.
//!
//! A model is a time-dependent field `f(t, x, theta)` on a `d`-dimensional
//! state with `k` scalar parameters, together with the Jacobian of `f` with
//! respect to the *extended* variable `(t, x, theta)`.  The extended layout
//! `[t0 | x0 | theta]` is what gradients, finite differences, and descent all
//! operate on, so it is defined once here ([`ParamTriple`]) and reused
//! everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Parameter triple
// ---------------------------------------------------------------------------

/// Initial time, initial state, and model parameters for one initial value
/// problem, in the flat order `[t0, x0[0..d], theta[0..k]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTriple {
    /// Initial time of the unit observation window `[t0, t0 + 1]`.
    pub t0: f64,
    /// Initial state, length `d`.
    pub x0: Vec<f64>,
    /// Model parameters, length `k`.
    pub theta: Vec<f64>,
}

impl ParamTriple {
    pub fn new(t0: f64, x0: Vec<f64>, theta: Vec<f64>) -> Self {
        ParamTriple { t0, x0, theta }
    }

    /// State dimension `d`.
    pub fn dim_state(&self) -> usize {
        self.x0.len()
    }

    /// Parameter dimension `k`.
    pub fn dim_param(&self) -> usize {
        self.theta.len()
    }

    /// Length of the flat layout, `1 + d + k`.
    pub fn dim_flat(&self) -> usize {
        1 + self.x0.len() + self.theta.len()
    }

    /// Flatten to `[t0, x0.., theta..]`.  Lossless: [`unflatten`] restores
    /// the exact same values.
    ///
    /// [`unflatten`]: ParamTriple::unflatten
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim_flat());
        out.push(self.t0);
        out.extend_from_slice(&self.x0);
        out.extend_from_slice(&self.theta);
        out
    }

    /// Rebuild a triple from a flat vector laid out as `[t0, x0.., theta..]`.
    ///
    /// Errors if `flat.len() != 1 + d + k`.
    pub fn unflatten(flat: &[f64], d: usize, k: usize) -> Result<Self> {
        if flat.len() != 1 + d + k {
            return Err(Error::invalid(format!(
                "flat vector has length {}, expected 1 + {d} + {k} = {}",
                flat.len(),
                1 + d + k
            )));
        }
        Ok(ParamTriple {
            t0: flat[0],
            x0: flat[1..1 + d].to_vec(),
            theta: flat[1 + d..].to_vec(),
        })
    }
}

// ---------------------------------------------------------------------------
// Jacobian of the extended field
// ---------------------------------------------------------------------------

/// Dense row-major `d x (1 + d + k)` Jacobian of `f` with respect to the
/// extended variable, columns ordered `[t | x | theta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Jacobian {
    /// Zero-filled Jacobian for a `d`-state, `k`-parameter model.
    pub fn zeros(d: usize, k: usize) -> Self {
        Jacobian {
            data: vec![0.0; d * (1 + d + k)],
            rows: d,
            cols: 1 + d + k,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry `(r, c)` with columns ordered `[t | x | theta]`.
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Row `r` as a slice of length `1 + d + k`.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Flat row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

// ---------------------------------------------------------------------------
// Vector field trait
// ---------------------------------------------------------------------------

/// A parametric vector field `x'(t) = f(t, x, theta)` with an analytic
/// Jacobian in the extended variable `(t, x, theta)`.
///
/// Implementations write into caller-provided buffers so the ODE and adjoint
/// solvers can run allocation-free inner loops.  Use [`eval_field`] /
/// [`eval_jacobian`] for the validated, allocating entry points.
pub trait VectorField: Send + Sync {
    /// Short identifier, e.g. `"si"`.
    fn name(&self) -> &'static str;

    /// State dimension `d`.
    fn dim_state(&self) -> usize;

    /// Parameter dimension `k`.
    fn dim_param(&self) -> usize;

    /// Write `f(t, x, theta)` into `out` (length `d`).  Inputs are assumed
    /// dimension-checked by the caller.
    fn field_into(&self, t: f64, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// Write the row-major `d x (1 + d + k)` Jacobian into `out`, columns
    /// ordered `[t | x | theta]`.  `out` is zero-filled by the caller.
    fn jacobian_into(&self, t: f64, x: &[f64], theta: &[f64], out: &mut [f64]);
}

fn check_dims(model: &dyn VectorField, x: &[f64], theta: &[f64]) -> Result<()> {
    let (d, k) = (model.dim_state(), model.dim_param());
    if x.len() != d {
        return Err(Error::invalid(format!(
            "model '{}' expects state dimension {d}, got {}",
            model.name(),
            x.len()
        )));
    }
    if theta.len() != k {
        return Err(Error::invalid(format!(
            "model '{}' expects {k} parameters, got {}",
            model.name(),
            theta.len()
        )));
    }
    Ok(())
}

fn check_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{label} contains a non-finite value")));
    }
    Ok(())
}

/// Validated field evaluation: checks dimensions and finiteness, then returns
/// `f(t, x, theta)` as a fresh vector.
pub fn eval_field(model: &dyn VectorField, t: f64, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    check_dims(model, x, theta)?;
    check_finite("state", x)?;
    check_finite("theta", theta)?;
    if !t.is_finite() {
        return Err(Error::invalid("time is not finite"));
    }
    let mut out = vec![0.0; model.dim_state()];
    model.field_into(t, x, theta, &mut out);
    Ok(out)
}

/// Validated Jacobian evaluation in the extended variable `(t, x, theta)`.
pub fn eval_jacobian(model: &dyn VectorField, t: f64, x: &[f64], theta: &[f64]) -> Result<Jacobian> {
    check_dims(model, x, theta)?;
    check_finite("state", x)?;
    check_finite("theta", theta)?;
    if !t.is_finite() {
        return Err(Error::invalid("time is not finite"));
    }
    let mut jac = Jacobian::zeros(model.dim_state(), model.dim_param());
    model.jacobian_into(t, x, theta, jac.as_mut_slice());
    Ok(jac)
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// Two-compartment epidemic flow.  State `(s, i)`: susceptible mass converts
/// to infectious mass at rate `beta * i * s / 10`, and infectious mass decays
/// at rate `gamma * i`.  Parameters `theta = (beta, gamma)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Si;

impl Si {
    /// Reference triple used by the experiment drivers as ground truth:
    /// `t0 = 0`, `x0 = (9, 0.5)`, `(beta, gamma) = (10, 3)`.
    pub fn truth() -> ParamTriple {
        ParamTriple::new(0.0, vec![9.0, 0.5], vec![10.0, 3.0])
    }
}

impl VectorField for Si {
    fn name(&self) -> &'static str {
        "si"
    }

    fn dim_state(&self) -> usize {
        2
    }

    fn dim_param(&self) -> usize {
        2
    }

    fn field_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        let (s, i) = (x[0], x[1]);
        let (beta, gamma) = (theta[0], theta[1]);
        let transfer = beta * i * s / 10.0;
        out[0] = -transfer;
        out[1] = transfer - gamma * i;
    }

    fn jacobian_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        let (s, i) = (x[0], x[1]);
        let (beta, gamma) = (theta[0], theta[1]);
        // Columns: [t, s, i, beta, gamma]; width 5.
        out[0] = 0.0;
        out[1] = -beta * i / 10.0;
        out[2] = -beta * s / 10.0;
        out[3] = -i * s / 10.0;
        out[4] = 0.0;

        out[5] = 0.0;
        out[6] = beta * i / 10.0;
        out[7] = beta * s / 10.0 - gamma;
        out[8] = i * s / 10.0;
        out[9] = -i;
    }
}

/// Predator-prey oscillator.  State `(u, v)` with
/// `u' = (a - b v) u`, `v' = (d u - c) v`; parameters `theta = (a, b, c, d)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LotkaVolterra;

impl LotkaVolterra {
    /// Reference triple used by the experiment drivers as ground truth:
    /// `t0 = 0`, `x0 = (0.5, 0.5)`, `(a, b, c, d) = (10, 10, 10, 10)`.
    pub fn truth() -> ParamTriple {
        ParamTriple::new(0.0, vec![0.5, 0.5], vec![10.0, 10.0, 10.0, 10.0])
    }

    /// First integral `V(u, v) = d*u - c*ln(u) + b*v - a*ln(v)`, constant
    /// along exact solutions.  Used as an accuracy oracle for the solver.
    pub fn invariant(x: &[f64], theta: &[f64]) -> f64 {
        let (u, v) = (x[0], x[1]);
        let (a, b, c, d) = (theta[0], theta[1], theta[2], theta[3]);
        d * u - c * u.ln() + b * v - a * v.ln()
    }
}

impl VectorField for LotkaVolterra {
    fn name(&self) -> &'static str {
        "lotka_volterra"
    }

    fn dim_state(&self) -> usize {
        2
    }

    fn dim_param(&self) -> usize {
        4
    }

    fn field_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        let (u, v) = (x[0], x[1]);
        let (a, b, c, d) = (theta[0], theta[1], theta[2], theta[3]);
        out[0] = (a - b * v) * u;
        out[1] = (d * u - c) * v;
    }

    fn jacobian_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        let (u, v) = (x[0], x[1]);
        let (a, b, c, d) = (theta[0], theta[1], theta[2], theta[3]);
        // Columns: [t, u, v, a, b, c, d]; width 7.
        out[0] = 0.0;
        out[1] = a - b * v;
        out[2] = -b * u;
        out[3] = u;
        out[4] = -v * u;
        out[5] = 0.0;
        out[6] = 0.0;

        out[7] = 0.0;
        out[8] = d * v;
        out[9] = d * u - c;
        out[10] = 0.0;
        out[11] = 0.0;
        out[12] = -v;
        out[13] = u * v;
    }
}

/// Scalar exponential growth `x' = theta * x`.  The one model with a closed
/// form (`x(t) = x0 * exp(theta * (t - t0))`), used to cross-check gradients
/// analytically.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl Exponential {
    /// Reference triple used by the experiment drivers as ground truth:
    /// `t0 = 0`, `x0 = 1`, `theta = ln 2` (the state doubles over the unit
    /// window).
    pub fn truth() -> ParamTriple {
        ParamTriple::new(0.0, vec![1.0], vec![std::f64::consts::LN_2])
    }
}

impl VectorField for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }

    fn dim_state(&self) -> usize {
        1
    }

    fn dim_param(&self) -> usize {
        1
    }

    fn field_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * x[0];
    }

    fn jacobian_into(&self, _t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        // Columns: [t, x, theta]; width 3.
        out[0] = 0.0;
        out[1] = theta[0];
        out[2] = x[0];
    }
}

/// A built-in model together with its reference (ground-truth) triple.
pub struct Builtin {
    pub model: Box<dyn VectorField>,
    pub truth: ParamTriple,
}

/// Look up a built-in model by name: `"si"`, `"lotka_volterra"`, or
/// `"exponential"`.
pub fn builtin(name: &str) -> Result<Builtin> {
    match name {
        "si" => Ok(Builtin {
            model: Box::new(Si),
            truth: Si::truth(),
        }),
        "lotka_volterra" => Ok(Builtin {
            model: Box::new(LotkaVolterra),
            truth: LotkaVolterra::truth(),
        }),
        "exponential" => Ok(Builtin {
            model: Box::new(Exponential),
            truth: Exponential::truth(),
        }),
        other => Err(Error::invalid(format!(
            "unknown model '{other}' (available: si, lotka_volterra, exponential)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
