//! Gradient-based parameter fitting for ODE initial value problems.
//!
//! A model is a parametrized vector field `x'(t) = f(t, x, theta)`; a
//! candidate is the triple `(t0, x0, theta)` of start time, start state, and
//! parameters.  The fit minimizes a squared observation error integrated over
//! a unit-length window against a *sampling measure* — any mix of a
//! continuous density and point masses — which covers dense noisy
//! observations, sparse scheduled measurements, and everything between.
//!
//! The gradient of that loss with respect to the full candidate triple comes
//! from a single backward sweep of the adjoint state equation, at a cost
//! independent of the number of parameters and without differentiating
//! through solver internals.  Central finite differences are kept alongside
//! as an independent check.
//!
//! # Layout
//!
//! - [`models`]: the [`VectorField`] trait, [`ParamTriple`], and three
//!   built-in models (`si`, `lotka_volterra`, `exponential`).
//! - [`odesolve`]: adaptive Runge–Kutta integration with dense output
//!   ([`solve_forward`], [`Trajectory`], [`SolverConfig`]).
//! - [`measure`]: sampling measures over the unit window ([`SamplingMeasure`],
//!   [`Density`], [`Atom`]).
//! - [`sampling`]: synthetic observation data and its file format
//!   ([`SampleData`], [`DataFile`]).
//! - [`loss`]: the observation-error functional ([`ErrorFunctional`],
//!   [`evaluate_loss`]).
//! - [`adjoint`]: backward-sweep gradients ([`loss_and_gradient`],
//!   [`AdjointSolution`]).
//! - [`gradcheck`]: finite-difference verification ([`check_gradient`]).
//! - [`descent`]: gradient descent with optional line search and stochastic
//!   measure resampling ([`fit`], [`FitConfig`], [`FitTrace`]).
//! - [`experiment`]: reproducible generate / fit / gradcheck runs
//!   ([`ExperimentConfig`]).
//!
//! # Example
//!
//! Fit the exponential-growth model to data sampled at a single time:
//!
//! ```
//! use adjfit::{
//!     builtin, evaluate_loss, fit, ErrorFunctional, FitConfig, ParamTriple,
//!     SampleData, SamplingMeasure,
//! };
//!
//! let truth = builtin("exponential")?;
//! // Observe the value 2.0 at the end of the window (the true model doubles
//! // from 1.0), weighted by a point mass at tau = 1.
//! let data = SampleData::constant(2.0);
//! let sigma = SamplingMeasure::uniform_atoms(&[1.0])?;
//! let h = ErrorFunctional::squared(data, 0);
//!
//! let start = ParamTriple::new(0.0, vec![1.0], vec![0.3]);
//! let trace = fit(truth.model.as_ref(), &h, &sigma, &start, &FitConfig::default())?;
//! assert!(trace.final_loss() < 1e-6);
//! # Ok::<(), adjfit::Error>(())
//! ```

pub mod adjoint;
pub mod descent;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod loss;
pub mod measure;
pub mod models;
pub mod odesolve;
pub(crate) mod quad;
pub mod sampling;

pub use adjoint::{gradient, loss_and_gradient, AdjointProblem, AdjointSolution};
pub use descent::{fit, perturb, random_measure, FitConfig, FitRecord, FitTrace};
pub use error::{Error, Result};
pub use experiment::{run_fit, run_generate, run_gradcheck, ExperimentConfig, SampleMode};
pub use gradcheck::{check_gradient, fd_gradient, GradCheckReport, GradCheckRow};
pub use loss::{evaluate_loss, loss_of_trajectory, ErrorFunctional, LossReport};
pub use measure::{Atom, Density, SamplingMeasure};
pub use models::{builtin, Builtin, Jacobian, ParamTriple, VectorField};
pub use odesolve::{solve_forward, SolverConfig, Trajectory};
pub use sampling::{
    make_continuous_sample, make_discrete_sample, DataFile, SampleData, TruncNormSpec,
};
