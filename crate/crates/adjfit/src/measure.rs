//! Sampling measures on the unit window.
//!
//! A sampling measure weights *when* the model is compared against data: it
//! is the sum of a continuous part (a density on `[0, 1]`) and a discrete
//! part (point masses, "atoms").  Loss integrals integrate against the
//! density and sum over the atoms; the adjoint pass turns each atom into a
//! jump of the backward state.
//!
//! Construction normalizes total mass to one, so callers describe relative
//! weights and the measure itself is always a probability measure.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_with_knots, QuadConfig};
use crate::sampling::TruncNormSpec;

/// Number of probe points used to validate a density's sign and finiteness.
const PROBE_GRID: usize = 1024;

// ---------------------------------------------------------------------------
// Atoms
// ---------------------------------------------------------------------------

/// A point mass at window-relative time `tau` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub tau: f64,
    pub weight: f64,
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// The continuous part of a sampling measure, before normalization.
#[derive(Clone)]
pub enum Density {
    /// No continuous part.
    Zero,
    /// Constant on `[0, 1]`.
    Uniform { value: f64 },
    /// Truncated-normal bump on each cell of a partition of `[0, 1]`:
    /// the density at `tau` is `weights[j] * components[j].pdf(tau)` for the
    /// cell `j` containing `tau`.
    PiecewiseTruncNorm {
        components: Vec<TruncNormSpec>,
        weights: Vec<f64>,
    },
    /// Arbitrary non-negative function on `[0, 1]`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Zero => write!(f, "Density::Zero"),
            Density::Uniform { value } => write!(f, "Density::Uniform({value})"),
            Density::PiecewiseTruncNorm { components, .. } => {
                write!(f, "Density::PiecewiseTruncNorm({} cells)", components.len())
            }
            Density::Custom(_) => write!(f, "Density::Custom"),
        }
    }
}

impl Density {
    /// Wrap an arbitrary non-negative function.
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Density::Custom(Arc::new(f))
    }

    /// Validated piecewise truncated-normal density.  The components'
    /// `[lo, hi]` windows must tile `[0, 1]` contiguously, one weight per
    /// component.
    pub fn piecewise_truncnorm(components: Vec<TruncNormSpec>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("piecewise density needs at least one component"));
        }
        if components.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        if components[0].lo != 0.0 || components.last().unwrap().hi != 1.0 {
            return Err(Error::invalid("piecewise density must cover [0, 1] exactly"));
        }
        for pair in components.windows(2) {
            if pair[0].hi != pair[1].lo {
                return Err(Error::invalid(format!(
                    "piecewise cells are not contiguous: {} vs {}",
                    pair[0].hi, pair[1].lo
                )));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("piecewise weights must be non-negative and finite"));
        }
        Ok(Density::PiecewiseTruncNorm { components, weights })
    }

    /// Raw (pre-normalization) value at `tau` in `[0, 1]`.
    fn raw(&self, tau: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Uniform { value } => *value,
            Density::PiecewiseTruncNorm { components, weights } => {
                let idx = components
                    .partition_point(|c| c.lo <= tau)
                    .clamp(1, components.len())
                    - 1;
                weights[idx] * components[idx].pdf(tau)
            }
            Density::Custom(f) => f(tau),
        }
    }

    /// Interior points where the density may be non-smooth.
    fn knots(&self) -> Vec<f64> {
        match self {
            Density::PiecewiseTruncNorm { components, .. } => {
                components.iter().map(|c| c.lo).skip(1).collect()
            }
            _ => Vec::new(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Density::Zero)
    }
}

// ---------------------------------------------------------------------------
// Sampling measure
// ---------------------------------------------------------------------------

/// A probability measure on `[0, 1]` made of a continuous density plus
/// atoms.  Always normalized: construction rescales both parts by the total
/// mass.
#[derive(Debug, Clone)]
pub struct SamplingMeasure {
    density: Density,
    /// Multiplier applied to the raw density (normalization).
    scale: f64,
    /// Atoms sorted by strictly increasing `tau`, weights normalized.
    atoms: Vec<Atom>,
    /// Whether the continuous part carries any mass at all.
    has_density: bool,
}

impl SamplingMeasure {
    /// Lebesgue measure on `[0, 1]`: constant density one, no atoms.
    pub fn lebesgue() -> Self {
        SamplingMeasure {
            density: Density::Uniform { value: 1.0 },
            scale: 1.0,
            atoms: Vec::new(),
            has_density: true,
        }
    }

    /// Purely atomic measure with equal weights `1/n` at the given times.
    /// Times must lie in `[0, 1]` and be pairwise distinct.
    pub fn uniform_atoms(taus: &[f64]) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::invalid("uniform_atoms needs at least one time"));
        }
        let mut sorted = taus.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        for &tau in &sorted {
            if !tau.is_finite() || !(0.0..=1.0).contains(&tau) {
                return Err(Error::invalid(format!("atom time {tau} outside [0, 1]")));
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("atom times must be pairwise distinct"));
        }
        let w = 1.0 / taus.len() as f64;
        Ok(SamplingMeasure {
            density: Density::Zero,
            scale: 1.0,
            atoms: sorted.into_iter().map(|tau| Atom { tau, weight: w }).collect(),
            has_density: false,
        })
    }

    /// General constructor: any density plus any atoms, rescaled so total
    /// mass is one.  Atoms at the same time are merged by summing weights.
    ///
    /// Errors if the density is negative or non-finite anywhere on a probe
    /// grid, if its integral cannot be computed, or if the total mass is
    /// zero.
    pub fn from_parts(density: Density, atoms: Vec<Atom>) -> Result<Self> {
        // Validate and canonicalize atoms.
        for atom in &atoms {
            if !atom.tau.is_finite() || !(0.0..=1.0).contains(&atom.tau) {
                return Err(Error::invalid(format!("atom time {} outside [0, 1]", atom.tau)));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::invalid(format!(
                    "atom weight {} must be positive and finite",
                    atom.weight
                )));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.tau == atom.tau => last.weight += atom.weight,
                _ => merged.push(atom),
            }
        }

        // Validate the density on a probe grid.
        if !density.is_zero() {
            for i in 0..PROBE_GRID {
                let tau = i as f64 / (PROBE_GRID - 1) as f64;
                let v = density.raw(tau);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("density is not finite at tau = {tau}")));
                }
                if v < 0.0 {
                    return Err(Error::invalid(format!(
                        "density is negative at tau = {tau} (value {v})"
                    )));
                }
            }
        }

        // Continuous mass by quadrature, then normalize everything.
        let mass_c = if density.is_zero() {
            0.0
        } else {
            let knots = density.knots();
            integrate_with_knots(&mut |x| Ok(density.raw(x)), 0.0, 1.0, &knots, &QuadConfig::default())?
        };
        let mass_d: f64 = merged.iter().map(|a| a.weight).sum();
        let total = mass_c + mass_d;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid(format!("measure has zero or non-finite total mass ({total})")));
        }
        for atom in &mut merged {
            atom.weight /= total;
        }
        Ok(SamplingMeasure {
            has_density: mass_c > 0.0,
            density,
            scale: 1.0 / total,
            atoms: merged,
        })
    }

    /// Normalized density value at `tau`; zero outside `[0, 1]`.
    pub fn density(&self, tau: f64) -> f64 {
        if !(0.0..=1.0).contains(&tau) {
            return 0.0;
        }
        self.scale * self.density.raw(tau)
    }

    /// Atoms in strictly increasing time order, weights normalized.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Whether the continuous part carries mass (false for purely atomic
    /// measures, which skip quadrature altogether).
    pub fn has_continuous_part(&self) -> bool {
        self.has_density
    }

    /// Interior points where the density may kink or jump; loss integrals
    /// split their quadrature panels there.
    pub fn density_knots(&self) -> Vec<f64> {
        self.density.knots()
    }

    /// Recompute total mass from scratch (quadrature plus atom sum).
    /// A self-check: the result should be one to quadrature accuracy.
    pub fn mass_check(&self) -> Result<f64> {
        let mass_d: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if !self.has_density {
            return Ok(mass_d);
        }
        let knots = self.density.knots();
        let mass_c = integrate_with_knots(
            &mut |x| Ok(self.density(x)),
            0.0,
            1.0,
            &knots,
            &QuadConfig::default(),
        )?;
        Ok(mass_c + mass_d)
    }

    /// Serialize to the JSON measure schema.  Custom densities have no
    /// parametric form and are rejected.
    pub fn to_json(&self) -> Result<String> {
        let density = match &self.density {
            Density::Zero => DensityJson::Zero,
            Density::Uniform { value } => DensityJson::Uniform {
                value: value * self.scale,
            },
            Density::PiecewiseTruncNorm { components, weights } => {
                let mut boundaries: Vec<f64> = components.iter().map(|c| c.lo).collect();
                boundaries.push(1.0);
                DensityJson::PiecewiseTruncnorm {
                    boundaries,
                    means: components.iter().map(|c| c.mean).collect(),
                    stds: components.iter().map(|c| c.std).collect(),
                    weights: weights.iter().map(|w| w * self.scale).collect(),
                }
            }
            Density::Custom(_) => {
                return Err(Error::invalid("custom densities cannot be serialized"))
            }
        };
        Ok(serde_json::to_string_pretty(&MeasureJson {
            density,
            atoms: self.atoms.clone(),
        })?)
    }

    /// Parse the JSON measure schema (inverse of [`to_json`](Self::to_json)
    /// up to renormalization noise).
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: MeasureJson = serde_json::from_str(text)?;
        let density = match parsed.density {
            DensityJson::Zero => Density::Zero,
            DensityJson::Uniform { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::invalid("uniform density value must be non-negative"));
                }
                Density::Uniform { value }
            }
            DensityJson::PiecewiseTruncnorm {
                boundaries,
                means,
                stds,
                weights,
            } => {
                let n = means.len();
                if boundaries.len() != n + 1 || stds.len() != n || weights.len() != n {
                    return Err(Error::invalid(
                        "piecewise_truncnorm arrays have inconsistent lengths",
                    ));
                }
                let mut components = Vec::with_capacity(n);
                for j in 0..n {
                    components.push(TruncNormSpec::new(
                        means[j],
                        stds[j],
                        boundaries[j],
                        boundaries[j + 1],
                    )?);
                }
                Density::piecewise_truncnorm(components, weights)?
            }
        };
        SamplingMeasure::from_parts(density, parsed.atoms)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    density: DensityJson,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DensityJson {
    Zero,
    Uniform {
        value: f64,
    },
    PiecewiseTruncnorm {
        boundaries: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
        weights: Vec<f64>,
    },
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
