//! Synthetic observation generation.
//!
//! Two observation regimes are supported, both reading one coordinate of a
//! solved trajectory over the unit window `[t0, t0 + 1]`:
//!
//! * **continuous**: the coordinate is recorded on a fine uniform grid with
//!   optional additive Gaussian noise, and queried by linear interpolation;
//! * **discrete**: the window is split into `n` equal subintervals, one
//!   observation time is drawn per subinterval from a truncated normal
//!   centered at the midpoint, and queries return the value of the
//!   subinterval they fall in (piecewise-constant).
//!
//! A discrete draw also produces its *companion measure*: the mixture of the
//! per-subinterval truncated normals, which is exactly the distribution the
//! observation times came from.  Fitting against that measure makes the
//! expected loss match the data-generation process.
//!
//! Noise is frozen at generation time, so repeated evaluation is
//! deterministic; a per-evaluation noise mode exists for library
//! experiments but is never written to data files.

use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measure::{Density, SamplingMeasure};
use crate::odesolve::Trajectory;

// ---------------------------------------------------------------------------
// Normal helpers
// ---------------------------------------------------------------------------

fn std_normal() -> &'static Normal {
    static CELL: OnceLock<Normal> = OnceLock::new();
    CELL.get_or_init(|| Normal::new(0.0, 1.0).expect("unit normal"))
}

/// Standard normal draw via inverse transform of a uniform in (0, 1).
pub(crate) fn standard_normal_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return std_normal().inverse_cdf(u);
        }
    }
}

// ---------------------------------------------------------------------------
// Truncated normal
// ---------------------------------------------------------------------------

/// A normal distribution restricted (and renormalized) to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormSpec {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormSpec {
    pub fn new(mean: f64, std: f64, lo: f64, hi: f64) -> Result<Self> {
        if ![mean, std, lo, hi].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("truncated normal parameters must be finite"));
        }
        if std <= 0.0 {
            return Err(Error::invalid("truncated normal std must be positive"));
        }
        if lo >= hi {
            return Err(Error::invalid("truncated normal requires lo < hi"));
        }
        let spec = TruncNormSpec { mean, std, lo, hi };
        if spec.mass() <= 0.0 {
            return Err(Error::invalid(
                "truncation window carries no probability mass at this mean/std",
            ));
        }
        Ok(spec)
    }

    /// Probability the untruncated normal assigns to `[lo, hi]`.
    fn mass(&self) -> f64 {
        let n = std_normal();
        n.cdf((self.hi - self.mean) / self.std) - n.cdf((self.lo - self.mean) / self.std)
    }

    /// Density; zero outside `[lo, hi]`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let z = (x - self.mean) / self.std;
        let phi = (-0.5 * z * z).exp() / (self.std * (2.0 * std::f64::consts::PI).sqrt());
        phi / self.mass()
    }

    /// Cumulative distribution; clamps to 0 / 1 outside `[lo, hi]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let n = std_normal();
        let lo_p = n.cdf((self.lo - self.mean) / self.std);
        ((n.cdf((x - self.mean) / self.std) - lo_p) / self.mass()).clamp(0.0, 1.0)
    }

    /// Inverse CDF.  Errors outside `[0, 1]`; the result is nudged strictly
    /// inside `(lo, hi)` so downstream code can rely on interior points.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("quantile probability {p} outside [0, 1]")));
        }
        let n = std_normal();
        let lo_p = n.cdf((self.lo - self.mean) / self.std);
        let x = self.mean + self.std * n.inverse_cdf(lo_p + p * self.mass());
        let nudge = 1e-12 * (self.hi - self.lo);
        Ok(x.clamp(self.lo + nudge, self.hi - nudge))
    }

    /// Inverse-CDF sampling driven by one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u).expect("uniform draw is a valid probability")
    }
}

// ---------------------------------------------------------------------------
// Continuous observations
// ---------------------------------------------------------------------------

/// Default grid resolution for continuous observations.
pub const DEFAULT_GRID_SIZE: usize = 1001;
/// Default observation noise level.
pub const DEFAULT_NOISE_STD: f64 = 0.1;

/// Fresh-noise-per-query mode (library experiments only; see
/// [`ContinuousSample::with_per_eval_noise`]).
#[derive(Debug)]
struct PerEvalNoise {
    noise_std: f64,
    rng: Mutex<ChaCha8Rng>,
}

/// One observed coordinate on a uniform grid over `[0, 1]` (window-relative
/// time), queried by linear interpolation.
#[derive(Debug)]
pub struct ContinuousSample {
    grid: Vec<f64>,
    values: Vec<f64>,
    per_eval: Option<PerEvalNoise>,
}

impl Clone for ContinuousSample {
    fn clone(&self) -> Self {
        ContinuousSample {
            grid: self.grid.clone(),
            values: self.values.clone(),
            per_eval: self.per_eval.as_ref().map(|pe| PerEvalNoise {
                noise_std: pe.noise_std,
                rng: Mutex::new(pe.rng.lock().unwrap().clone()),
            }),
        }
    }
}

impl ContinuousSample {
    /// Build from explicit grid/values.  The grid must start at 0, end at 1,
    /// be strictly increasing, and match `values` in length.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::invalid("continuous sample needs at least two grid points"));
        }
        if grid.len() != values.len() {
            return Err(Error::invalid(format!(
                "grid length {} does not match value length {}",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(Error::invalid("grid must span [0, 1] exactly"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample contains non-finite entries"));
        }
        Ok(ContinuousSample {
            grid,
            values,
            per_eval: None,
        })
    }

    /// Switch to per-evaluation noise: every [`eval`](Self::eval) adds a
    /// fresh `N(0, noise_std^2)` draw on top of the stored (clean) values.
    /// Evaluations are no longer reproducible point-by-point, which is the
    /// point: it models re-measuring instead of caching.  Not representable
    /// in data files.
    pub fn with_per_eval_noise(mut self, noise_std: f64, seed: u64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be non-negative and finite"));
        }
        self.per_eval = Some(PerEvalNoise {
            noise_std,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        });
        Ok(self)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation at window-relative time `tau` (clamped to
    /// `[0, 1]`), plus a fresh noise draw in per-evaluation mode.
    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        let idx = self.grid.partition_point(|&g| g <= tau).clamp(1, self.grid.len() - 1);
        let (g0, g1) = (self.grid[idx - 1], self.grid[idx]);
        let s = (tau - g0) / (g1 - g0);
        let base = (1.0 - s) * self.values[idx - 1] + s * self.values[idx];
        match &self.per_eval {
            None => base,
            Some(pe) => {
                let mut rng = pe.rng.lock().unwrap();
                base + pe.noise_std * standard_normal_draw(&mut *rng)
            }
        }
    }
}

/// Record one trajectory coordinate on a uniform `grid_size`-point grid over
/// the window, adding frozen `N(0, noise_std^2)` noise to each point.
pub fn make_continuous_sample<R: Rng + ?Sized>(
    traj: &Trajectory,
    obs_index: usize,
    noise_std: f64,
    grid_size: usize,
    rng: &mut R,
) -> Result<ContinuousSample> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be at least 2"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std must be non-negative and finite"));
    }
    let t0 = traj.t_start();
    let mut grid = Vec::with_capacity(grid_size);
    let mut values = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let tau = i as f64 / (grid_size - 1) as f64;
        let clean = traj.eval_component(t0 + tau, obs_index)?;
        let noise = if noise_std > 0.0 {
            noise_std * standard_normal_draw(rng)
        } else {
            0.0
        };
        grid.push(tau);
        values.push(clean + noise);
    }
    // Endpoints land exactly on 0 and 1 for any grid_size; normalize anyway
    // against accumulated division error.
    grid[0] = 0.0;
    *grid.last_mut().unwrap() = 1.0;
    ContinuousSample::from_values(grid, values)
}

// ---------------------------------------------------------------------------
// Discrete observations
// ---------------------------------------------------------------------------

/// One observation per subinterval of a uniform partition of `[0, 1]`,
/// queried as a piecewise-constant function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteSample {
    /// `n + 1` uniform partition boundaries from 0 to 1.
    boundaries: Vec<f64>,
    /// Observation time in each subinterval (strictly inside it).
    sample_times: Vec<f64>,
    /// Observed value attached to each subinterval.
    sample_values: Vec<f64>,
    /// Spread of the truncated normal the times were drawn from.
    time_std: f64,
}

impl DiscreteSample {
    /// Build from recorded pieces (e.g. a data file).  `sample_times[j]`
    /// must lie inside subinterval `j` of the uniform `n`-partition.
    pub fn from_values(
        n_intervals: usize,
        sample_times: Vec<f64>,
        sample_values: Vec<f64>,
        time_std: f64,
    ) -> Result<Self> {
        if n_intervals == 0 {
            return Err(Error::invalid("n_intervals must be at least 1"));
        }
        if sample_times.len() != n_intervals || sample_values.len() != n_intervals {
            return Err(Error::invalid(format!(
                "expected {n_intervals} sample times and values, got {} and {}",
                sample_times.len(),
                sample_values.len()
            )));
        }
        if !(time_std > 0.0 && time_std.is_finite()) {
            return Err(Error::invalid("time_std must be positive and finite"));
        }
        let boundaries = uniform_boundaries(n_intervals);
        for (j, &tj) in sample_times.iter().enumerate() {
            if !(boundaries[j] < tj && tj < boundaries[j + 1]) {
                return Err(Error::invalid(format!(
                    "sample time {tj} is not strictly inside subinterval {j}"
                )));
            }
        }
        if sample_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample contains non-finite values"));
        }
        Ok(DiscreteSample {
            boundaries,
            sample_times,
            sample_values,
            time_std,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.sample_values.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    pub fn sample_values(&self) -> &[f64] {
        &self.sample_values
    }

    pub fn time_std(&self) -> f64 {
        self.time_std
    }

    /// Piecewise-constant query: the value of the subinterval containing
    /// `tau` (clamped to `[0, 1]`).
    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        let idx = self
            .boundaries
            .partition_point(|&b| b <= tau)
            .clamp(1, self.boundaries.len() - 1);
        self.sample_values[idx - 1]
    }

    /// The distribution the observation times were drawn from: the uniform
    /// mixture of the per-subinterval truncated normals.
    pub fn companion_measure(&self) -> Result<SamplingMeasure> {
        let n = self.n_intervals();
        let mut components = Vec::with_capacity(n);
        for j in 0..n {
            let (lo, hi) = (self.boundaries[j], self.boundaries[j + 1]);
            components.push(TruncNormSpec::new(0.5 * (lo + hi), self.time_std, lo, hi)?);
        }
        let weights = vec![1.0 / n as f64; n];
        SamplingMeasure::from_parts(Density::piecewise_truncnorm(components, weights)?, Vec::new())
    }
}

fn uniform_boundaries(n: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    b[0] = 0.0;
    b[n] = 1.0;
    b
}

/// Draw a discrete observation set from a solved trajectory: one time per
/// subinterval from `TruncNorm(midpoint, time_std)` restricted to the
/// subinterval, one value per time with frozen `N(0, noise_std^2)` noise.
/// Returns the sample together with its companion measure.
pub fn make_discrete_sample<R: Rng + ?Sized>(
    traj: &Trajectory,
    obs_index: usize,
    n_intervals: usize,
    time_std: f64,
    noise_std: f64,
    rng: &mut R,
) -> Result<(DiscreteSample, SamplingMeasure)> {
    if n_intervals == 0 {
        return Err(Error::invalid("n_intervals must be at least 1"));
    }
    if !(time_std > 0.0 && time_std.is_finite()) {
        return Err(Error::invalid("time_std must be positive and finite"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std must be non-negative and finite"));
    }
    let t0 = traj.t_start();
    let boundaries = uniform_boundaries(n_intervals);
    let mut sample_times = Vec::with_capacity(n_intervals);
    let mut sample_values = Vec::with_capacity(n_intervals);
    for j in 0..n_intervals {
        let (lo, hi) = (boundaries[j], boundaries[j + 1]);
        let spec = TruncNormSpec::new(0.5 * (lo + hi), time_std, lo, hi)?;
        let tj = spec.sample(rng);
        let clean = traj.eval_component(t0 + tj, obs_index)?;
        let noise = if noise_std > 0.0 {
            noise_std * standard_normal_draw(rng)
        } else {
            0.0
        };
        sample_times.push(tj);
        sample_values.push(clean + noise);
    }
    let sample = DiscreteSample::from_values(n_intervals, sample_times, sample_values, time_std)?;
    let measure = sample.companion_measure()?;
    Ok((sample, measure))
}

/// Default observation-time spread for a discrete sample with subinterval
/// width `w`: `w / 6` (the truncation bounds sit three spreads out).
pub fn default_time_std(n_intervals: usize) -> f64 {
    1.0 / (6.0 * n_intervals as f64)
}

// ---------------------------------------------------------------------------
// Unified sample + data files
// ---------------------------------------------------------------------------

/// Either kind of observation set, presented as a function on `[0, 1]`.
#[derive(Debug, Clone)]
pub enum SampleData {
    Continuous(ContinuousSample),
    Discrete(DiscreteSample),
}

impl SampleData {
    /// Constant target: the same observed value across the whole window.
    ///
    /// Panics if `value` is not finite.
    pub fn constant(value: f64) -> SampleData {
        assert!(value.is_finite(), "constant sample value must be finite");
        SampleData::Continuous(
            ContinuousSample::from_values(vec![0.0, 1.0], vec![value, value])
                .expect("two-point constant grid is valid"),
        )
    }

    /// Observed value at window-relative time `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            SampleData::Continuous(s) => s.eval(tau),
            SampleData::Discrete(s) => s.eval(tau),
        }
    }

    /// Points where the sample function is not smooth (interpolation grid
    /// points, or piecewise-constant boundaries); integrators split there.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            SampleData::Continuous(s) => s.grid().to_vec(),
            SampleData::Discrete(s) => s.boundaries().to_vec(),
        }
    }
}

/// On-disk observation record.  `mode` decides which optional fields apply:
/// continuous files carry `grid` + `values`, discrete files carry
/// `intervals` + `sample_times` + `sample_values` + `time_std`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataFile {
    pub mode: String,
    pub obs_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_std: Option<f64>,
    pub noise_std: f64,
    pub seed: u64,
}

impl DataFile {
    pub fn from_continuous(sample: &ContinuousSample, obs_index: usize, noise_std: f64, seed: u64) -> Self {
        DataFile {
            mode: "continuous".to_string(),
            obs_index,
            grid: Some(sample.grid().to_vec()),
            values: Some(sample.values().to_vec()),
            intervals: None,
            sample_times: None,
            sample_values: None,
            time_std: None,
            noise_std,
            seed,
        }
    }

    pub fn from_discrete(sample: &DiscreteSample, obs_index: usize, noise_std: f64, seed: u64) -> Self {
        DataFile {
            mode: "discrete".to_string(),
            obs_index,
            grid: None,
            values: None,
            intervals: Some(sample.n_intervals()),
            sample_times: Some(sample.sample_times().to_vec()),
            sample_values: Some(sample.sample_values().to_vec()),
            time_std: Some(sample.time_std()),
            noise_std,
            seed,
        }
    }

    /// Reconstruct the in-memory sample and the measure to fit under:
    /// Lebesgue for continuous data, the companion mixture for discrete data.
    pub fn into_sample(&self) -> Result<(SampleData, SamplingMeasure)> {
        match self.mode.as_str() {
            "continuous" => {
                let grid = self.grid.clone().ok_or_else(|| Error::invalid("continuous data file missing 'grid'"))?;
                let values = self.values.clone().ok_or_else(|| Error::invalid("continuous data file missing 'values'"))?;
                let sample = ContinuousSample::from_values(grid, values)?;
                Ok((SampleData::Continuous(sample), SamplingMeasure::lebesgue()))
            }
            "discrete" => {
                let n = self.intervals.ok_or_else(|| Error::invalid("discrete data file missing 'intervals'"))?;
                let times = self.sample_times.clone().ok_or_else(|| Error::invalid("discrete data file missing 'sample_times'"))?;
                let values = self.sample_values.clone().ok_or_else(|| Error::invalid("discrete data file missing 'sample_values'"))?;
                let time_std = self.time_std.ok_or_else(|| Error::invalid("discrete data file missing 'time_std'"))?;
                let sample = DiscreteSample::from_values(n, times, values, time_std)?;
                let measure = sample.companion_measure()?;
                Ok((SampleData::Discrete(sample), measure))
            }
            other => Err(Error::invalid(format!(
                "unknown data mode '{other}' (expected 'continuous' or 'discrete')"
            ))),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
