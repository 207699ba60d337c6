//! Adaptive Gauss-Kronrod quadrature (internal).
//!
//! Loss integrals and measure mass checks integrate functions that are
//! piecewise smooth: kinks at sample-grid points, jumps at the subinterval
//! boundaries of piecewise densities.  The entry point therefore takes a
//! sorted list of *knots* where smoothness may fail, splits the domain
//! there, and runs a 7-15 Gauss-Kronrod rule with recursive bisection on
//! each smooth panel.
//!
//! Integrands are fallible (`FnMut(f64) -> Result<f64>`) because they
//! usually query dense solver output, which can reject a point.

use crate::error::{Error, Result};

/// Tolerances and recursion budget for the adaptive rule.
#[derive(Debug, Clone)]
pub(crate) struct QuadConfig {
    /// Absolute error budget for the whole interval, distributed over panels
    /// proportionally to width.
    pub abs_tol: f64,
    /// Relative error target per panel.
    pub rel_tol: f64,
    /// Maximum bisection depth per panel.
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_depth: 40,
        }
    }
}

impl QuadConfig {
    /// Budget matched to an ODE tolerance pair, so quadrature error stays
    /// comparable to solver error.
    pub fn from_solver_tol(rel_tol: f64, abs_tol: f64) -> Self {
        QuadConfig {
            abs_tol: abs_tol.max(1e-14),
            rel_tol: rel_tol.max(1e-12),
            max_depth: 40,
        }
    }
}

// 15-point Kronrod abscissae (positive half), with the embedded 7-point
// Gauss rule on the odd-indexed entries.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// QUADPACK-style error rescaling: sharpens the raw `|K15 - G7|` estimate
/// using the variation `res_asc` and guards against claiming less than
/// roundoff level.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 7-15 Gauss-Kronrod application on `[a, b]`.  Returns the Kronrod
/// value and an error estimate.
fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let f_center = f(center)?;

    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();

    // Odd-indexed Kronrod nodes carry the Gauss rule.
    for (j, wg) in WG.iter().enumerate().take(3) {
        let jtw = j * 2 + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    res_gauss += WG[3] * f_center;

    for j in 0..4 {
        let jtw = j * 2;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let raw_err = (res_kronrod - res_gauss) * half;
    let value = res_kronrod * half;
    let err = rescale_error(raw_err, res_abs * half.abs(), res_asc * half.abs());
    if !value.is_finite() {
        return Err(Error::QuadratureFailed(format!(
            "integrand not finite on [{a}, {b}]"
        )));
    }
    Ok((value, err))
}

fn adapt<F>(f: &mut F, a: f64, b: f64, abs_budget: f64, rel_tol: f64, depth: u32) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (value, err) = gk15(f, a, b)?;
    if err <= abs_budget.max(rel_tol * value.abs()) {
        return Ok(value);
    }
    let width = b - a;
    if depth == 0 || width <= 8.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::QuadratureFailed(format!(
            "tolerance not reached on [{a}, {b}] (estimated error {err:e})"
        )));
    }
    let mid = 0.5 * (a + b);
    let left = adapt(f, a, mid, 0.5 * abs_budget, rel_tol, depth - 1)?;
    let right = adapt(f, mid, b, 0.5 * abs_budget, rel_tol, depth - 1)?;
    Ok(left + right)
}

/// Adaptive integral of `f` over `[a, b]` with no interior knots.
pub(crate) fn integrate_adaptive<F>(f: &mut F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_with_knots(f, a, b, &[], cfg)
}

/// Adaptive integral of `f` over `[a, b]`, pre-split at every knot strictly
/// inside the interval.  Knots need not be sorted or deduplicated, and knots
/// outside `(a, b)` are ignored.
pub(crate) fn integrate_with_knots<F>(
    f: &mut F,
    a: f64,
    b: f64,
    knots: &[f64],
    cfg: &QuadConfig,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration bounds must be finite"));
    }
    if b < a {
        return Err(Error::invalid("integration bounds must satisfy a <= b"));
    }
    if a == b {
        return Ok(0.0);
    }

    let sep = 1e-14 * (b - a).abs().max(1.0);
    let mut cuts: Vec<f64> = knots
        .iter()
        .copied()
        .filter(|&x| x > a + sep && x < b - sep)
        .collect();
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup_by(|p, q| (*p - *q).abs() <= sep);

    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(a);
    bounds.extend_from_slice(&cuts);
    bounds.push(b);

    let total_width = b - a;
    let mut sum = 0.0;
    for w in bounds.windows(2) {
        let budget = cfg.abs_tol * (w[1] - w[0]) / total_width;
        sum += adapt(f, w[0], w[1], budget, cfg.rel_tol, cfg.max_depth)?;
    }
    Ok(sum)
}
