//! Adaptive Gauss–Kronrod quadrature over finite and semi-infinite intervals.
//!
//! The workhorse is a 15-point Kronrod rule with embedded 7-point Gauss rule,
//! refined by bisecting whichever subinterval currently carries the largest
//! error estimate. Semi-infinite ranges `[a, ∞)` are mapped onto `(0, 1]` by
//! the substitution `x = a + t/(1-t)` before refinement, so slowly decaying
//! tails become ordinary endpoint behavior instead of a truncation choice.
//!
//! A fixed-node Gauss–Legendre rule is also provided for callers that need an
//! integral value varying smoothly (to machine precision) with a parameter of
//! the integrand, such as optimization loops; adaptive refinement is more
//! accurate in absolute terms but its panel layout, and hence its error, can
//! jump as the parameter moves.

use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Tolerances and limits for one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    /// Relative tolerance on the accumulated error estimate.
    pub rel_tol: f64,
    /// Absolute tolerance floor, for integrals whose value is near zero.
    pub abs_tol: f64,
    /// Maximum number of interval bisections before giving up.
    pub max_subdivisions: u32,
    /// Panels whose largest sampled |f| falls below `tail_cut` times the
    /// largest |f| seen anywhere are left unrefined; their contribution is
    /// reported in [`QuadResult::tail_bound`].
    pub tail_cut: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_subdivisions: 200,
            tail_cut: 1e-10,
        }
    }
}

impl QuadSpec {
    /// The same spec with tolerances tightened by `factor` (used for inner
    /// integrals of a nested integration, conventionally 10 per level).
    pub fn tightened(&self, factor: f64) -> Self {
        QuadSpec {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }
}

/// Value and error information from one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub err_est: f64,
    /// Bound on the contribution of panels classified as negligible tail
    /// (see [`QuadSpec::tail_cut`]); already included in `value`.
    pub tail_bound: f64,
    /// Number of integrand evaluations.
    pub evals: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    /// The error estimate did not reach tolerance within the subdivision
    /// budget; the best estimate so far is carried along.
    NonConvergence { value: f64, err_est: f64 },
    /// The integrand returned NaN or ±∞ at `x`.
    IntegrandError { x: f64 },
    /// Lower bound not strictly below upper bound, or a bound was NaN.
    InvalidBounds { a: f64, b: f64 },
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::NonConvergence { value, err_est } => write!(
                f,
                "quadrature did not converge: best estimate {value:e} with error {err_est:e}"
            ),
            QuadError::IntegrandError { x } => {
                write!(f, "integrand returned a non-finite value at x = {x:e}")
            }
            QuadError::InvalidBounds { a, b } => {
                write!(f, "invalid integration bounds [{a:e}, {b:e}]")
            }
        }
    }
}

impl core::error::Error for QuadError {}

/// 15-point Kronrod abscissae on [-1, 1] (positive half; the rule is symmetric).
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

/// Weights of the embedded 7-point Gauss rule.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Weights of the 15-point Kronrod rule.
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

/// One evaluated panel of the subdivision.
#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    /// Largest |f| sampled on this panel, for tail classification.
    peak: f64,
}

/// Apply the 15-point rule to `g` on `[a, b]`.
///
/// Returns the panel or the abscissa at which `g` was non-finite. The error
/// estimate uses the QUADPACK rescaling of |K15 - G7| against the deviation
/// integral, which is sharper than the raw difference.
fn qk15<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Result<Panel, f64> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = g(center);
    if !fc.is_finite() {
        return Err(center);
    }
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut peak = fc.abs();
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let x1 = center - dx;
        let x2 = center + dx;
        let f1 = g(x1);
        if !f1.is_finite() {
            return Err(x1);
        }
        let f2 = g(x2);
        if !f2.is_finite() {
            return Err(x2);
        }
        fv1[j] = f1;
        fv2[j] = f2;
        peak = peak.max(f1.abs()).max(f2.abs());
        let fsum = f1 + f2;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
        resk += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
    }

    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }

    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }

    Ok(Panel {
        a,
        b,
        value,
        err,
        peak,
    })
}

/// Integrate `f` from `a` to `b`, where `b` may be `f64::INFINITY`.
///
/// Finite ranges are refined directly. For `b = ∞` the integral is computed
/// as `∫₀¹ f(a + t/(1-t))·(1 + x)² dt` with `x = t/(1-t)`; values of `f` that
/// underflow to zero in the far tail contribute exactly zero, so no explicit
/// truncation radius is needed.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    if a.is_nan() || b.is_nan() || !a.is_finite() || !(a < b) {
        return Err(QuadError::InvalidBounds { a, b });
    }
    if b.is_infinite() {
        let g = move |t: f64| {
            let x = a + t / (1.0 - t);
            if !x.is_finite() {
                // The endpoint t = 1 maps to infinity; an integrable f has
                // vanishing density there.
                return 0.0;
            }
            let fx = f(x);
            if fx == 0.0 {
                return 0.0;
            }
            let scale = 1.0 + (x - a);
            fx * scale * scale
        };
        adapt(&g, 0.0, 1.0, spec)
    } else {
        adapt(&f, a, b, spec)
    }
}

/// Worst-panel-first adaptive refinement of `g` on the finite `[a, b]`.
fn adapt<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, spec: &QuadSpec) -> Result<QuadResult, QuadError> {
    let mut panels: Vec<Panel> = Vec::with_capacity(32);
    let mut evals = 15u32;
    panels.push(qk15(g, a, b).map_err(|x| QuadError::IntegrandError { x })?);

    let mut subdivisions = 0u32;
    loop {
        let mut value = 0.0;
        let mut err = 0.0;
        let mut peak = 0.0f64;
        for p in &panels {
            value += p.value;
            err += p.err;
            peak = peak.max(p.peak);
        }
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if err <= target {
            return Ok(finish(&panels, value, err, peak, spec, evals));
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(QuadError::NonConvergence { value, err_est: err });
        }

        // Refine the panel with the largest error, skipping negligible-tail
        // panels (they cannot reduce the error meaningfully and refining them
        // would chase noise in the far tail).
        let tail_floor = spec.tail_cut * peak;
        let mut worst: Option<usize> = None;
        for (i, p) in panels.iter().enumerate() {
            if p.peak < tail_floor {
                continue;
            }
            if worst.map_or(true, |w| p.err > panels[w].err) {
                worst = Some(i);
            }
        }
        let Some(i) = worst else {
            return Ok(finish(&panels, value, err, peak, spec, evals));
        };
        let Panel { a: pa, b: pb, .. } = panels[i];
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Interval exhausted at floating-point resolution.
            return Err(QuadError::NonConvergence { value, err_est: err });
        }
        let left = qk15(g, pa, mid).map_err(|x| QuadError::IntegrandError { x })?;
        let right = qk15(g, mid, pb).map_err(|x| QuadError::IntegrandError { x })?;
        evals += 30;
        panels[i] = left;
        panels.push(right);
        subdivisions += 1;
    }
}

fn finish(
    panels: &[Panel],
    value: f64,
    err: f64,
    peak: f64,
    spec: &QuadSpec,
    evals: u32,
) -> QuadResult {
    let tail_floor = spec.tail_cut * peak;
    let mut tail_bound = 0.0;
    for p in panels {
        if p.peak < tail_floor {
            tail_bound += p.value.abs() + p.err;
        }
    }
    QuadResult {
        value,
        err_est: err,
        tail_bound,
        evals,
    }
}

/// Integrate `f(x, y)` over `x ∈ [x0, x1]` (x1 may be `∞`) with inner bounds
/// `y ∈ y_bounds(x)` (the upper inner bound may be `∞`).
///
/// The inner integral runs with tolerances tightened 10× so that its error
/// stays subdominant to the outer rule's estimate. An inner failure aborts the
/// whole integration with that failure.
pub fn integrate_2d<F, B>(
    f: F,
    x0: f64,
    x1: f64,
    y_bounds: B,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError>
where
    F: Fn(f64, f64) -> f64,
    B: Fn(f64) -> (f64, f64),
{
    let inner_spec = spec.tightened(10.0);
    let inner_err = core::cell::Cell::new(None);
    let outer = |x: f64| {
        let (y0, y1) = y_bounds(x);
        match integrate_1d(|y| f(x, y), y0, y1, &inner_spec) {
            Ok(r) => r.value,
            Err(e) => {
                if inner_err.take().is_none() {
                    inner_err.set(Some(e));
                }
                f64::NAN
            }
        }
    };
    match integrate_1d(outer, x0, x1, spec) {
        Ok(r) => Ok(r),
        Err(e) => Err(inner_err.take().unwrap_or(e)),
    }
}

/// Integrate `f(x, y, z)` over a box-like region: `x ∈ [x0, x1]`,
/// `y ∈ y_bounds(x)`, `z ∈ z_bounds(x, y)`; upper bounds may be `∞`.
/// Tolerances tighten 10× per nesting level.
pub fn integrate_3d<F, BY, BZ>(
    f: F,
    x0: f64,
    x1: f64,
    y_bounds: BY,
    z_bounds: BZ,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError>
where
    F: Fn(f64, f64, f64) -> f64,
    BY: Fn(f64) -> (f64, f64),
    BZ: Fn(f64, f64) -> (f64, f64),
{
    let inner_spec = spec.tightened(10.0);
    let inner_err = core::cell::Cell::new(None);
    let outer = |x: f64| {
        let (y0, y1) = y_bounds(x);
        let res = integrate_2d(
            |y, z| f(x, y, z),
            y0,
            y1,
            |y| z_bounds(x, y),
            &inner_spec,
        );
        match res {
            Ok(r) => r.value,
            Err(e) => {
                if inner_err.take().is_none() {
                    inner_err.set(Some(e));
                }
                f64::NAN
            }
        }
    };
    match integrate_1d(outer, x0, x1, spec) {
        Ok(r) => Ok(r),
        Err(e) => Err(inner_err.take().unwrap_or(e)),
    }
}

/// Fixed-node Gauss–Legendre rule of order `n` on [-1, 1].
///
/// Unlike the adaptive path, applying this rule yields values that are smooth
/// functions of any parameter the integrand depends on, which is what
/// optimization and curve-sweep callers need.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Compute the order-`n` rule by Newton iteration on the Legendre
    /// polynomial, starting from the Chebyshev angle estimates.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Legendre rule needs at least 2 nodes");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes.push(-x); // ascending order
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        nodes.reverse();
        weights.reverse();
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    /// Apply the rule to `f` on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Apply the rule to `f` on `[a, ∞)` through the `x = a + t/(1-t)` map.
    pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> f64 {
        self.mapped(0.0, 1.0)
            .map(|(t, w)| {
                let x = a + t / (1.0 - t);
                let fx = f(x);
                if fx == 0.0 {
                    0.0
                } else {
                    let scale = 1.0 + (x - a);
                    w * fx * scale * scale
                }
            })
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
