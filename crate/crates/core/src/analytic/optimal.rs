//! Choosing the skipping period: net utility (rate minus weighted handover
//! rate), a closed-form approximately optimal period, and a numeric maximizer
//! over a smooth continuous-period relaxation of the utility.

use super::handover::eta_excess;
use super::{k_beta, AnalyticError};
use crate::model::{MobilityModel, NetworkParams, SpeedDistribution, UtilityParams, ValidationError};
use crate::quadrature::{integrate_1d, GaussLegendre, QuadResult, QuadSpec};
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Net utility in nats/slot: expected rate minus cost-weighted handover rate.
pub fn utility(t: f64, h: f64, util: &UtilityParams) -> f64 {
    t - util.c * h
}

/// Path-loss shape integral `∫₀^∞ z^(β/2) / ((1+z)²·(K_β^(β/2) + z^(β/2))) dz`
/// driving the curvature of the rate loss in the small-displacement regime.
pub fn i_beta(beta: f64, spec: &QuadSpec) -> Result<QuadResult, AnalyticError> {
    if !(beta.is_finite() && beta > 2.0) {
        return Err(AnalyticError::Validation(ValidationError::Beta(beta)));
    }
    let half_beta = 0.5 * beta;
    let kb_pow = k_beta(beta).powf(half_beta);
    let res = integrate_1d(
        |z| {
            let zb = z.powf(half_beta);
            let q = 1.0 + z;
            zb / (q * q * (kb_pow + zb))
        },
        0.0,
        f64::INFINITY,
        spec,
    )?;
    Ok(res)
}

/// Closed-form approximately optimal skipping period, in slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sopt {
    /// Continuous stationary point of the small-displacement utility model.
    pub s: f64,
    /// Nearest admissible integer period (at least 1).
    pub s_rounded: u64,
}

/// Approximately optimal period `(15/π² - 1)·c / (2β·I_β)`.
///
/// Remarkably free of density, noise, and speed: those scale the utility
/// curve without moving its stationary point.
pub fn sopt(beta: f64, util: &UtilityParams, spec: &QuadSpec) -> Result<Sopt, AnalyticError> {
    let ib = i_beta(beta, spec)?;
    let pi = core::f64::consts::PI;
    let s = (15.0 / (pi * pi) - 1.0) * util.c / (2.0 * beta * ib.value);
    let s_rounded = if s.round() < 1.0 { 1 } else { s.round() as u64 };
    Ok(Sopt { s, s_rounded })
}

/// Derivative of the small-displacement utility model at continuous period
/// `s`: `-(πλβ/3)·s·E[V²]·I_β + (5/(2π) - π/6)·c·λ·E[V²]`.
///
/// Positive below the approximately optimal period, zero at it, negative
/// above — a cheap diagnostic for how far a proposed period sits from the
/// stationary point.
pub fn utility_slope_residual(
    s: f64,
    net: &NetworkParams,
    mobility: &MobilityModel,
    util: &UtilityParams,
    spec: &QuadSpec,
) -> Result<f64, AnalyticError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(AnalyticError::Validation(ValidationError::Argument {
            name: "s",
            value: s,
        }));
    }
    let ib = i_beta(net.beta, spec)?.value;
    let pi = core::f64::consts::PI;
    let mean = mobility.speed.mean();
    let v2 = mean * mean + mobility.speed.variance();
    let lam = net.lambda;
    Ok(-(pi * lam * net.beta / 3.0) * s * v2 * ib + (5.0 / (2.0 * pi) - pi / 6.0) * util.c * lam * v2)
}

/// `(1/s)·∫₀^s e^(-x·t²/s²) dt`: the cycle average of a Gaussian factor,
/// as a function of `x = a·s²` alone.
fn gaussian_cycle_average(x: f64) -> f64 {
    if x < 1e-6 {
        // series keeps full precision where erf(√x)/√x loses digits
        1.0 + x * (-1.0 / 3.0 + x * (0.1 - x / 42.0))
    } else {
        let rx = x.sqrt();
        0.5 * core::f64::consts::PI.sqrt() * libm::erf(rx) / rx
    }
}

/// Utility as a smooth function of a continuous period, built from the
/// closed-form rate bound and the cycle-hop handover probability on fixed
/// quadrature nodes.
///
/// Fixed nodes make the objective machine-smooth in `s`, which a bracketing
/// maximizer needs: the adaptive engines re-tile their panels as `s` moves
/// and would add step noise far above the utility's curvature near its
/// maximum. Requires an interference-limited network (σ² = 0).
#[derive(Debug, Clone)]
pub struct SmoothUtility {
    /// Per z-node weight of the rate bound.
    rate_w: Vec<f64>,
    /// Per z-node Gaussian displacement coefficient `πλ·z/(1+z)`.
    rate_a: Vec<f64>,
    /// Angle nodes for the handover probability: (angle, weight).
    phi_nodes: Vec<(f64, f64)>,
    r_rule: GaussLegendre,
    /// Speed nodes as (speed, probability weight); a single `(v, 1)` entry
    /// for constant speed.
    speed_nodes: Vec<(f64, f64)>,
    lambda: f64,
    c: f64,
}

impl SmoothUtility {
    pub fn new(
        net: &NetworkParams,
        mobility: &MobilityModel,
        util: &UtilityParams,
    ) -> Result<Self, AnalyticError> {
        if net.sigma2 > 0.0 {
            return Err(AnalyticError::NoiseUnsupported { sigma2: net.sigma2 });
        }
        let beta = net.beta;
        let half_beta = 0.5 * beta;
        let kb_pow = k_beta(beta).powf(half_beta);
        let pi = core::f64::consts::PI;

        let z_rule = GaussLegendre::new(128);
        let mut rate_w = Vec::with_capacity(128);
        let mut rate_a = Vec::with_capacity(128);
        for (t, w) in z_rule.mapped(0.0, 1.0) {
            let z = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            let zb = z.powf(half_beta);
            rate_w.push(w * jac * half_beta * zb / (z * (1.0 + z) * (kb_pow + zb)));
            rate_a.push(pi * net.lambda * z / (1.0 + z));
        }

        let phi_rule = GaussLegendre::new(64);
        let phi_nodes = phi_rule.mapped(0.0, pi).collect();

        let speed_nodes = match mobility.speed {
            SpeedDistribution::Constant(v) => alloc::vec![(v, 1.0)],
            ref dist => {
                let rule = super::speed_rule();
                rule.mapped(0.0, dist.upper_cutoff())
                    .map(|(v, w)| (v, w * dist.density(v)))
                    .collect()
            }
        };

        Ok(SmoothUtility {
            rate_w,
            rate_a,
            phi_nodes,
            r_rule: GaussLegendre::new(96),
            speed_nodes,
            lambda: net.lambda,
            c: util.c,
        })
    }

    /// Cycle-averaged rate bound at continuous period `s`.
    pub fn rate(&self, s: f64) -> f64 {
        let mut total = 0.0;
        for &(v, pw) in &self.speed_nodes {
            let sv2 = (s * v) * (s * v);
            let mut acc = 0.0;
            for (w, a) in self.rate_w.iter().zip(self.rate_a.iter()) {
                acc += w * gaussian_cycle_average(a * sv2);
            }
            total += pw * acc;
        }
        total
    }

    /// Per-slot handover rate at continuous period `s`: one cycle-length hop
    /// per cycle.
    pub fn handover(&self, s: f64) -> f64 {
        let pi = core::f64::consts::PI;
        let lam = self.lambda;
        let mut total = 0.0;
        for &(v, pw) in &self.speed_nodes {
            let l = s * v;
            if l == 0.0 {
                continue;
            }
            let r_max = 6.0 / lam.sqrt() + l;
            let mut p = 0.0;
            for &(phi, w_phi) in &self.phi_nodes {
                let mut inner = 0.0;
                for (r, w_r) in self.r_rule.mapped(0.0, r_max) {
                    let excess = eta_excess(r, l, phi);
                    inner += w_r * r * (-lam * pi * r * r).exp() * (-(-lam * excess).exp_m1());
                }
                p += w_phi * inner;
            }
            total += pw * (2.0 * lam * p).clamp(0.0, 1.0);
        }
        total / s
    }

    /// Utility at continuous period `s`.
    pub fn eval(&self, s: f64) -> f64 {
        self.rate(s) - self.c * self.handover(s)
    }
}

/// Result of the numeric period search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoptNumeric {
    /// Maximizing continuous period.
    pub s: f64,
    /// Utility at the maximizer, nats/slot.
    pub utility: f64,
    /// Nearest admissible integer period (at least 1).
    pub s_rounded: u64,
}

/// Maximize the smooth continuous-period utility over `s ∈ [s_lo, s_hi]`.
///
/// Scans a geometric grid to bracket the maximum, then refines by golden
/// section. A maximum on the boundary of the range is reported as
/// [`AnalyticError::NoInteriorMaximum`] rather than silently returned, since
/// the stationary point is then outside (or the utility is monotone or flat,
/// e.g. for a zero handover cost or a static user).
pub fn sopt_numeric(
    net: &NetworkParams,
    mobility: &MobilityModel,
    util: &UtilityParams,
    s_range: (f64, f64),
) -> Result<SoptNumeric, AnalyticError> {
    let (lo, hi) = s_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(AnalyticError::Validation(ValidationError::Argument {
            name: "s_range",
            value: if lo.is_finite() { hi } else { lo },
        }));
    }
    let su = SmoothUtility::new(net, mobility, util)?;

    const GRID: usize = 32;
    let ratio = (hi / lo).powf(1.0 / (GRID - 1) as f64);
    let mut grid = [0.0f64; GRID];
    let mut vals = [0.0f64; GRID];
    let mut best = 0usize;
    for i in 0..GRID {
        grid[i] = lo * ratio.powi(i as i32);
        vals[i] = su.eval(grid[i]);
        if vals[i] > vals[best] {
            best = i;
        }
    }
    if best == 0 || best == GRID - 1 {
        return Err(AnalyticError::NoInteriorMaximum { s_lo: lo, s_hi: hi });
    }

    // golden-section refinement on the bracketing interval
    let gr = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = su.eval(c);
    let mut fd = su.eval(d);
    while b - a > 1e-9 * (1.0 + b) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = su.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = su.eval(d);
        }
    }
    let s = 0.5 * (a + b);
    let s_rounded = if s.round() < 1.0 { 1 } else { s.round() as u64 };
    Ok(SoptNumeric {
        s,
        utility: su.eval(s),
        s_rounded,
    })
}
