//! Expected downlink rate: the always-nearest baseline, the conditional rate
//! at a given displacement from the last association point, and its per-cycle
//! average under periodic skipping.
//!
//! All rates are expectations of `ln(1 + SINR)` in nats/slot over fading,
//! interference, and the base-station process. The displacement-conditional
//! rate `tau` is the expensive object: a three-level integral chain whose
//! innermost member is the zonal path-loss integral `j_integral`. The
//! per-cycle average `t1` therefore caches `tau` on a refinable displacement
//! grid and interpolates.

use super::interp::MonotoneCubic;
use super::{expect_over_speed, k_beta, speed_rule, AnalyticError, InnerFailure, PowBeta};
use crate::model::{MobilityModel, NetworkParams, ValidationError};
use crate::quadrature::{integrate_1d, QuadError, QuadResult, QuadSpec};
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Exponent threshold beyond which `exp(-x)` is treated as exactly zero; the
/// integrand factors bounded by `exp(x)` then cancel to a provably negligible
/// contribution without risking overflow on the way.
const EXP_DEAD: f64 = 650.0;

/// Relative target for the displacement-grid interpolation inside [`t1`].
const TABLE_REL_TOL: f64 = 1e-4;

/// How the zonal path-loss integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JMethod {
    /// Single radial integral with the subtended-angle factor in closed form.
    /// Default: one quadrature level cheaper.
    Radial,
    /// Double integral in polar coordinates. Kept as an independent
    /// cross-check of the radial reduction.
    Polar,
}

/// Evaluation strategy for the displacement-conditional rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    /// Full integral chain (radial zonal integral).
    Exact,
    /// Full integral chain with the polar zonal integral; slow, for
    /// cross-checks.
    ExactPolarJ,
    /// Closed-form lower bound (requires σ² = 0). Cheap: a single 1-D
    /// integral.
    LowerBound,
    /// Blend `w(u)·t0 + (1-w(u))·lower_bound(u)` with weight
    /// `w(u) = exp(-a·u^b)`; requires σ² = 0.
    Interpolated { a: f64, b: f64 },
}

impl TauMode {
    /// The interpolated mode with its default weight shape (a = 10, b = 2).
    pub fn interpolated() -> Self {
        TauMode::Interpolated { a: 10.0, b: 2.0 }
    }
}

impl Default for TauMode {
    fn default() -> Self {
        TauMode::Exact
    }
}

fn check_arg(name: &'static str, v: f64, allow_zero: bool) -> Result<(), AnalyticError> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if ok {
        Ok(())
    } else {
        Err(AnalyticError::Validation(ValidationError::Argument {
            name,
            value: v,
        }))
    }
}

/// Expected downlink rate of a user that always connects to its nearest base
/// station, in nats/slot.
///
/// With σ² = 0 the result is independent of the density λ and reduces to a
/// single integral over the SINR threshold variable; with noise it is a double
/// integral that also weighs the serving-distance distribution.
pub fn t0(net: &NetworkParams, spec: &QuadSpec) -> Result<QuadResult, AnalyticError> {
    let beta = net.beta;
    let a = 2.0 / beta;
    let half_beta = 0.5 * beta;
    let fail = InnerFailure::new();
    let tail_spec = spec.tightened(10.0);

    // A(z) = 1 + z^(2/β) ∫_{z^(-2/β)}^∞ dw/(1 + w^(β/2)): interference load
    // factor of the typical cell at threshold z.
    let a_of = |z: f64| -> f64 {
        let y = z.powf(-a);
        let tail = integrate_1d(|w| 1.0 / (1.0 + w.powf(half_beta)), y, f64::INFINITY, &tail_spec);
        1.0 + z.powf(a) * fail.guard(tail)
    };

    let outer = if net.sigma2 == 0.0 {
        integrate_1d(|z| 1.0 / ((1.0 + z) * a_of(z)), 0.0, f64::INFINITY, spec)
    } else {
        // noise coefficient of the serving-distance variable: σ²·z·(w/(πλ))^(β/2)
        let c_noise = net.sigma2 / (core::f64::consts::PI * net.lambda).powf(half_beta);
        let w_spec = spec.tightened(10.0);
        let outer_integrand = |z: f64| {
            let az = a_of(z);
            if !az.is_finite() {
                return f64::NAN;
            }
            // Rescale w so the faster of the two decay terms has a unit
            // coefficient. Without this the integrand collapses into a spike
            // near w = 0 once z·c_noise is large, and the coarse pass of the
            // adaptive rule steps right over it.
            let p = z * c_noise;
            let w_char = if p > 0.0 {
                (1.0 / az).min(p.powf(-a))
            } else {
                1.0 / az
            };
            let noise_coeff = p * w_char.powf(half_beta);
            let load_coeff = az * w_char;
            let inner = integrate_1d(
                |q| (-noise_coeff * q.powf(half_beta) - load_coeff * q).exp(),
                0.0,
                f64::INFINITY,
                &w_spec,
            );
            w_char * fail.guard(inner) / (1.0 + z)
        };
        integrate_1d(outer_integrand, 0.0, f64::INFINITY, spec)
    };
    fail.resolve(outer).map_err(Into::into)
}

/// Zonal path-loss integral `J(r, z, u)`: the integral of `z/(z + |x|^β)`
/// over a disk of radius `r` whose center sits `u` away from the origin of
/// the path-loss kernel.
///
/// `Radial` evaluates it as one integral over distance with the subtended
/// angle in closed form; `Polar` integrates angle explicitly.
pub fn j_integral(
    r: f64,
    z: f64,
    u: f64,
    beta: f64,
    method: JMethod,
    spec: &QuadSpec,
) -> Result<QuadResult, AnalyticError> {
    check_arg("r", r, true)?;
    check_arg("z", z, true)?;
    check_arg("u", u, true)?;
    if !(beta.is_finite() && beta > 2.0) {
        return Err(AnalyticError::Validation(ValidationError::Beta(beta)));
    }
    let pow = PowBeta::new(beta);
    match method {
        JMethod::Radial => j_radial(r, z, u, &pow, spec).map_err(Into::into),
        JMethod::Polar => j_polar(r, z, u, &pow, spec).map_err(Into::into),
    }
}

/// Radial form: `2z·[π·∫_0^(r-u) + ∫_(|r-u|)^(r+u) with the arccos angle]`.
pub(crate) fn j_radial(
    r: f64,
    z: f64,
    u: f64,
    pow: &PowBeta,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    let zero = QuadResult {
        value: 0.0,
        err_est: 0.0,
        tail_bound: 0.0,
        evals: 0,
    };
    if r <= 0.0 || z <= 0.0 {
        return Ok(zero);
    }
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0;

    // Full-circle part: every point closer than r - u to the kernel origin
    // lies inside the disk regardless of angle.
    if u < r {
        let hi = r - u;
        if hi > 0.0 {
            let res = integrate_1d(|x| x / (z + pow.pow_sq(x * x)), 0.0, hi, spec)?;
            value += core::f64::consts::PI * res.value;
            err += core::f64::consts::PI * res.err_est;
            evals += res.evals;
        }
    }
    // Partial-angle band between |r - u| and r + u.
    if u > 0.0 {
        let lo = (r - u).abs();
        let hi = r + u;
        let res = integrate_1d(
            |x| {
                let cosang = ((x * x + u * u - r * r) / (2.0 * x * u)).clamp(-1.0, 1.0);
                x * cosang.acos() / (z + pow.pow_sq(x * x))
            },
            lo,
            hi,
            spec,
        )?;
        value += res.value;
        err += res.err_est;
        evals += res.evals;
    }
    Ok(QuadResult {
        value: 2.0 * z * value,
        err_est: 2.0 * z * err,
        tail_bound: 0.0,
        evals,
    })
}

/// Polar form: `2z·∫_0^π ∫_0^r x/(z + w(x,φ)^β) dx dφ` with
/// `w² = x² + u² - 2xu·cos φ`.
fn j_polar(
    r: f64,
    z: f64,
    u: f64,
    pow: &PowBeta,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    if r <= 0.0 || z <= 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            err_est: 0.0,
            tail_bound: 0.0,
            evals: 0,
        });
    }
    let fail = InnerFailure::new();
    let inner_spec = spec.tightened(10.0);
    let outer = integrate_1d(
        |phi: f64| {
            let cos_phi = phi.cos();
            let inner = integrate_1d(
                |x| {
                    let w_sq = (x * x + u * u - 2.0 * x * u * cos_phi).max(0.0);
                    x / (z + pow.pow_sq(w_sq))
                },
                0.0,
                r,
                &inner_spec,
            );
            fail.guard(inner)
        },
        0.0,
        core::f64::consts::PI,
        spec,
    );
    let res = fail.resolve(outer)?;
    Ok(QuadResult {
        value: 2.0 * z * res.value,
        err_est: 2.0 * z * res.err_est,
        tail_bound: 0.0,
        evals: res.evals,
    })
}

/// Exponential tilt `μ(z, u) ≥ 1` of the clear-area probability: the expected
/// value of `exp(λ·J)` over the serving-distance distribution, which measures
/// how much the void region around the original association point discounts
/// interference seen from displacement `u`.
pub fn mu(z: f64, u: f64, net: &NetworkParams, spec: &QuadSpec) -> Result<QuadResult, AnalyticError> {
    check_arg("z", z, true)?;
    check_arg("u", u, true)?;
    if z == 0.0 {
        return Ok(QuadResult {
            value: 1.0,
            err_est: 0.0,
            tail_bound: 0.0,
            evals: 0,
        });
    }
    let pow = PowBeta::new(net.beta);
    let r = mu_minus_one(z, u, net.lambda, &pow, JMethod::Radial, spec)?;
    Ok(QuadResult {
        value: 1.0 + r.value,
        ..r
    })
}

/// `μ(z, u) - 1` computed directly (no cancellation for small z, where μ is
/// barely above 1): `2πλ ∫ r·e^(-λπr²)·expm1(λ·J(r, z, u)) dr`.
fn mu_minus_one(
    z: f64,
    u: f64,
    lambda: f64,
    pow: &PowBeta,
    method: JMethod,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    let j_spec = spec.tightened(10.0);
    let fail = InnerFailure::new();
    let pi = core::f64::consts::PI;
    let integrand = |r: f64| {
        let j = match method {
            JMethod::Radial => fail.guard(j_radial(r, z, u, pow, &j_spec)),
            JMethod::Polar => fail.guard(j_polar(r, z, u, pow, &j_spec)),
        };
        r * (-lambda * pi * r * r).exp() * (lambda * j).exp_m1()
    };
    let res = fail.resolve(integrate_1d(integrand, 0.0, f64::INFINITY, spec))?;
    Ok(QuadResult {
        value: 2.0 * pi * lambda * res.value,
        err_est: 2.0 * pi * lambda * res.err_est,
        tail_bound: 2.0 * pi * lambda * res.tail_bound,
        evals: res.evals,
    })
}

/// Reusable evaluator for the displacement-conditional expected rate.
///
/// Holds per-network constants and, for the interpolated mode, the baseline
/// rate `t0`, so sweeping many displacements does not recompute them.
#[derive(Debug, Clone)]
pub struct TauEvaluator {
    net: NetworkParams,
    mode: TauMode,
    spec: QuadSpec,
    kb: f64,
    pow: PowBeta,
    /// Baseline rate, present only for `Interpolated`.
    t0_value: Option<f64>,
}

impl TauEvaluator {
    pub fn new(
        net: &NetworkParams,
        mode: TauMode,
        spec: &QuadSpec,
    ) -> Result<Self, AnalyticError> {
        match mode {
            TauMode::LowerBound | TauMode::Interpolated { .. } if net.sigma2 > 0.0 => {
                return Err(AnalyticError::NoiseUnsupported { sigma2: net.sigma2 });
            }
            _ => {}
        }
        let t0_value = match mode {
            TauMode::Interpolated { .. } => Some(t0(net, spec)?.value),
            _ => None,
        };
        Ok(TauEvaluator {
            net: *net,
            mode,
            spec: *spec,
            kb: k_beta(net.beta),
            pow: PowBeta::new(net.beta),
            t0_value,
        })
    }

    /// Expected rate at displacement `u` km from the association point.
    pub fn eval(&self, u: f64) -> Result<QuadResult, AnalyticError> {
        check_arg("u", u, true)?;
        match self.mode {
            TauMode::Exact => self.eval_exact(u, JMethod::Radial),
            TauMode::ExactPolarJ => self.eval_exact(u, JMethod::Polar),
            TauMode::LowerBound => self.eval_lower_bound(u).map_err(Into::into),
            TauMode::Interpolated { a, b } => {
                let lb = self.eval_lower_bound(u)?;
                let w = (-a * u.abs().powf(b)).exp();
                let t0v = self.t0_value.expect("t0 cached for interpolated mode");
                Ok(QuadResult {
                    value: w * t0v + (1.0 - w) * lb.value,
                    err_est: lb.err_est + w * self.spec.rel_tol * t0v,
                    ..lb
                })
            }
        }
    }

    /// Full chain: outer integral over the SINR threshold variable with the
    /// error budget split 100:10:1 across outer, tilt, and zonal levels.
    fn eval_exact(&self, u: f64, method: JMethod) -> Result<QuadResult, AnalyticError> {
        let outer_spec = QuadSpec {
            rel_tol: self.spec.rel_tol * 100.0,
            abs_tol: self.spec.abs_tol * 100.0,
            ..self.spec
        };
        let mu_spec = QuadSpec {
            rel_tol: self.spec.rel_tol * 10.0,
            abs_tol: self.spec.abs_tol * 10.0,
            ..self.spec
        };
        let net = self.net;
        let pi = core::f64::consts::PI;
        let fail = InnerFailure::new();
        let integrand = |z: f64| {
            let noise_exp = net.sigma2 * z;
            // whole-plane interference exponent; also an upper bound on λ·J
            let e_full = pi * net.lambda * self.kb * z.powf(2.0 / net.beta);
            if noise_exp >= EXP_DEAD || e_full >= EXP_DEAD {
                return 0.0;
            }
            let m = fail.guard(mu_minus_one(z, u, net.lambda, &self.pow, method, &mu_spec));
            (-noise_exp - e_full).exp() * m / z
        };
        let res = fail.resolve(integrate_1d(integrand, 0.0, f64::INFINITY, &outer_spec))?;
        Ok(res)
    }

    /// Closed-form lower bound (σ² = 0): single integral whose displacement
    /// dependence enters through a Gaussian-in-u factor.
    fn eval_lower_bound(&self, u: f64) -> Result<QuadResult, QuadError> {
        let beta = self.net.beta;
        let half_beta = 0.5 * beta;
        let kb_pow = self.kb.powf(half_beta);
        let lam_pi_u2 = core::f64::consts::PI * self.net.lambda * u * u;
        let integrand = |z: f64| {
            let zb = z.powf(half_beta);
            let frac = z / (1.0 + z);
            zb / (z * (1.0 + z) * (kb_pow + zb)) * (-lam_pi_u2 * frac).exp()
        };
        let res = integrate_1d(integrand, 0.0, f64::INFINITY, &self.spec)?;
        Ok(QuadResult {
            value: half_beta * res.value,
            err_est: half_beta * res.err_est,
            tail_bound: half_beta * res.tail_bound,
            evals: res.evals,
        })
    }
}

/// Displacement-conditional expected rate `tau(u)`: one-shot wrapper around
/// [`TauEvaluator`].
pub fn tau(
    u: f64,
    net: &NetworkParams,
    mode: TauMode,
    spec: &QuadSpec,
) -> Result<QuadResult, AnalyticError> {
    TauEvaluator::new(net, mode, spec)?.eval(u)
}

/// `tau` cached on a refinable uniform displacement grid with monotone-cubic
/// interpolation between nodes.
struct TauTable {
    curve: MonotoneCubic,
    /// Worst relative quadrature error among grid evaluations.
    worst_rel_err: f64,
    /// Observed relative interpolation error at the last refinement level.
    interp_rel_err: f64,
    evals: u32,
}

/// Refinement ladder: nested uniform grids, capped at 241 nodes.
const TABLE_LEVELS: [usize; 5] = [16, 31, 61, 121, 241];

impl TauTable {
    fn build(ev: &TauEvaluator, u_max: f64) -> Result<TauTable, AnalyticError> {
        let mut n = TABLE_LEVELS[0];
        let mut xs: Vec<f64> = (0..n).map(|i| u_max * i as f64 / (n - 1) as f64).collect();
        let mut worst_rel = 0.0f64;
        let mut evals = 0u32;
        let eval_at = |x: f64, worst: &mut f64, evals: &mut u32| -> Result<f64, AnalyticError> {
            let r = ev.eval(x)?;
            *evals += r.evals;
            if r.value.abs() > 0.0 {
                *worst = worst.max(r.err_est / r.value.abs());
            }
            Ok(r.value)
        };
        let mut ys = Vec::with_capacity(n);
        for &x in &xs {
            ys.push(eval_at(x, &mut worst_rel, &mut evals)?);
        }
        let mut curve = MonotoneCubic::new(xs.clone(), ys.clone());
        let mut interp_rel = f64::INFINITY;

        for &next in &TABLE_LEVELS[1..] {
            // midpoints of the current grid become the new nodes
            let mut new_xs = Vec::with_capacity(next - n);
            for i in 0..n - 1 {
                new_xs.push(0.5 * (xs[i] + xs[i + 1]));
            }
            let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            let mut max_err = 0.0f64;
            let mut new_ys = Vec::with_capacity(new_xs.len());
            for &x in &new_xs {
                let exact = eval_at(x, &mut worst_rel, &mut evals)?;
                let predicted = curve.eval(x);
                max_err = max_err.max((predicted - exact).abs() / scale.max(1e-300));
                new_ys.push(exact);
            }
            // merge grids (interleave: old[0], new[0], old[1], ...)
            let mut merged_x = Vec::with_capacity(next);
            let mut merged_y = Vec::with_capacity(next);
            for i in 0..n - 1 {
                merged_x.push(xs[i]);
                merged_y.push(ys[i]);
                merged_x.push(new_xs[i]);
                merged_y.push(new_ys[i]);
            }
            merged_x.push(xs[n - 1]);
            merged_y.push(ys[n - 1]);
            xs = merged_x;
            ys = merged_y;
            n = next;
            curve = MonotoneCubic::new(xs.clone(), ys.clone());
            interp_rel = max_err;
            if max_err <= TABLE_REL_TOL {
                break;
            }
        }
        Ok(TauTable {
            curve,
            worst_rel_err: worst_rel,
            interp_rel_err: if interp_rel.is_finite() { interp_rel } else { 0.0 },
            evals,
        })
    }
}

/// Per-cycle average expected rate under periodic skipping with period `s`:
/// the mean of `tau(t·V)` over the cycle position `t = 0..s` and the speed
/// distribution.
pub fn t1(
    s: u64,
    net: &NetworkParams,
    mobility: &MobilityModel,
    mode: TauMode,
    spec: &QuadSpec,
) -> Result<QuadResult, AnalyticError> {
    let mut v = t1_batch(&[s], net, mobility, mode, spec)?;
    Ok(v.pop().expect("one result per requested period"))
}

/// [`t1`] for several periods sharing one displacement table (built once for
/// the largest period).
pub fn t1_batch(
    periods: &[u64],
    net: &NetworkParams,
    mobility: &MobilityModel,
    mode: TauMode,
    spec: &QuadSpec,
) -> Result<Vec<QuadResult>, AnalyticError> {
    for &s in periods {
        if s == 0 {
            return Err(AnalyticError::Validation(ValidationError::SkipPeriod(0)));
        }
    }
    let ev = TauEvaluator::new(net, mode, spec)?;
    let s_max = periods.iter().copied().max().unwrap_or(1);
    let v_hi = mobility.speed.upper_cutoff();
    let u_max = (s_max - 1) as f64 * v_hi;

    if u_max <= 0.0 {
        // static user or single-slot cycle: every slot sees the rate at zero
        // displacement
        let r = ev.eval(0.0)?;
        return Ok(periods.iter().map(|_| r).collect());
    }

    let table = TauTable::build(&ev, u_max)?;
    let rule = speed_rule();
    let mut out = Vec::with_capacity(periods.len());
    for &s in periods {
        // Neumaier-compensated sum over the cycle: harmless for short cycles,
        // keeps long sweeps (s ~ 50k) at full precision.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for t in 0..s {
            let tf = t as f64;
            let term = expect_over_speed(&mobility.speed, &rule, |v| table.curve.eval(tf * v));
            let fresh = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - fresh) + term;
            } else {
                comp += (term - fresh) + sum;
            }
            sum = fresh;
        }
        let value = (sum + comp) / s as f64;
        out.push(QuadResult {
            value,
            err_est: (table.worst_rel_err + table.interp_rel_err) * value.abs(),
            tail_bound: 0.0,
            evals: table.evals,
        });
    }
    Ok(out)
}
