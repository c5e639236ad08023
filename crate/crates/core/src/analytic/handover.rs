//! Handover rates: the per-slot rate of nearest-cell changes for an
//! always-connected user and for one that re-associates only at the start of
//! each skipping cycle.
//!
//! Both rest on the same geometric object: the region swept when a disk
//! around the start of a hop is dragged to its end. A fresh nearest-cell at
//! the end of a hop of length `l` exists iff that swept region minus the
//! original disk is non-empty of base stations; `eta` measures its area.

use super::{expect_over_speed, speed_rule, AnalyticError};
use crate::model::{MobilityModel, NetworkParams, ValidationError};
use crate::quadrature::{integrate_2d, QuadResult, QuadSpec};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Per-slot handover rate with re-association every slot: `4·√λ·v̄/π`.
///
/// Linear in both the mean speed and the square root of the density — the
/// mean number of cell borders a unit-length segment crosses.
pub fn h0(net: &NetworkParams, mobility: &MobilityModel) -> f64 {
    4.0 * net.lambda.sqrt() * mobility.speed.mean() / core::f64::consts::PI
}

/// Area swept when a disk of radius `r` centered `l` before the endpoint of a
/// hop (at angle `phi` off the hop direction) is dragged along the hop:
/// `π·r²` plus the newly uncovered crescent.
pub fn eta(r: f64, l: f64, phi: f64) -> f64 {
    core::f64::consts::PI * r * r + eta_excess(r, l, phi)
}

/// The crescent part of [`eta`]: zero when the hop stays inside the original
/// cell geometry (`l = 0`), asymptotically the full far disk `π·l²` when the
/// hop dwarfs the disk.
pub(crate) fn eta_excess(r: f64, l: f64, phi: f64) -> f64 {
    let (sin_phi, cos_phi) = phi.sin_cos();
    let w_sq = r * r + l * l - 2.0 * r * l * cos_phi;
    if w_sq <= 0.0 {
        // endpoint coincides with the disk center: nothing newly uncovered
        return 0.0;
    }
    let w = w_sq.sqrt();
    let ang = ((r * cos_phi - l) / w).clamp(-1.0, 1.0).acos();
    (w_sq * ang - r * r * phi + r * l * sin_phi).max(0.0)
}

/// Probability that the nearest base station differs between the two ends of
/// a straight hop of length `l` through a field of density `lambda`.
///
/// Evaluated as a double integral over the serving-distance/angle law of the
/// hop's start, with the void-probability excess kept in `expm1` form so the
/// small-`l` regime (probability `≈ 4√λ·l/π`) loses nothing to cancellation.
pub fn cell_change_probability(
    l: f64,
    lambda: f64,
    spec: &QuadSpec,
) -> Result<QuadResult, AnalyticError> {
    if !(l.is_finite() && l >= 0.0) {
        return Err(AnalyticError::Validation(ValidationError::Argument {
            name: "l",
            value: l,
        }));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(AnalyticError::Validation(ValidationError::Lambda(lambda)));
    }
    if l == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            err_est: 0.0,
            tail_bound: 0.0,
            evals: 0,
        });
    }
    let pi = core::f64::consts::PI;
    let res = integrate_2d(
        |phi, r| {
            let excess = eta_excess(r, l, phi);
            r * (-lambda * pi * r * r).exp() * (-(-lambda * excess).exp_m1())
        },
        0.0,
        pi,
        |_phi| (0.0, f64::INFINITY),
        spec,
    )?;
    let scale = 2.0 * lambda;
    Ok(QuadResult {
        value: (scale * res.value).clamp(0.0, 1.0),
        err_est: scale * res.err_est,
        tail_bound: scale * res.tail_bound,
        evals: res.evals,
    })
}

/// Per-slot handover rate when re-association happens once per `s`-slot
/// cycle: the chance that one cycle-length hop lands in a different nearest
/// cell, averaged over speed and spread over the cycle.
pub fn h1(
    s: u64,
    net: &NetworkParams,
    mobility: &MobilityModel,
    spec: &QuadSpec,
) -> Result<QuadResult, AnalyticError> {
    if s == 0 {
        return Err(AnalyticError::Validation(ValidationError::SkipPeriod(0)));
    }
    let rule = speed_rule();
    let fail = super::InnerFailure::new();
    let err = core::cell::Cell::new(0.0f64);
    let evals = core::cell::Cell::new(0u32);
    let p = expect_over_speed(&mobility.speed, &rule, |v| {
        let r = cell_change_probability(s as f64 * v, net.lambda, spec);
        match r {
            Ok(q) => {
                err.set(err.get() + q.err_est);
                evals.set(evals.get() + q.evals);
                q.value
            }
            Err(AnalyticError::Quadrature(e)) => fail.guard(Err(e)),
            // validation cannot fire here: s·v is finite and nonnegative
            Err(_) => f64::NAN,
        }
    });
    if !p.is_finite() {
        return fail
            .resolve(Err(crate::quadrature::QuadError::IntegrandError { x: p }))
            .map_err(Into::into);
    }
    let sf = s as f64;
    Ok(QuadResult {
        value: p.clamp(0.0, 1.0) / sf,
        err_est: err.get() / sf,
        tail_bound: 0.0,
        evals: evals.get(),
    })
}
