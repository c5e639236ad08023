//! Closed-form and quadrature-based performance metrics: expected downlink
//! rate, handover rate, utility, and the approximately optimal skipping
//! period.
//!
//! Rates are nats/slot, handover rates are handovers/slot, and distances are
//! km throughout. Everything funnels through the adaptive engine in
//! [`crate::quadrature`] except the optimal-period search, which evaluates its
//! objective on fixed nodes so that differences on the order of the speed
//! squared survive (see [`optimal`]).

mod handover;
mod interp;
mod optimal;
mod rate;

pub use handover::{cell_change_probability, eta, h0, h1};
pub use optimal::{
    i_beta, sopt, sopt_numeric, utility, utility_slope_residual, SmoothUtility, Sopt, SoptNumeric,
};
pub use rate::{j_integral, mu, t0, t1, t1_batch, tau, JMethod, TauEvaluator, TauMode};

use crate::model::ValidationError;
use crate::quadrature::{GaussLegendre, QuadError, QuadResult};
use core::cell::Cell;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Errors from the analytic layer.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticError {
    Quadrature(QuadError),
    Validation(ValidationError),
    /// The requested mode is derived under zero noise and cannot be evaluated
    /// with σ² > 0.
    NoiseUnsupported { sigma2: f64 },
    /// The utility had no interior maximum inside the searched period range;
    /// the boundary values are carried for diagnostics.
    NoInteriorMaximum { s_lo: f64, s_hi: f64 },
}

impl fmt::Display for AnalyticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticError::Quadrature(e) => write!(f, "{e}"),
            AnalyticError::Validation(e) => write!(f, "{e}"),
            AnalyticError::NoiseUnsupported { sigma2 } => write!(
                f,
                "this mode assumes an interference-limited network (σ² = 0), got σ² = {sigma2}"
            ),
            AnalyticError::NoInteriorMaximum { s_lo, s_hi } => write!(
                f,
                "utility has no interior maximum over the period range [{s_lo}, {s_hi}]"
            ),
        }
    }
}

impl core::error::Error for AnalyticError {}

impl From<QuadError> for AnalyticError {
    fn from(e: QuadError) -> Self {
        AnalyticError::Quadrature(e)
    }
}

impl From<ValidationError> for AnalyticError {
    fn from(e: ValidationError) -> Self {
        AnalyticError::Validation(e)
    }
}

/// Interference scaling constant `(2π/β)·csc(2π/β)`.
///
/// Equals π/2 at β = 4 and grows without bound as β approaches 2, where the
/// aggregate far-field interference stops being summable.
pub fn k_beta(beta: f64) -> f64 {
    debug_assert!(beta > 2.0);
    let x = 2.0 * core::f64::consts::PI / beta;
    x / x.sin()
}

/// `x^β` specialized for the common integer exponents, evaluated from `x²`.
///
/// The path-loss power sits in the innermost loops of both the quadrature
/// chain and the simulator, where `powf` would dominate the profile.
#[derive(Debug, Clone, Copy)]
pub(crate) enum PowBeta {
    Cube,
    Quartic,
    General { half_beta: f64 },
}

impl PowBeta {
    pub(crate) fn new(beta: f64) -> Self {
        if beta == 3.0 {
            PowBeta::Cube
        } else if beta == 4.0 {
            PowBeta::Quartic
        } else {
            PowBeta::General {
                half_beta: 0.5 * beta,
            }
        }
    }

    /// `(x²)^(β/2) = x^β` for `x ≥ 0`, taking the squared argument.
    #[inline]
    pub(crate) fn pow_sq(&self, x_sq: f64) -> f64 {
        match *self {
            PowBeta::Cube => x_sq * x_sq.sqrt(),
            PowBeta::Quartic => x_sq * x_sq,
            PowBeta::General { half_beta } => x_sq.powf(half_beta),
        }
    }
}

/// Captures the first failure of an inner integral evaluated inside an outer
/// integrand, where only an `f64` can flow.
///
/// The inner failure surfaces as NaN to the outer rule (which aborts) and the
/// recorded error is reported instead of the outer rule's complaint.
pub(crate) struct InnerFailure(Cell<Option<QuadError>>);

impl InnerFailure {
    pub(crate) fn new() -> Self {
        InnerFailure(Cell::new(None))
    }

    /// Unwrap an inner result, recording a failure and poisoning the outer
    /// integrand with NaN.
    pub(crate) fn guard(&self, r: Result<QuadResult, QuadError>) -> f64 {
        match r {
            Ok(q) => q.value,
            Err(e) => {
                let prev = self.0.take();
                self.0.set(Some(prev.unwrap_or(e)));
                f64::NAN
            }
        }
    }

    /// Replace an outer failure with the recorded inner one, if any.
    pub(crate) fn resolve(
        &self,
        outer: Result<QuadResult, QuadError>,
    ) -> Result<QuadResult, QuadError> {
        match outer {
            Ok(q) => Ok(q),
            Err(e) => Err(self.0.take().unwrap_or(e)),
        }
    }
}

/// Expectation over a speed distribution using a cached Gauss–Legendre rule
/// on `[0, mean + 10σ]`.
///
/// `Constant` speeds evaluate `f` once; the truncated tail carries at most a
/// few 1e-5 of probability mass for the supported distributions.
pub(crate) fn expect_over_speed<F: Fn(f64) -> f64>(
    dist: &crate::model::SpeedDistribution,
    rule: &GaussLegendre,
    f: F,
) -> f64 {
    match dist {
        crate::model::SpeedDistribution::Constant(v) => f(*v),
        _ => rule
            .mapped(0.0, dist.upper_cutoff())
            .map(|(v, w)| w * dist.density(v) * f(v))
            .sum(),
    }
}

pub(crate) fn speed_rule() -> GaussLegendre {
    GaussLegendre::new(64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpeedDistribution;

    #[test]
    fn k_beta_known_points() {
        assert!((k_beta(4.0) - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let k3 = 4.0 * core::f64::consts::PI / (3.0 * 3.0f64.sqrt());
        assert!((k_beta(3.0) - k3).abs() < 1e-15);
        assert!(k_beta(2.01) > 100.0);
    }

    #[test]
    fn pow_beta_matches_powf() {
        for beta in [3.0, 4.0, 3.7, 5.5] {
            let p = PowBeta::new(beta);
            for x in [0.01, 0.5, 1.0, 7.3] {
                let got = p.pow_sq(x * x);
                let want = x.powf(beta);
                assert!((got - want).abs() <= 1e-12 * want, "beta={beta} x={x}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn pow_beta_agrees_with_powf_everywhere(
            beta in 2.05f64..8.0,
            x in 1e-3f64..1e3,
        ) {
            let p = PowBeta::new(beta);
            let got = p.pow_sq(x * x);
            let want = x.powf(beta);
            proptest::prop_assert!((got - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn speed_expectation_recovers_mean_and_second_moment() {
        let rule = speed_rule();
        for dist in [
            SpeedDistribution::Exponential { mean: 0.02 },
            SpeedDistribution::Erlang2 { mean: 0.02 },
            SpeedDistribution::HyperExp2 { mean: 0.02 },
        ] {
            let m = expect_over_speed(&dist, &rule, |v| v);
            assert!(
                (m - dist.mean()).abs() < 1e-5 * dist.mean(),
                "{dist:?}: mean {m}"
            );
            let m2 = expect_over_speed(&dist, &rule, |v| v * v);
            let want = dist.variance() + dist.mean() * dist.mean();
            assert!((m2 - want).abs() < 1e-3 * want, "{dist:?}: second moment {m2}");
        }
        let c = SpeedDistribution::Constant(0.5);
        assert_eq!(expect_over_speed(&c, &rule, |v| 2.0 * v), 1.0);
    }
}
