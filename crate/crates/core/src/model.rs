//! Parameter types shared by the analytic formulas and the simulator, with
//! validation at construction.
//!
//! Canonical internal units are kilometers for length and slots for time:
//! base-station density is per km², speeds are km/slot, rates are nats/slot
//! and handovers/slot. Conversions from wall-clock units happen at the
//! caller's boundary, never here.

use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Network-side model: base-station density, path loss, and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Base-station density λ in units/km².
    pub lambda: f64,
    /// Path-loss exponent β; must exceed 2 for the interference field to have
    /// finite local integrals.
    pub beta: f64,
    /// Noise power σ² relative to unit transmit power; 0 means
    /// interference-limited.
    pub sigma2: f64,
}

impl NetworkParams {
    pub fn new(lambda: f64, beta: f64, sigma2: f64) -> Result<Self, ValidationError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ValidationError::Lambda(lambda));
        }
        if !(beta.is_finite() && beta > 2.0) {
            return Err(ValidationError::Beta(beta));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(ValidationError::Sigma2(sigma2));
        }
        Ok(NetworkParams {
            lambda,
            beta,
            sigma2,
        })
    }
}

/// Distribution of the user's speed, redrawn each movement cycle.
///
/// All variants are parameterized by their mean so that curves with equal
/// average speed are directly comparable; they differ in variance:
/// 0, mean², mean²/2, and 1.5·mean² respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedDistribution {
    /// Deterministic speed (km/slot). Zero is allowed and models a static
    /// user.
    Constant(f64),
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// Erlang of shape 2 (sum of two exponentials of mean `mean`/2).
    Erlang2 { mean: f64 },
    /// Balanced two-phase hyperexponential: with probability 1/2 an
    /// exponential of mean `mean`/2, otherwise of mean 3·`mean`/2.
    HyperExp2 { mean: f64 },
}

impl SpeedDistribution {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let v = self.mean();
        match self {
            SpeedDistribution::Constant(_) => {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ValidationError::Speed(v));
                }
            }
            _ => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ValidationError::Speed(v));
                }
            }
        }
        Ok(())
    }

    /// Mean speed in km/slot.
    pub fn mean(&self) -> f64 {
        match *self {
            SpeedDistribution::Constant(v) => v,
            SpeedDistribution::Exponential { mean }
            | SpeedDistribution::Erlang2 { mean }
            | SpeedDistribution::HyperExp2 { mean } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        match self {
            SpeedDistribution::Constant(_) => 0.0,
            SpeedDistribution::Exponential { .. } => m * m,
            SpeedDistribution::Erlang2 { .. } => 0.5 * m * m,
            // mixture second moment: (1/2)·2·(m/2)² + (1/2)·2·(3m/2)² = 2.5 m²
            SpeedDistribution::HyperExp2 { .. } => 1.5 * m * m,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Probability density at `v` (a Dirac mass for `Constant`, for which this
    /// returns 0; expectations of `Constant` should be taken directly).
    pub fn density(&self, v: f64) -> f64 {
        if v < 0.0 {
            return 0.0;
        }
        match *self {
            SpeedDistribution::Constant(_) => 0.0,
            SpeedDistribution::Exponential { mean } => (-v / mean).exp() / mean,
            SpeedDistribution::Erlang2 { mean } => {
                let rate = 2.0 / mean;
                rate * rate * v * (-rate * v).exp()
            }
            SpeedDistribution::HyperExp2 { mean } => {
                let r1 = 2.0 / mean;
                let r2 = 2.0 / (3.0 * mean);
                0.5 * r1 * (-r1 * v).exp() + 0.5 * r2 * (-r2 * v).exp()
            }
        }
    }

    /// Upper integration cutoff for expectations over this distribution
    /// (the value itself for `Constant`). Chosen so the slowest exponential
    /// component decays through at least 15 e-folds by the cutoff, keeping
    /// the truncated share of the first two moments below 1e-4.
    pub fn upper_cutoff(&self) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Exponential { mean } => 15.0 * mean,
            Self::Erlang2 { mean } => 10.0 * mean,
            Self::HyperExp2 { mean } => 22.5 * mean,
        }
    }

    /// Draw one speed.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        fn exp_sample<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
            // inverse CDF; 1 - u ∈ (0, 1] keeps the logarithm finite
            let u: f64 = rng.random();
            -mean * (1.0 - u).ln()
        }
        match *self {
            SpeedDistribution::Constant(v) => v,
            SpeedDistribution::Exponential { mean } => exp_sample(rng, mean),
            SpeedDistribution::Erlang2 { mean } => {
                exp_sample(rng, 0.5 * mean) + exp_sample(rng, 0.5 * mean)
            }
            SpeedDistribution::HyperExp2 { mean } => {
                let branch_mean = if rng.random::<bool>() { 0.5 * mean } else { 1.5 * mean };
                exp_sample(rng, branch_mean)
            }
        }
    }
}

/// Mobility model: piecewise-linear motion with uniformly random direction and
/// a speed redrawn from `speed` at the start of each cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityModel {
    pub speed: SpeedDistribution,
}

impl MobilityModel {
    pub fn new(speed: SpeedDistribution) -> Result<Self, ValidationError> {
        speed.validate()?;
        Ok(MobilityModel { speed })
    }
}

/// How the user chooses its serving base station over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkippingPolicy {
    /// Re-associate to the nearest base station every slot.
    Scenario0,
    /// Re-examine the nearest base station only every `s` slots and hand over
    /// if it changed.
    Periodic { s: u64 },
    /// On each change of the nearest base station, alternately execute and
    /// skip the handover, starting with an execution.
    Alternate,
}

impl SkippingPolicy {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if let SkippingPolicy::Periodic { s } = self {
            if *s == 0 {
                return Err(ValidationError::SkipPeriod(*s));
            }
        }
        Ok(())
    }
}

/// Weight of handovers against rate in the utility `U = T - c·H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    /// Cost per handover in nats (so `c·H` is nats/slot, like the rate).
    pub c: f64,
}

impl UtilityParams {
    pub fn new(c: f64) -> Result<Self, ValidationError> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(ValidationError::UtilityWeight(c));
        }
        Ok(UtilityParams { c })
    }
}

/// A parameter violated its domain constraint; the payload is the offending
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationError {
    /// Density must be finite and > 0.
    Lambda(f64),
    /// Path-loss exponent must be finite and > 2.
    Beta(f64),
    /// Noise power must be finite and ≥ 0.
    Sigma2(f64),
    /// Speeds must be finite and nonnegative (positive for random
    /// distributions).
    Speed(f64),
    /// The skipping period must be at least one slot.
    SkipPeriod(u64),
    /// The handover cost must be finite and ≥ 0.
    UtilityWeight(f64),
    /// A free function argument (named in the payload) was out of domain.
    Argument { name: &'static str, value: f64 },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::Lambda(v) => {
                write!(f, "base-station density must be finite and positive, got {v}")
            }
            ValidationError::Beta(v) => {
                write!(f, "path-loss exponent must be finite and exceed 2, got {v}")
            }
            ValidationError::Sigma2(v) => {
                write!(f, "noise power must be finite and nonnegative, got {v}")
            }
            ValidationError::Speed(v) => {
                write!(f, "speed must be finite and nonnegative (positive mean for random distributions), got {v}")
            }
            ValidationError::SkipPeriod(s) => {
                write!(f, "skipping period must be at least 1 slot, got {s}")
            }
            ValidationError::UtilityWeight(v) => {
                write!(f, "handover cost must be finite and nonnegative, got {v}")
            }
            ValidationError::Argument { name, value } => {
                write!(f, "argument `{name}` must be finite and nonnegative, got {value}")
            }
        }
    }
}

impl core::error::Error for ValidationError {}
