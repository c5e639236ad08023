//! Run configuration: the JSON document every command accepts via `--config`,
//! its defaults, and its resolution into core types.
//!
//! The document mirrors the core parameter structs field for field but adds a
//! `units` block. Inputs may be given in wall-clock units (km/sec speeds,
//! per-sec utility weights); resolution multiplies them by
//! `slot_duration_sec` once, here, so that everything downstream works in km
//! and slots. Unknown keys anywhere in the document are rejected rather than
//! ignored.

use hoskip_core::model::{
    MobilityModel, NetworkParams, SkippingPolicy, SpeedDistribution, UtilityParams,
};
use hoskip_core::quadrature::QuadSpec;
use hoskip_core::simulate::SimConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Seed used when neither the config, the `--seed` flag, nor `HOSKIP_SEED`
/// provides one.
pub const DEFAULT_SEED: u64 = 12345;

/// Top-level configuration document. Every field has a default, so `{}` is a
/// complete config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkDoc,
    pub mobility: MobilityDoc,
    pub policy: PolicyDoc,
    pub utility: UtilityDoc,
    pub quadrature: QuadratureDoc,
    pub sim: SimDoc,
    pub units: UnitsDoc,
}

/// Network parameters; see [`NetworkParams`] for the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkDoc {
    /// Base-station density, units/km².
    pub lambda: f64,
    /// Path-loss exponent.
    pub beta: f64,
    /// Noise power relative to unit transmit power.
    pub sigma2: f64,
}

impl Default for NetworkDoc {
    fn default() -> Self {
        NetworkDoc {
            lambda: 1.0,
            beta: 3.0,
            sigma2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityDoc {
    pub speed: SpeedDoc,
}

impl Default for MobilityDoc {
    fn default() -> Self {
        MobilityDoc {
            speed: SpeedDoc::Constant { mean: 1e-5 },
        }
    }
}

/// Speed distribution, tagged by name and parameterized by its mean in the
/// declared speed unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedDoc {
    Constant { mean: f64 },
    Exponential { mean: f64 },
    Erlang2 { mean: f64 },
    HyperExp2 { mean: f64 },
}

impl SpeedDoc {
    pub fn mean(&self) -> f64 {
        match *self {
            SpeedDoc::Constant { mean }
            | SpeedDoc::Exponential { mean }
            | SpeedDoc::Erlang2 { mean }
            | SpeedDoc::HyperExp2 { mean } => mean,
        }
    }

    /// The same distribution with a different mean.
    pub fn with_mean(&self, mean: f64) -> SpeedDoc {
        match self {
            SpeedDoc::Constant { .. } => SpeedDoc::Constant { mean },
            SpeedDoc::Exponential { .. } => SpeedDoc::Exponential { mean },
            SpeedDoc::Erlang2 { .. } => SpeedDoc::Erlang2 { mean },
            SpeedDoc::HyperExp2 { .. } => SpeedDoc::HyperExp2 { mean },
        }
    }

    /// Core distribution with the mean rescaled into km/slot.
    fn to_core(self, speed_scale: f64) -> SpeedDistribution {
        let mean = self.mean() * speed_scale;
        match self {
            SpeedDoc::Constant { .. } => SpeedDistribution::Constant(mean),
            SpeedDoc::Exponential { .. } => SpeedDistribution::Exponential { mean },
            SpeedDoc::Erlang2 { .. } => SpeedDistribution::Erlang2 { mean },
            SpeedDoc::HyperExp2 { .. } => SpeedDistribution::HyperExp2 { mean },
        }
    }
}

/// Handover policy, tagged by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyDoc {
    /// Hand over on every serving-cell change.
    Scenario0,
    /// Execute handovers only every `s`-th slot.
    Periodic { s: u64 },
    /// Execute every other cell-change event.
    Alternate,
}

impl Default for PolicyDoc {
    fn default() -> Self {
        PolicyDoc::Scenario0
    }
}

impl PolicyDoc {
    pub fn to_core(self) -> SkippingPolicy {
        match self {
            PolicyDoc::Scenario0 => SkippingPolicy::Scenario0,
            PolicyDoc::Periodic { s } => SkippingPolicy::Periodic { s },
            PolicyDoc::Alternate => SkippingPolicy::Alternate,
        }
    }

    /// The skipping period, when the policy has one.
    pub fn period(&self) -> Option<u64> {
        match *self {
            PolicyDoc::Periodic { s } => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityDoc {
    /// Handover cost weight, in the declared cost unit.
    pub c: f64,
}

impl Default for UtilityDoc {
    fn default() -> Self {
        UtilityDoc { c: 10.0 }
    }
}

/// Quadrature controls; see [`QuadSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureDoc {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
    pub tail_cut: f64,
}

impl Default for QuadratureDoc {
    fn default() -> Self {
        let spec = QuadSpec::default();
        QuadratureDoc {
            rel_tol: spec.rel_tol,
            abs_tol: spec.abs_tol,
            max_subdivisions: spec.max_subdivisions,
            tail_cut: spec.tail_cut,
        }
    }
}

/// Simulation controls; see [`SimConfig`]. `seed: null` defers to
/// `HOSKIP_SEED` and then to [`DEFAULT_SEED`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimDoc {
    pub replications: u32,
    pub horizon: u64,
    pub seed: Option<u64>,
    pub interference_radius: Option<f64>,
    pub guard_radius: Option<f64>,
    pub cycle_slots: Option<u64>,
    pub max_half_span: f64,
}

impl Default for SimDoc {
    fn default() -> Self {
        let cfg = SimConfig::default();
        SimDoc {
            replications: cfg.replications,
            horizon: cfg.horizon,
            seed: None,
            interference_radius: cfg.interference_radius,
            guard_radius: cfg.guard_radius,
            cycle_slots: cfg.cycle_slots,
            max_half_span: cfg.max_half_span,
        }
    }
}

/// Units of the values in the rest of the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsDoc {
    pub speed_unit: SpeedUnit,
    pub c_unit: CostUnit,
    /// Wall-clock length of a slot; scales km/sec and per-sec inputs into
    /// per-slot internals and per-slot outputs back to per-sec.
    pub slot_duration_sec: f64,
}

impl Default for UnitsDoc {
    fn default() -> Self {
        UnitsDoc {
            speed_unit: SpeedUnit::KmPerSlot,
            c_unit: CostUnit::PerSlot,
            slot_duration_sec: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SpeedUnit {
    KmPerSlot,
    KmPerSec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CostUnit {
    PerSlot,
    PerSec,
}

/// A validated configuration: the echoed document (defaults and seed made
/// concrete) plus the core-type views with all units converted.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub doc: RunConfig,
    pub net: NetworkParams,
    pub mobility: MobilityModel,
    pub policy: SkippingPolicy,
    pub util: UtilityParams,
    pub quad: QuadSpec,
    pub sim: SimConfig,
    /// Wall-clock seconds per slot, for per-sec output conversions.
    pub slot_sec: f64,
}

impl RunConfig {
    /// Parse a config file, rejecting unknown keys.
    pub fn from_file(path: &std::path::Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Validate the document and convert into core types.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mut doc = self.clone();
        let dt = doc.units.slot_duration_sec;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CliError::Validation(format!(
                "slot_duration_sec must be finite and positive, got {dt}"
            )));
        }
        for (name, v, positive) in [
            ("quadrature.rel_tol", doc.quadrature.rel_tol, true),
            ("quadrature.abs_tol", doc.quadrature.abs_tol, false),
            ("quadrature.tail_cut", doc.quadrature.tail_cut, false),
        ] {
            let ok = v.is_finite() && (v > 0.0 || (!positive && v >= 0.0));
            if !ok {
                return Err(CliError::Validation(format!(
                    "{name} must be finite and {}, got {v}",
                    if positive { "positive" } else { "non-negative" }
                )));
            }
        }
        if doc.quadrature.max_subdivisions == 0 {
            return Err(CliError::Validation(
                "quadrature.max_subdivisions must be at least 1".into(),
            ));
        }

        let speed_scale = match doc.units.speed_unit {
            SpeedUnit::KmPerSlot => 1.0,
            SpeedUnit::KmPerSec => dt,
        };
        let c_scale = match doc.units.c_unit {
            CostUnit::PerSlot => 1.0,
            CostUnit::PerSec => dt,
        };

        let net = NetworkParams::new(doc.network.lambda, doc.network.beta, doc.network.sigma2)?;
        let mobility = MobilityModel::new(doc.mobility.speed.to_core(speed_scale))?;
        let policy = doc.policy.to_core();
        policy.validate()?;
        let util = UtilityParams::new(doc.utility.c * c_scale)?;
        let quad = QuadSpec {
            rel_tol: doc.quadrature.rel_tol,
            abs_tol: doc.quadrature.abs_tol,
            max_subdivisions: doc.quadrature.max_subdivisions,
            tail_cut: doc.quadrature.tail_cut,
        };
        let seed = match doc.sim.seed {
            Some(seed) => seed,
            None => seed_from_env()?,
        };
        doc.sim.seed = Some(seed);
        let sim = SimConfig {
            replications: doc.sim.replications,
            horizon: doc.sim.horizon,
            seed,
            interference_radius: doc.sim.interference_radius,
            guard_radius: doc.sim.guard_radius,
            cycle_slots: doc.sim.cycle_slots,
            max_half_span: doc.sim.max_half_span,
            record_trace: false,
        };
        Ok(Resolved {
            doc,
            net,
            mobility,
            policy,
            util,
            quad,
            sim,
            slot_sec: dt,
        })
    }
}

fn seed_from_env() -> Result<u64, CliError> {
    match std::env::var("HOSKIP_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "HOSKIP_SEED must be an unsigned integer, got {text:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_resolves_to_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        let res = cfg.resolve().unwrap();
        assert_eq!(res.net.lambda, 1.0);
        assert_eq!(res.net.beta, 3.0);
        assert_eq!(res.net.sigma2, 0.0);
        assert_eq!(res.mobility.speed, SpeedDistribution::Constant(1e-5));
        assert_eq!(res.policy, SkippingPolicy::Scenario0);
        assert_eq!(res.util.c, 10.0);
        assert_eq!(res.sim.seed, DEFAULT_SEED);
        assert_eq!(res.doc.sim.seed, Some(DEFAULT_SEED));
        assert_eq!(res.slot_sec, 0.001);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for text in [
            r#"{"networks": {}}"#,
            r#"{"network": {"lambda": 1.0, "intensity": 2.0}}"#,
            r#"{"mobility": {"speed": {"distribution": "constant", "mean": 1.0, "sd": 2.0}}}"#,
            r#"{"units": {"tick_sec": 0.001}}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn wall_clock_units_scale_by_slot_duration() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "mobility": {"speed": {"distribution": "exponential", "mean": 0.01}},
                "utility": {"c": 2000.0},
                "units": {"speed_unit": "km_per_sec", "c_unit": "per_sec",
                          "slot_duration_sec": 0.002}
            }"#,
        )
        .unwrap();
        let res = cfg.resolve().unwrap();
        assert_eq!(
            res.mobility.speed,
            SpeedDistribution::Exponential { mean: 0.01 * 0.002 }
        );
        assert_eq!(res.util.c, 2000.0 * 0.002);
        // The echoed document keeps the declared units untouched.
        assert_eq!(res.doc.mobility.speed.mean(), 0.01);
        assert_eq!(res.doc.utility.c, 2000.0);
    }

    #[test]
    fn invalid_parameters_name_the_violated_invariant() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"network": {"lambda": -1.0}}"#).unwrap();
        let err = cfg.resolve().unwrap_err();
        assert!(matches!(err, CliError::Validation(_)), "{err}");
        assert!(err.to_string().contains("density"), "{err}");
    }

    #[test]
    fn speed_doc_round_trips_through_json() {
        let doc = SpeedDoc::HyperExp2 { mean: 0.5 };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains(r#""distribution":"hyper_exp2""#), "{text}");
        assert_eq!(serde_json::from_str::<SpeedDoc>(&text).unwrap(), doc);
    }
}
