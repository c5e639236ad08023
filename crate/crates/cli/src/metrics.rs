//! Single-metric commands: compute one number, wrap it with the resolved
//! parameter echo and unit labels, and print it as pretty JSON.
//!
//! Per-slot rates are also reported per wall-clock second (divided by
//! `slot_duration_sec`), and periods in slots also in seconds, so outputs can
//! be read in either time base without re-deriving the conversion.

use std::collections::BTreeMap;

use hoskip_core::analytic::{h0, h1, i_beta, sopt, sopt_numeric, t0, t1, tau, utility};
use serde::Serialize;

use crate::config::{Resolved, RunConfig};
use crate::{CliError, TauModeArg};

/// Output envelope shared by all metric commands. Optional fields appear only
/// when the metric defines them; `quadrature_err` is always present and null
/// for closed forms.
#[derive(Serialize)]
struct MetricReport<'a> {
    metric: &'static str,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    value_per_sec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_rounded: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    handover: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    utility_at_optimum: Option<f64>,
    params: ParamsEcho<'a>,
    units: BTreeMap<&'static str, &'static str>,
    quadrature_err: Option<f64>,
}

/// Echo of the inputs: command-specific arguments plus the full resolved
/// configuration document, flattened.
#[derive(Serialize)]
struct ParamsEcho<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    u_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_slots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_range_slots: Option<[f64; 2]>,
    #[serde(flatten)]
    config: &'a RunConfig,
}

fn base<'a>(metric: &'static str, value: f64, config: &'a RunConfig) -> MetricReport<'a> {
    MetricReport {
        metric,
        value,
        value_per_sec: None,
        value_seconds: None,
        s_rounded: None,
        rate: None,
        handover: None,
        utility_at_optimum: None,
        params: ParamsEcho {
            u_km: None,
            s_slots: None,
            tau_mode: None,
            s_range_slots: None,
            config,
        },
        units: BTreeMap::new(),
        quadrature_err: None,
    }
}

fn emit(report: &MetricReport) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn rate_units() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([("value", "nats/slot"), ("value_per_sec", "nats/sec")])
}

fn handover_units() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([("value", "handovers/slot"), ("value_per_sec", "handovers/sec")])
}

fn period_units() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([("value", "slots"), ("value_seconds", "seconds")])
}

pub fn cmd_t0(res: &Resolved) -> Result<(), CliError> {
    let r = t0(&res.net, &res.quad)?;
    let mut rep = base("t0", r.value, &res.doc);
    rep.value_per_sec = Some(r.value / res.slot_sec);
    rep.units = rate_units();
    rep.quadrature_err = Some(r.err_est);
    emit(&rep)
}

pub fn cmd_tau(res: &Resolved, u: f64, mode: TauModeArg) -> Result<(), CliError> {
    let r = tau(u, &res.net, mode.to_core(), &res.quad)?;
    let mut rep = base("tau", r.value, &res.doc);
    rep.value_per_sec = Some(r.value / res.slot_sec);
    rep.params.u_km = Some(u);
    rep.params.tau_mode = Some(mode.name());
    rep.units = rate_units();
    rep.units.insert("u", "km");
    rep.quadrature_err = Some(r.err_est);
    emit(&rep)
}

pub fn cmd_t1(res: &Resolved, s: u64, mode: TauModeArg) -> Result<(), CliError> {
    let r = t1(s, &res.net, &res.mobility, mode.to_core(), &res.quad)?;
    let mut rep = base("t1", r.value, &res.doc);
    rep.value_per_sec = Some(r.value / res.slot_sec);
    rep.params.s_slots = Some(s);
    rep.params.tau_mode = Some(mode.name());
    rep.units = rate_units();
    rep.quadrature_err = Some(r.err_est);
    emit(&rep)
}

pub fn cmd_h0(res: &Resolved) -> Result<(), CliError> {
    let value = h0(&res.net, &res.mobility);
    let mut rep = base("h0", value, &res.doc);
    rep.value_per_sec = Some(value / res.slot_sec);
    rep.units = handover_units();
    emit(&rep)
}

pub fn cmd_h1(res: &Resolved, s: u64) -> Result<(), CliError> {
    let r = h1(s, &res.net, &res.mobility, &res.quad)?;
    let mut rep = base("h1", r.value, &res.doc);
    rep.value_per_sec = Some(r.value / res.slot_sec);
    rep.params.s_slots = Some(s);
    rep.units = handover_units();
    rep.quadrature_err = Some(r.err_est);
    emit(&rep)
}

pub fn cmd_utility(res: &Resolved, mode: TauModeArg) -> Result<(), CliError> {
    let units = BTreeMap::from([
        ("value", "nats/slot"),
        ("value_per_sec", "nats/sec"),
        ("rate", "nats/slot"),
        ("handover", "handovers/slot"),
    ]);
    match res.doc.policy.period() {
        Some(s) => {
            let t = t1(s, &res.net, &res.mobility, mode.to_core(), &res.quad)?;
            let h = h1(s, &res.net, &res.mobility, &res.quad)?;
            let value = utility(t.value, h.value, &res.util);
            let mut rep = base("utility", value, &res.doc);
            rep.value_per_sec = Some(value / res.slot_sec);
            rep.rate = Some(t.value);
            rep.handover = Some(h.value);
            rep.params.s_slots = Some(s);
            rep.params.tau_mode = Some(mode.name());
            rep.units = units;
            rep.quadrature_err = Some(t.err_est + res.util.c * h.err_est);
            emit(&rep)
        }
        None => {
            let t = t0(&res.net, &res.quad)?;
            let h = h0(&res.net, &res.mobility);
            let value = utility(t.value, h, &res.util);
            let mut rep = base("utility", value, &res.doc);
            rep.value_per_sec = Some(value / res.slot_sec);
            rep.rate = Some(t.value);
            rep.handover = Some(h);
            rep.units = units;
            rep.quadrature_err = Some(t.err_est);
            emit(&rep)
        }
    }
}

pub fn cmd_sopt(res: &Resolved) -> Result<(), CliError> {
    let so = sopt(res.net.beta, &res.util, &res.quad)?;
    let ib = i_beta(res.net.beta, &res.quad)?;
    let mut rep = base("sopt", so.s, &res.doc);
    rep.value_seconds = Some(so.s * res.slot_sec);
    rep.s_rounded = Some(so.s_rounded);
    rep.units = period_units();
    // The period is proportional to 1/I_β, so its quadrature uncertainty is
    // the relative error of that integral scaled by the period itself.
    rep.quadrature_err = Some(so.s * ib.err_est / ib.value);
    emit(&rep)
}

pub fn cmd_sopt_numeric(res: &Resolved, s_lo: f64, s_hi: f64) -> Result<(), CliError> {
    let r = sopt_numeric(&res.net, &res.mobility, &res.util, (s_lo, s_hi))?;
    let mut rep = base("sopt_numeric", r.s, &res.doc);
    rep.value_seconds = Some(r.s * res.slot_sec);
    rep.s_rounded = Some(r.s_rounded);
    rep.utility_at_optimum = Some(r.utility);
    rep.params.s_range_slots = Some([s_lo, s_hi]);
    rep.units = period_units();
    rep.units.insert("utility_at_optimum", "nats/slot");
    emit(&rep)
}
