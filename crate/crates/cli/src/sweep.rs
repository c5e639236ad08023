//! The `sweep` command: evaluate the metric set along one parameter axis and
//! print a CSV table, one row per axis value.
//!
//! Column presence depends on the configuration, not the row: periodic-policy
//! columns appear when a period is in scope (the `s` axis or a configured
//! periodic policy), lower-bound columns when additionally the network is
//! noise-free, and optimal-period columns when the axis moves them. Every
//! header name carries its unit.

use std::path::Path;

use hoskip_core::analytic::{h0, h1, sopt, t0, t1, t1_batch, utility, TauMode};
use hoskip_core::model::SkippingPolicy;
use hoskip_core::quadrature::QuadResult;

use crate::config::{CostUnit, PolicyDoc, Resolved, RunConfig, SpeedUnit};
use crate::simrun::{run_policy, thread_pool};
use crate::{CliError, TauModeArg};

/// Parameter varied across rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Axis {
    /// Skipping period (values rounded to whole slots).
    S,
    /// Mean speed, in the declared speed unit.
    Vbar,
    /// Base-station density.
    Lambda,
    /// Path-loss exponent.
    Beta,
    /// Handover cost weight, in the declared cost unit.
    C,
}

/// Upper bound on sweep rows, guarding against runaway ranges.
const MAX_POINTS: usize = 100_000;

/// Parse an axis range: `lo:hi:step` (arithmetic, inclusive of every point
/// `lo + k·step ≤ hi` up to rounding) or `lo:hi:count@log` (geometric with
/// `count ≥ 2` points and `hi` hit exactly).
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let (body, log) = match text.strip_suffix("@log") {
        Some(body) => (body, true),
        None => (text, false),
    };
    let parts: Vec<&str> = body.split(':').collect();
    let [lo_text, hi_text, last] = parts[..] else {
        return Err(CliError::Validation(format!(
            "range must be lo:hi:step or lo:hi:count@log, got {text:?}"
        )));
    };
    let lo: f64 = lo_text
        .parse()
        .map_err(|_| CliError::Validation(format!("invalid range start {lo_text:?}")))?;
    let hi: f64 = hi_text
        .parse()
        .map_err(|_| CliError::Validation(format!("invalid range end {hi_text:?}")))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Validation(format!(
            "range needs finite lo <= hi, got {text:?}"
        )));
    }
    if log {
        let count: usize = last.parse().map_err(|_| {
            CliError::Validation(format!("log range needs an integer count, got {last:?}"))
        })?;
        if count < 2 {
            return Err(CliError::Validation(
                "log range needs at least 2 points".into(),
            ));
        }
        if count > MAX_POINTS {
            return Err(CliError::Validation(format!(
                "range has {count} points, above the cap of {MAX_POINTS}"
            )));
        }
        if lo <= 0.0 {
            return Err(CliError::Validation(
                "log range needs a positive start".into(),
            ));
        }
        let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
        let mut points: Vec<f64> = (0..count).map(|i| lo * ratio.powi(i as i32)).collect();
        points[count - 1] = hi;
        Ok(points)
    } else {
        let step: f64 = last
            .parse()
            .map_err(|_| CliError::Validation(format!("invalid range step {last:?}")))?;
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::Validation(format!(
                "range step must be positive, got {step}"
            )));
        }
        // The slack admits endpoints that miss by float rounding alone.
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if n > MAX_POINTS {
            return Err(CliError::Validation(format!(
                "range has {n} points, above the cap of {MAX_POINTS}"
            )));
        }
        Ok((0..n).map(|i| lo + step * i as f64).collect())
    }
}

/// CSV writer to a file or stdout.
pub fn csv_writer(
    out: Option<&Path>,
) -> Result<csv::Writer<Box<dyn std::io::Write>>, CliError> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn axis_column(axis: Axis, doc: &RunConfig) -> &'static str {
    match axis {
        Axis::S => "s_slots",
        Axis::Vbar => match doc.units.speed_unit {
            SpeedUnit::KmPerSlot => "vbar_km_per_slot",
            SpeedUnit::KmPerSec => "vbar_km_per_sec",
        },
        Axis::Lambda => "lambda_per_km2",
        Axis::Beta => "beta",
        Axis::C => match doc.units.c_unit {
            CostUnit::PerSlot => "c_per_slot",
            CostUnit::PerSec => "c_per_sec",
        },
    }
}

fn checked_period(v: f64) -> Result<u64, CliError> {
    let s = v.round();
    if !(v.is_finite() && s >= 1.0 && s < u64::MAX as f64) {
        return Err(CliError::Validation(format!(
            "period values must round to a positive whole number of slots, got {v}"
        )));
    }
    Ok(s as u64)
}

fn apply_axis(doc: &mut RunConfig, axis: Axis, v: f64) -> Result<(), CliError> {
    match axis {
        Axis::S => doc.policy = PolicyDoc::Periodic { s: checked_period(v)? },
        Axis::Vbar => doc.mobility.speed = doc.mobility.speed.with_mean(v),
        Axis::Lambda => doc.network.lambda = v,
        Axis::Beta => doc.network.beta = v,
        Axis::C => doc.utility.c = v,
    }
    Ok(())
}

pub fn cmd_sweep(
    res: &Resolved,
    axis: Axis,
    range: &str,
    mode: TauModeArg,
    simulate: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let values = parse_range(range)?;
    let has_s = matches!(axis, Axis::S) || res.doc.policy.period().is_some();
    let lower_cols = has_s && res.net.sigma2 == 0.0;
    let sopt_cols = matches!(axis, Axis::Beta | Axis::C);

    let mut header: Vec<&'static str> = vec![axis_column(axis, &res.doc)];
    header.extend(["t0_nats_per_slot", "h0_per_slot", "u0_nats_per_slot"]);
    if has_s {
        header.extend(["t1_nats_per_slot", "h1_per_slot", "u1_nats_per_slot"]);
    }
    if lower_cols {
        header.extend(["t1_lower_nats_per_slot", "u1_lower_nats_per_slot"]);
    }
    if sopt_cols {
        header.extend(["sopt_slots", "sopt_rounded_slots"]);
    }
    if simulate {
        header.extend([
            "sim_rate_mean_nats_per_slot",
            "sim_rate_stderr_nats_per_slot",
            "sim_handover_mean_per_slot",
            "sim_handover_stderr_per_slot",
            "sim_utility_mean_nats_per_slot",
            "sim_utility_stderr_nats_per_slot",
        ]);
    }

    // Rows along the period axis share one interpolation table per mode
    // instead of rebuilding it per row.
    let mut t1_rows: Option<Vec<QuadResult>> = None;
    let mut t1_lower_rows: Option<Vec<QuadResult>> = None;
    if axis == Axis::S {
        let periods: Vec<u64> = values
            .iter()
            .map(|&v| checked_period(v))
            .collect::<Result<_, _>>()?;
        t1_rows = Some(t1_batch(
            &periods,
            &res.net,
            &res.mobility,
            mode.to_core(),
            &res.quad,
        )?);
        if lower_cols {
            t1_lower_rows = Some(t1_batch(
                &periods,
                &res.net,
                &res.mobility,
                TauMode::LowerBound,
                &res.quad,
            )?);
        }
    }
    // The baseline rate moves only with the network shape.
    let t0_fixed = match axis {
        Axis::Lambda | Axis::Beta => None,
        _ => Some(t0(&res.net, &res.quad)?),
    };
    let pool = if simulate { Some(thread_pool()?) } else { None };

    let mut w = csv_writer(out)?;
    w.write_record(&header)?;
    for (i, &v) in values.iter().enumerate() {
        let mut doc = res.doc.clone();
        apply_axis(&mut doc, axis, v)?;
        let row = doc.resolve()?;
        let s_scope = row.doc.policy.period().filter(|_| has_s);

        let t0r = match t0_fixed {
            Some(r) => r,
            None => t0(&row.net, &row.quad)?,
        };
        let h0v = h0(&row.net, &row.mobility);
        let axis_value = match axis {
            Axis::S => checked_period(v)?.to_string(),
            _ => v.to_string(),
        };
        let mut rec: Vec<String> = vec![axis_value];
        rec.push(t0r.value.to_string());
        rec.push(h0v.to_string());
        rec.push(utility(t0r.value, h0v, &row.util).to_string());
        if let Some(s) = s_scope {
            let t1r = match &t1_rows {
                Some(rows) => rows[i],
                None => t1(s, &row.net, &row.mobility, mode.to_core(), &row.quad)?,
            };
            let h1r = h1(s, &row.net, &row.mobility, &row.quad)?;
            rec.push(t1r.value.to_string());
            rec.push(h1r.value.to_string());
            rec.push(utility(t1r.value, h1r.value, &row.util).to_string());
            if lower_cols {
                let tl = match &t1_lower_rows {
                    Some(rows) => rows[i],
                    None => t1(s, &row.net, &row.mobility, TauMode::LowerBound, &row.quad)?,
                };
                rec.push(tl.value.to_string());
                rec.push(utility(tl.value, h1r.value, &row.util).to_string());
            }
        }
        if sopt_cols {
            let so = sopt(row.net.beta, &row.util, &row.quad)?;
            rec.push(so.s.to_string());
            rec.push(so.s_rounded.to_string());
        }
        if let Some(pool) = &pool {
            let policy = match s_scope {
                Some(s) => SkippingPolicy::Periodic { s },
                None => row.policy,
            };
            let run = run_policy(&row, &policy, &row.sim, pool, None)?;
            rec.extend([
                run.rate.mean.to_string(),
                run.rate.std_err.to_string(),
                run.handover.mean.to_string(),
                run.handover.std_err.to_string(),
                run.utility.mean.to_string(),
                run.utility.std_err.to_string(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_range_is_inclusive() {
        assert_eq!(parse_range("1:5:1").unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_range("0:1:0.25").unwrap().len(), 5);
        assert_eq!(parse_range("2:2:1").unwrap(), vec![2.0]);
        // An endpoint missed only by float rounding still makes it in.
        assert_eq!(parse_range("0:0.3:0.1").unwrap().len(), 4);
    }

    #[test]
    fn log_range_hits_both_endpoints_exactly() {
        let pts = parse_range("1:1000:4@log").unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0], 1.0);
        assert_eq!(pts[3], 1000.0);
        assert!((pts[1] - 10.0).abs() < 1e-9 && (pts[2] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_ranges_are_rejected() {
        for text in [
            "1:5", "1:5:0", "1:5:-1", "5:1:1", "1:5:2.5@log", "1:5:1@log",
            "a:5:1", "1:b:1", "-1:5:3@log", "1:inf:1",
        ] {
            assert!(parse_range(text).is_err(), "{text}");
        }
    }

    #[test]
    fn period_values_round_to_whole_slots() {
        assert_eq!(checked_period(3.0).unwrap(), 3);
        assert_eq!(checked_period(3.4).unwrap(), 3);
        assert!(checked_period(0.2).is_err());
        assert!(checked_period(f64::NAN).is_err());
    }
}
