//! Monte Carlo commands: replications run in parallel across a thread pool
//! sized by `HOSKIP_THREADS`, per-replication traces stream to disk, and the
//! estimates are cross-checked against the analytic values where those exist.
//!
//! Replication `i` derives its randomness from stream `i` of the root seed
//! regardless of which worker runs it, so outputs are byte-identical across
//! thread counts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use hoskip_core::analytic::{h0, h1, t0, t1, utility, TauMode};
use hoskip_core::model::SkippingPolicy;
use hoskip_core::simulate::{run_single, MetricEstimate, SimConfig, SimPlan, TraceRow};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PolicyDoc, Resolved, RunConfig};
use crate::sweep::csv_writer;
use crate::{CliError, PolicyArg};

/// Build the worker pool, honoring `HOSKIP_THREADS` when set. The thread
/// count affects scheduling only, never the numbers.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var("HOSKIP_THREADS") {
        let n: usize = text.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "HOSKIP_THREADS must be a positive integer, got {text:?}"
            ))
        })?;
        if n == 0 {
            return Err(CliError::Validation(
                "HOSKIP_THREADS must be a positive integer, got 0".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Io(format!("failed to build thread pool: {e}")))
}

/// Aggregated estimates for one policy, plus the resolved run geometry.
pub struct PolicyRun {
    pub rate: MetricEstimate,
    pub handover: MetricEstimate,
    pub utility: MetricEstimate,
    pub plan: SimPlan,
}

/// Run all replications of one policy on the pool, in index order. With a
/// trace directory each replication writes `rep_NNNN.csv` as it finishes and
/// drops the rows, so memory stays flat in the horizon.
pub fn run_policy(
    res: &Resolved,
    policy: &SkippingPolicy,
    sim: &SimConfig,
    pool: &rayon::ThreadPool,
    trace_dir: Option<&Path>,
) -> Result<PolicyRun, CliError> {
    let plan = SimPlan::new(&res.net, policy, sim)?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let per_rep: Vec<(f64, f64)> = pool.install(|| {
        (0..sim.replications)
            .into_par_iter()
            .map(|rep| -> Result<(f64, f64), CliError> {
                let out = run_single(
                    &res.net,
                    &res.mobility,
                    policy,
                    sim,
                    rep,
                    trace_dir.is_some(),
                )?;
                if let Some(dir) = trace_dir {
                    write_trace(dir, rep, out.trace.as_deref().unwrap_or(&[]))?;
                }
                Ok((out.rate, out.handover))
            })
            .collect::<Result<_, _>>()
    })?;
    let rates: Vec<f64> = per_rep.iter().map(|&(r, _)| r).collect();
    let handovers: Vec<f64> = per_rep.iter().map(|&(_, h)| h).collect();
    let utilities: Vec<f64> = per_rep
        .iter()
        .map(|&(r, h)| utility(r, h, &res.util))
        .collect();
    Ok(PolicyRun {
        rate: MetricEstimate::from_samples(&rates),
        handover: MetricEstimate::from_samples(&handovers),
        utility: MetricEstimate::from_samples(&utilities),
        plan,
    })
}

fn write_trace(dir: &Path, rep: u32, rows: &[TraceRow]) -> Result<(), CliError> {
    let path = dir.join(format!("rep_{rep:04}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "slot",
        "x_km",
        "y_km",
        "serving_index",
        "sinr",
        "rate_nats",
        "ho_flag",
    ])?;
    for row in rows {
        w.write_record([
            row.slot.to_string(),
            row.x_km.to_string(),
            row.y_km.to_string(),
            row.serving_index.to_string(),
            row.sinr.to_string(),
            row.rate_nats.to_string(),
            u8::from(row.ho_flag).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateDoc {
    mean: f64,
    std_err: f64,
    replications: u32,
}

impl From<MetricEstimate> for EstimateDoc {
    fn from(e: MetricEstimate) -> Self {
        EstimateDoc {
            mean: e.mean,
            std_err: e.std_err,
            replications: e.replications,
        }
    }
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_unix_sec: Option<u64>,
    policy: PolicyDoc,
    estimates: EstimateBlock,
    analytic: AnalyticBlock,
    z_scores: ZScoreBlock,
    plan: PlanEcho,
    params: &'a RunConfig,
    units: BTreeMap<&'static str, &'static str>,
}

#[derive(Serialize)]
struct EstimateBlock {
    rate: EstimateDoc,
    handover: EstimateDoc,
    utility: EstimateDoc,
}

/// Analytic counterparts of the estimates; null where no formula applies
/// (the alternating policy).
#[derive(Serialize)]
struct AnalyticBlock {
    rate: Option<f64>,
    handover: Option<f64>,
    utility: Option<f64>,
    quadrature_err: Option<f64>,
}

/// |analytic − mean| / std_err per metric; null without an analytic value or
/// with zero spread.
#[derive(Serialize)]
struct ZScoreBlock {
    rate: Option<f64>,
    handover: Option<f64>,
    utility: Option<f64>,
}

#[derive(Serialize)]
struct PlanEcho {
    interference_radius_km: f64,
    guard_radius_km: f64,
    far_field_mean: f64,
    far_field_fluctuation_std: f64,
    cycle_slots: u64,
    horizon_slots: u64,
}

fn z_score(analytic: Option<f64>, est: &MetricEstimate) -> Option<f64> {
    let a = analytic?;
    if est.std_err > 0.0 {
        Some((a - est.mean).abs() / est.std_err)
    } else {
        None
    }
}

pub fn cmd_simulate(
    res: &Resolved,
    policy_arg: Option<PolicyArg>,
    trace_dir: Option<&Path>,
    no_timestamp: bool,
) -> Result<(), CliError> {
    let policy_doc = match policy_arg {
        None => res.doc.policy,
        Some(PolicyArg::Scenario0) => PolicyDoc::Scenario0,
        Some(PolicyArg::Alternate) => PolicyDoc::Alternate,
        Some(PolicyArg::Periodic) => PolicyDoc::Periodic {
            s: crate::require_period(&res.doc)?,
        },
    };
    let pool = thread_pool()?;
    let run = run_policy(res, &policy_doc.to_core(), &res.sim, &pool, trace_dir)?;

    let (rate, handover, quadrature_err) = match policy_doc {
        PolicyDoc::Scenario0 => {
            let t = t0(&res.net, &res.quad)?;
            let h = h0(&res.net, &res.mobility);
            (Some(t.value), Some(h), Some(t.err_est))
        }
        PolicyDoc::Periodic { s } => {
            let t = t1(s, &res.net, &res.mobility, TauMode::Exact, &res.quad)?;
            let h = h1(s, &res.net, &res.mobility, &res.quad)?;
            (
                Some(t.value),
                Some(h.value),
                Some(t.err_est + res.util.c * h.err_est),
            )
        }
        PolicyDoc::Alternate => (None, None, None),
    };
    let util = match (rate, handover) {
        (Some(t), Some(h)) => Some(utility(t, h, &res.util)),
        _ => None,
    };

    let report = SimulateReport {
        command: "simulate",
        timestamp_unix_sec: if no_timestamp {
            None
        } else {
            Some(
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .unwrap_or_default()
                    .as_secs(),
            )
        },
        policy: policy_doc,
        z_scores: ZScoreBlock {
            rate: z_score(rate, &run.rate),
            handover: z_score(handover, &run.handover),
            utility: z_score(util, &run.utility),
        },
        estimates: EstimateBlock {
            rate: run.rate.into(),
            handover: run.handover.into(),
            utility: run.utility.into(),
        },
        analytic: AnalyticBlock {
            rate,
            handover,
            utility: util,
            quadrature_err,
        },
        plan: PlanEcho {
            interference_radius_km: run.plan.interference_radius,
            guard_radius_km: run.plan.guard_radius,
            far_field_mean: run.plan.tail_mean,
            far_field_fluctuation_std: run.plan.tail_fluctuation_std,
            cycle_slots: run.plan.cycle_slots,
            horizon_slots: run.plan.horizon_slots,
        },
        params: &res.doc,
        units: BTreeMap::from([
            ("rate", "nats/slot"),
            ("handover", "handovers/slot"),
            ("utility", "nats/slot"),
            ("interference_radius", "km"),
            ("guard_radius", "km"),
        ]),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Parse the `--policies` list: `scenario0`, `alternate`, `periodic:S`, or
/// bare `periodic` (period from the config).
fn parse_policies(text: &str, res: &Resolved) -> Result<Vec<PolicyDoc>, CliError> {
    let mut docs = Vec::new();
    for token in text.split(',') {
        let token = token.trim();
        let doc = match token {
            "scenario0" => PolicyDoc::Scenario0,
            "alternate" => PolicyDoc::Alternate,
            "periodic" => PolicyDoc::Periodic {
                s: crate::require_period(&res.doc)?,
            },
            other => match other.strip_prefix("periodic:") {
                Some(s_text) => PolicyDoc::Periodic {
                    s: s_text.parse().map_err(|_| {
                        CliError::Validation(format!("invalid period in policy {token:?}"))
                    })?,
                },
                None => {
                    return Err(CliError::Validation(format!(
                        "unknown policy {token:?}; expected scenario0, alternate, periodic, or periodic:S"
                    )))
                }
            },
        };
        docs.push(doc);
    }
    if docs.len() < 2 {
        return Err(CliError::Validation(
            "compare needs at least two policies".into(),
        ));
    }
    Ok(docs)
}

fn policy_label(doc: PolicyDoc) -> String {
    match doc {
        PolicyDoc::Scenario0 => "scenario0".into(),
        PolicyDoc::Alternate => "alternate".into(),
        PolicyDoc::Periodic { s } => format!("periodic:{s}"),
    }
}

pub fn cmd_compare(res: &Resolved, policies: &str, out: Option<&Path>) -> Result<(), CliError> {
    let docs = parse_policies(policies, res)?;

    // All policies replay the same fields, trajectories, and fades (common
    // random numbers), which requires a shared movement-cycle length: the
    // configured one if set, else the common period when exactly one periodic
    // policy period occurs, else the horizon.
    let cycle = match res.doc.sim.cycle_slots {
        Some(c) => c,
        None => {
            let periods: BTreeSet<u64> = docs.iter().filter_map(|d| d.period()).collect();
            match periods.len() {
                1 => *periods.iter().next().expect("non-empty set"),
                _ => res.sim.horizon,
            }
        }
    };
    let mut sim = res.sim;
    sim.cycle_slots = Some(cycle);

    let pool = thread_pool()?;
    let mut w = csv_writer(out)?;
    w.write_record([
        "policy",
        "s_slots",
        "rate_mean_nats_per_slot",
        "rate_stderr_nats_per_slot",
        "handover_mean_per_slot",
        "handover_stderr_per_slot",
        "utility_mean_nats_per_slot",
        "utility_stderr_nats_per_slot",
        "replications",
        "seed",
    ])?;
    for doc in docs {
        let run = run_policy(res, &doc.to_core(), &sim, &pool, None)?;
        w.write_record([
            policy_label(doc),
            doc.period().map(|s| s.to_string()).unwrap_or_default(),
            run.rate.mean.to_string(),
            run.rate.std_err.to_string(),
            run.handover.mean.to_string(),
            run.handover.std_err.to_string(),
            run.utility.mean.to_string(),
            run.utility.std_err.to_string(),
            sim.replications.to_string(),
            sim.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
