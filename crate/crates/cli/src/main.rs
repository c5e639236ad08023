//! `hoskip`: command-line front end for the handover-skipping performance
//! model.
//!
//! Every command reads the same JSON configuration document (`--config`),
//! overrides it with flags, converts declared units into the internal km/slot
//! system once, and prints a single JSON object (metrics) or CSV table
//! (sweeps, comparisons) to stdout. Exit codes: 0 success, 2 invalid input or
//! violated parameter invariant, 3 quadrature failure, 4 simulation window
//! too small.

mod config;
mod metrics;
mod simrun;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoskip_core::analytic::{AnalyticError, TauMode};
use hoskip_core::model::ValidationError;
use hoskip_core::simulate::SimError;

use config::{CostUnit, PolicyDoc, RunConfig, SpeedDoc, SpeedUnit};

/// Errors surfaced to the user, keyed by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, config, or parameter values (exit 2).
    Validation(String),
    /// Quadrature did not converge to the requested tolerance (exit 3).
    Quadrature(String),
    /// The simulation window exceeded its configured cap (exit 4).
    Geometry(String),
    /// File or stream I/O failure (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Quadrature(_) => 3,
            CliError::Geometry(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg)
            | CliError::Quadrature(msg)
            | CliError::Geometry(msg)
            | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Quadrature(q) => CliError::Quadrature(q.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::WindowTooSmall { .. } => CliError::Geometry(e.to_string()),
            SimError::Validation(v) => CliError::Validation(v.to_string()),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "hoskip",
    version,
    about = "Rate, handover, and utility metrics for periodic handover skipping on a random cellular network",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected per-slot rate when every cell change is executed.
    T0(MetricArgs),
    /// Expected per-slot rate at displacement --u since the last executed
    /// handover.
    Tau(TauArgs),
    /// Expected per-slot rate under periodic skipping with period --s.
    T1(RateArgs),
    /// Handover rate when every cell change is executed.
    H0(MetricArgs),
    /// Handover rate under periodic skipping with period --s.
    H1(MetricArgs),
    /// Utility (rate minus weighted handover rate); with --s the periodic
    /// policy, without it the always-execute baseline.
    Utility(RateArgs),
    /// Approximately optimal skipping period, closed form.
    Sopt(MetricArgs),
    /// Numerically optimal skipping period over a period range.
    SoptNumeric(SoptNumericArgs),
    /// Evaluate metrics along one parameter axis and print a CSV table.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of rate, handover rate, and utility, with
    /// analytic cross-checks where available.
    Simulate(SimulateArgs),
    /// Simulate several policies on shared random numbers and print a CSV
    /// table.
    Compare(CompareArgs),
    /// Print the fully resolved configuration document.
    DumpConfig(MetricArgs),
}

/// Parameter flags shared by every command. Each overrides the corresponding
/// config field; `--s` additionally selects the periodic policy.
#[derive(Args, Debug, Clone)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct ParamFlags {
    /// JSON configuration file; flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base-station density, units/km².
    #[arg(long)]
    lambda: Option<f64>,
    /// Path-loss exponent (> 2).
    #[arg(long)]
    beta: Option<f64>,
    /// Noise power relative to unit transmit power.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Speed distribution family.
    #[arg(long, value_enum)]
    speed_dist: Option<SpeedKind>,
    /// Mean speed, in the declared speed unit.
    #[arg(long)]
    vbar: Option<f64>,
    /// Unit of speed values.
    #[arg(long, value_enum)]
    speed_unit: Option<SpeedUnit>,
    /// Handover cost weight, in the declared cost unit.
    #[arg(long)]
    c: Option<f64>,
    /// Unit of the cost weight.
    #[arg(long, value_enum)]
    c_unit: Option<CostUnit>,
    /// Wall-clock seconds per slot.
    #[arg(long)]
    slot_duration_sec: Option<f64>,
    /// Quadrature relative tolerance.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Quadrature absolute tolerance.
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Skipping period in slots; selects the periodic policy.
    #[arg(long)]
    s: Option<u64>,
}

impl ParamFlags {
    /// Load the config file (or defaults) and apply the flag overrides.
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut doc = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.lambda {
            doc.network.lambda = v;
        }
        if let Some(v) = self.beta {
            doc.network.beta = v;
        }
        if let Some(v) = self.sigma2 {
            doc.network.sigma2 = v;
        }
        let mut speed = doc.mobility.speed;
        if let Some(kind) = self.speed_dist {
            speed = kind.to_doc(speed.mean());
        }
        if let Some(mean) = self.vbar {
            speed = speed.with_mean(mean);
        }
        doc.mobility.speed = speed;
        if let Some(unit) = self.speed_unit {
            doc.units.speed_unit = unit;
        }
        if let Some(v) = self.c {
            doc.utility.c = v;
        }
        if let Some(unit) = self.c_unit {
            doc.units.c_unit = unit;
        }
        if let Some(v) = self.slot_duration_sec {
            doc.units.slot_duration_sec = v;
        }
        if let Some(v) = self.rel_tol {
            doc.quadrature.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            doc.quadrature.abs_tol = v;
        }
        if let Some(s) = self.s {
            doc.policy = PolicyDoc::Periodic { s };
        }
        Ok(doc)
    }
}

/// Speed distribution family, combined with `--vbar` into a config entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum SpeedKind {
    Constant,
    Exponential,
    Erlang2,
    HyperExp2,
}

impl SpeedKind {
    fn to_doc(self, mean: f64) -> SpeedDoc {
        match self {
            SpeedKind::Constant => SpeedDoc::Constant { mean },
            SpeedKind::Exponential => SpeedDoc::Exponential { mean },
            SpeedKind::Erlang2 => SpeedDoc::Erlang2 { mean },
            SpeedKind::HyperExp2 => SpeedDoc::HyperExp2 { mean },
        }
    }
}

/// Evaluation mode for the conditional rate integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum TauModeArg {
    /// Full integral chain.
    #[default]
    Exact,
    /// Full chain with the polar form of the zonal integral (slow;
    /// cross-checks only).
    ExactPolar,
    /// Closed-form lower bound (needs sigma2 = 0).
    LowerBound,
    /// Blend of the stationary value and the lower bound (needs sigma2 = 0).
    Interpolated,
}

impl TauModeArg {
    pub fn to_core(self) -> TauMode {
        match self {
            TauModeArg::Exact => TauMode::Exact,
            TauModeArg::ExactPolar => TauMode::ExactPolarJ,
            TauModeArg::LowerBound => TauMode::LowerBound,
            TauModeArg::Interpolated => TauMode::interpolated(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TauModeArg::Exact => "exact",
            TauModeArg::ExactPolar => "exact_polar",
            TauModeArg::LowerBound => "lower_bound",
            TauModeArg::Interpolated => "interpolated",
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
struct TauArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Displacement since the last executed handover, km.
    #[arg(long)]
    u: f64,
    /// Rate-integral evaluation mode.
    #[arg(long, value_enum, default_value_t = TauModeArg::Exact)]
    tau_mode: TauModeArg,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Rate-integral evaluation mode.
    #[arg(long, value_enum, default_value_t = TauModeArg::Exact)]
    tau_mode: TauModeArg,
}

#[derive(Args)]
struct SoptNumericArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Lower end of the period search range, slots.
    #[arg(long, default_value_t = 1.0)]
    s_lo: f64,
    /// Upper end of the period search range, slots.
    #[arg(long, default_value_t = 1e5)]
    s_hi: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Parameter to vary.
    #[arg(long, value_enum)]
    axis: sweep::Axis,
    /// Axis values: `lo:hi:step` (arithmetic) or `lo:hi:count@log`
    /// (geometric).
    #[arg(long)]
    range: String,
    /// Rate-integral evaluation mode for the periodic-policy columns.
    #[arg(long, value_enum, default_value_t = TauModeArg::Exact)]
    tau_mode: TauModeArg,
    /// Add Monte Carlo estimate columns.
    #[arg(long)]
    simulate: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Policy to simulate (defaults to the configured one; `periodic` takes
    /// its period from --s or the config).
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Independent replications.
    #[arg(long)]
    reps: Option<u32>,
    /// Slots per replication (rounded up to whole movement cycles).
    #[arg(long)]
    horizon: Option<u64>,
    /// Root seed; replication i uses stream i.
    #[arg(long)]
    seed: Option<u64>,
    /// Write one per-slot trace CSV per replication into this directory.
    #[arg(long, value_name = "DIR")]
    trace_dir: Option<PathBuf>,
    /// Omit the wall-clock timestamp so identical runs print identical bytes.
    #[arg(long)]
    no_timestamp: bool,
}

/// Policy selector for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PolicyArg {
    Scenario0,
    Periodic,
    Alternate,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Comma-separated policies, at least two: `scenario0`, `alternate`,
    /// `periodic:S`, or `periodic` (period from --s or the config).
    #[arg(long)]
    policies: String,
    /// Independent replications per policy.
    #[arg(long)]
    reps: Option<u32>,
    /// Slots per replication.
    #[arg(long)]
    horizon: Option<u64>,
    /// Root seed, shared by all policies (common random numbers).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// The configured skipping period, required by the periodic-policy metrics.
fn require_period(doc: &RunConfig) -> Result<u64, CliError> {
    doc.policy.period().ok_or_else(|| {
        CliError::Validation(
            "a skipping period is required: pass --s or configure the periodic policy".into(),
        )
    })
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::T0(args) => metrics::cmd_t0(&args.params.load()?.resolve()?),
        Command::Tau(args) => {
            metrics::cmd_tau(&args.params.load()?.resolve()?, args.u, args.tau_mode)
        }
        Command::T1(args) => {
            let res = args.params.load()?.resolve()?;
            let s = require_period(&res.doc)?;
            metrics::cmd_t1(&res, s, args.tau_mode)
        }
        Command::H0(args) => metrics::cmd_h0(&args.params.load()?.resolve()?),
        Command::H1(args) => {
            let res = args.params.load()?.resolve()?;
            let s = require_period(&res.doc)?;
            metrics::cmd_h1(&res, s)
        }
        Command::Utility(args) => {
            let res = args.params.load()?.resolve()?;
            metrics::cmd_utility(&res, args.tau_mode)
        }
        Command::Sopt(args) => metrics::cmd_sopt(&args.params.load()?.resolve()?),
        Command::SoptNumeric(args) => {
            let res = args.params.load()?.resolve()?;
            metrics::cmd_sopt_numeric(&res, args.s_lo, args.s_hi)
        }
        Command::Sweep(args) => {
            let res = args.params.load()?.resolve()?;
            sweep::cmd_sweep(
                &res,
                args.axis,
                &args.range,
                args.tau_mode,
                args.simulate,
                args.out.as_deref(),
            )
        }
        Command::Simulate(args) => {
            let mut doc = args.params.load()?;
            if let Some(v) = args.reps {
                doc.sim.replications = v;
            }
            if let Some(v) = args.horizon {
                doc.sim.horizon = v;
            }
            if let Some(v) = args.seed {
                doc.sim.seed = Some(v);
            }
            let res = doc.resolve()?;
            simrun::cmd_simulate(
                &res,
                args.policy,
                args.trace_dir.as_deref(),
                args.no_timestamp,
            )
        }
        Command::Compare(args) => {
            let mut doc = args.params.load()?;
            if let Some(v) = args.reps {
                doc.sim.replications = v;
            }
            if let Some(v) = args.horizon {
                doc.sim.horizon = v;
            }
            if let Some(v) = args.seed {
                doc.sim.seed = Some(v);
            }
            let res = doc.resolve()?;
            simrun::cmd_compare(&res, &args.policies, args.out.as_deref())
        }
        Command::DumpConfig(args) => {
            let res = args.params.load()?.resolve()?;
            println!("{}", serde_json::to_string_pretty(&res.doc)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
