//! Monte Carlo cross-check of the analytic layer: one sampled base-station
//! field per replication, a piecewise-linear user trajectory, per-slot
//! Rayleigh fading, and the skipping policies applied exactly as a handset
//! would apply them.
//!
//! Interference is split at a cutoff radius: base stations inside it are
//! simulated individually with fresh fades, while the far field beyond
//! contributes its exact mean power deterministically. The default cutoff is
//! chosen so the *fluctuation* of the neglected far field stays below a small
//! fraction of the near-field interference scale, which leaves the rate
//! estimate biased by a second-order term only.
//!
//! Determinism: every replication derives its generator from the run seed and
//! its own index, and all draws happen in a fixed order (per-cycle speeds and
//! directions, then the field, then per-slot fades). Two runs with the same
//! seed produce bitwise-identical results, and runs with the same seed but
//! different policies share the trajectory and the field — which makes
//! per-path comparisons (e.g. "skipping never hands over more often than
//! always-connecting") exact rather than statistical.

use crate::analytic::PowBeta;
use crate::model::{MobilityModel, NetworkParams, SkippingPolicy, ValidationError};
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Simulation errors.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Validation(ValidationError),
    /// The trajectory plus guard band needs a larger sampling window than the
    /// configured cap; raise `max_half_span` or shorten the horizon.
    WindowTooSmall {
        required_half_span: f64,
        max_half_span: f64,
    },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Validation(e) => write!(f, "{e}"),
            SimError::WindowTooSmall {
                required_half_span,
                max_half_span,
            } => write!(
                f,
                "trajectory needs a window half-span of {required_half_span:.3} km, above the cap of {max_half_span:.3} km"
            ),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ValidationError> for SimError {
    fn from(e: ValidationError) -> Self {
        SimError::Validation(e)
    }
}

/// Knobs of one simulation run. `Default` gives a quick smoke-test setup;
/// accuracy-grade runs want more replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Independent replications (fields and trajectories).
    pub replications: u32,
    /// Requested slots per replication; rounded up to whole movement cycles.
    pub horizon: u64,
    /// Root seed; replication `i` uses stream `i` of this seed.
    pub seed: u64,
    /// Radius inside which interferers are simulated individually; `None`
    /// picks the fluctuation-bounded default.
    pub interference_radius: Option<f64>,
    /// Extra margin sampled around the trajectory's bounding box; `None`
    /// picks the larger of the interference radius and a nearest-cell
    /// guarantee band.
    pub guard_radius: Option<f64>,
    /// Movement-cycle length in slots: the user redraws speed and direction
    /// every cycle. `None` follows the skipping period for the periodic
    /// policy and spans the whole horizon otherwise. Setting it explicitly
    /// lets different policies share trajectories (same seed) for per-path
    /// comparisons; for the periodic policy, values other than the period
    /// leave a partial final cycle.
    pub cycle_slots: Option<u64>,
    /// Upper bound on the window half-span, limiting memory and run time.
    pub max_half_span: f64,
    /// Record a per-slot trace of replication 0.
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replications: 200,
            horizon: 1000,
            seed: 12345,
            interference_radius: None,
            guard_radius: None,
            cycle_slots: None,
            max_half_span: 50.0,
            record_trace: false,
        }
    }
}

/// Resolved geometry of a run: every `None` in the config replaced by its
/// computed default, plus the far-field constants implied by the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPlan {
    pub interference_radius: f64,
    pub guard_radius: f64,
    /// Mean power of the far field beyond the cutoff, added to every slot's
    /// interference.
    pub tail_mean: f64,
    /// Standard deviation of the neglected far-field fluctuation.
    pub tail_fluctuation_std: f64,
    /// Movement-cycle length actually used.
    pub cycle_slots: u64,
    /// Horizon rounded up to whole cycles.
    pub horizon_slots: u64,
}

impl SimPlan {
    pub fn new(
        net: &NetworkParams,
        policy: &SkippingPolicy,
        cfg: &SimConfig,
    ) -> Result<SimPlan, SimError> {
        policy.validate()?;
        if cfg.replications == 0 {
            return Err(ValidationError::Argument {
                name: "replications",
                value: 0.0,
            }
            .into());
        }
        if cfg.horizon == 0 {
            return Err(ValidationError::Argument {
                name: "horizon",
                value: 0.0,
            }
            .into());
        }
        if !(cfg.max_half_span.is_finite() && cfg.max_half_span > 0.0) {
            return Err(ValidationError::Argument {
                name: "max_half_span",
                value: cfg.max_half_span,
            }
            .into());
        }
        for (name, v) in [
            ("interference_radius", cfg.interference_radius),
            ("guard_radius", cfg.guard_radius),
        ] {
            if let Some(r) = v {
                if !(r.is_finite() && r > 0.0) {
                    return Err(ValidationError::Argument { name, value: r }.into());
                }
            }
        }

        let interference_radius = cfg
            .interference_radius
            .unwrap_or_else(|| default_interference_radius(net));
        let guard_radius = cfg
            .guard_radius
            .unwrap_or_else(|| interference_radius.max(5.0 / net.lambda.sqrt()));
        let cycle_slots = cfg.cycle_slots.unwrap_or(match *policy {
            SkippingPolicy::Periodic { s } => s,
            _ => cfg.horizon,
        });
        if cycle_slots == 0 {
            return Err(ValidationError::SkipPeriod(0).into());
        }
        let n_cycles = cfg.horizon.div_ceil(cycle_slots);
        let horizon_slots = n_cycles
            .checked_mul(cycle_slots)
            .ok_or(ValidationError::Argument {
                name: "horizon",
                value: cfg.horizon as f64,
            })?;

        let pi = core::f64::consts::PI;
        let beta = net.beta;
        let r = interference_radius;
        Ok(SimPlan {
            interference_radius,
            guard_radius,
            tail_mean: 2.0 * pi * net.lambda * r.powf(2.0 - beta) / (beta - 2.0),
            tail_fluctuation_std: (4.0 * pi * net.lambda / (2.0 * beta - 2.0)).sqrt()
                * r.powf(1.0 - beta),
            cycle_slots,
            horizon_slots,
        })
    }
}

/// Cutoff radius at which the far-field fluctuation drops to 2% (scaled up
/// under noise, which dilutes interference's influence) of the interference
/// scale at half the mean nearest-neighbor distance. Scale-free: the expected
/// number of individually simulated interferers is density-independent.
fn default_interference_radius(net: &NetworkParams) -> f64 {
    let pi = core::f64::consts::PI;
    let beta = net.beta;
    let eps = 0.02 * (1.0 + net.sigma2);
    let i_scale = 2.0 * pi * 2f64.powf(beta - 2.0) * net.lambda.powf(0.5 * beta) / (beta - 2.0);
    let fluct = (4.0 * pi * net.lambda / (2.0 * beta - 2.0)).sqrt();
    let r = (fluct / (eps * i_scale)).powf(1.0 / (beta - 1.0));
    r.max(2.0 / net.lambda.sqrt())
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub replications: u32,
}

impl MetricEstimate {
    pub fn from_samples(xs: &[f64]) -> MetricEstimate {
        let n = xs.len();
        let mean = neumaier_sum(xs.iter().copied()) / n as f64;
        let std_err = if n > 1 {
            let ss = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        MetricEstimate {
            mean,
            std_err,
            replications: n as u32,
        }
    }
}

fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let fresh = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - fresh) + x;
        } else {
            comp += (x - fresh) + sum;
        }
        sum = fresh;
    }
    sum + comp
}

/// One slot of the recorded trace (replication 0 only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub x_km: f64,
    pub y_km: f64,
    /// Index of the serving base station within this replication's field.
    pub serving_index: usize,
    pub sinr: f64,
    pub rate_nats: f64,
    /// Whether a handover was executed at this slot.
    pub ho_flag: bool,
}

/// Estimates with per-replication detail.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// Per-slot expected rate, nats.
    pub rate: MetricEstimate,
    /// Per-slot handover rate.
    pub handover: MetricEstimate,
    pub rate_per_rep: Vec<f64>,
    pub handover_per_rep: Vec<f64>,
    pub trace: Option<Vec<TraceRow>>,
    pub plan: SimPlan,
}

/// Run the simulation: `cfg.replications` independent replications, each with
/// its own field and trajectory, aggregated in replication order.
pub fn estimate(
    net: &NetworkParams,
    mobility: &MobilityModel,
    policy: &SkippingPolicy,
    cfg: &SimConfig,
) -> Result<SimOutcome, SimError> {
    let plan = SimPlan::new(net, policy, cfg)?;
    let n = cfg.replications as usize;
    let mut rate_per_rep = Vec::with_capacity(n);
    let mut handover_per_rep = Vec::with_capacity(n);
    let mut trace = None;
    for rep in 0..cfg.replications {
        let want_trace = cfg.record_trace && rep == 0;
        let out = run_replication(net, mobility, policy, &plan, cfg, rep, want_trace)?;
        rate_per_rep.push(out.rate);
        handover_per_rep.push(out.handover);
        if want_trace {
            trace = out.trace;
        }
    }
    Ok(SimOutcome {
        rate: MetricEstimate::from_samples(&rate_per_rep),
        handover: MetricEstimate::from_samples(&handover_per_rep),
        rate_per_rep,
        handover_per_rep,
        trace,
        plan,
    })
}

/// Outcome of a single replication: per-slot averages plus the optional
/// per-slot trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// Average rate over the replication's slots, nats.
    pub rate: f64,
    /// Handovers per slot over the replication.
    pub handover: f64,
    pub trace: Option<Vec<TraceRow>>,
}

/// Run replication `rep` exactly as [`estimate`] would — same field, same
/// trajectory, same fades — optionally recording its per-slot trace.
/// Replications are independent given the config, so callers may run them in
/// any order (or in parallel) and still reproduce [`estimate`]'s per-index
/// numbers bit for bit.
pub fn run_single(
    net: &NetworkParams,
    mobility: &MobilityModel,
    policy: &SkippingPolicy,
    cfg: &SimConfig,
    rep: u32,
    want_trace: bool,
) -> Result<ReplicationOutcome, SimError> {
    let plan = SimPlan::new(net, policy, cfg)?;
    run_replication(net, mobility, policy, &plan, cfg, rep, want_trace)
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

#[allow(clippy::too_many_arguments)]
fn run_replication(
    net: &NetworkParams,
    mobility: &MobilityModel,
    policy: &SkippingPolicy,
    plan: &SimPlan,
    cfg: &SimConfig,
    rep: u32,
    want_trace: bool,
) -> Result<ReplicationOutcome, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let pi = core::f64::consts::PI;
    let m_eff = plan.horizon_slots;
    let cycle = plan.cycle_slots;

    // 1. trajectory: per-cycle speed and direction, then positions
    let n_cycles = (m_eff / cycle) as usize;
    let mut steps = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        let v = mobility.speed.sample(&mut rng);
        let theta = rng.random::<f64>() * 2.0 * pi;
        let (sin_t, cos_t) = theta.sin_cos();
        steps.push((v * cos_t, v * sin_t));
    }
    let mut positions = Vec::with_capacity(m_eff as usize + 1);
    let (mut x, mut y) = (0.0f64, 0.0f64);
    positions.push((x, y));
    for t in 0..m_eff {
        let (dx, dy) = steps[(t / cycle) as usize];
        x += dx;
        y += dy;
        positions.push((x, y));
    }

    // 2. window: trajectory bounding box plus the guard band
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(px, py) in &positions {
        lo_x = lo_x.min(px);
        hi_x = hi_x.max(px);
        lo_y = lo_y.min(py);
        hi_y = hi_y.max(py);
    }
    let half = 0.5 * (hi_x - lo_x).max(hi_y - lo_y) + plan.guard_radius;
    if half > cfg.max_half_span {
        return Err(SimError::WindowTooSmall {
            required_half_span: half,
            max_half_span: cfg.max_half_span,
        });
    }
    let center = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));

    // 3. base-station field on the window
    let side = 2.0 * half;
    let mean_count = net.lambda * side * side;
    let n_bs = Poisson::new(mean_count)
        .expect("positive window area")
        .sample(&mut rng) as usize;
    let mut xs = Vec::with_capacity(n_bs);
    let mut ys = Vec::with_capacity(n_bs);
    for _ in 0..n_bs {
        xs.push(center.0 - half + side * rng.random::<f64>());
        ys.push(center.1 - half + side * rng.random::<f64>());
    }
    let field = Field::build(xs, ys, center, half);

    // 4. slot loop: per-slot fades, policy bookkeeping
    let pow = PowBeta::new(net.beta);
    let mut serving: u32 = 0;
    let mut prev_near: u32 = 0;
    let mut execute = true;
    let mut hos: u64 = 0;
    let mut rate_sum = 0.0f64;
    let mut trace = want_trace.then(|| Vec::with_capacity(m_eff as usize));

    for t in 0..=m_eff {
        let (px, py) = positions[t as usize];
        let near = field.nearest(px, py);
        let mut ho_here = false;
        match *policy {
            SkippingPolicy::Scenario0 => {
                if t == 0 {
                    serving = near;
                } else if near != serving {
                    serving = near;
                    hos += 1;
                    ho_here = true;
                }
            }
            SkippingPolicy::Periodic { s } => {
                if t % s == 0 {
                    if t == 0 {
                        serving = near;
                    } else if near != serving {
                        serving = near;
                        hos += 1;
                        ho_here = true;
                    }
                }
            }
            SkippingPolicy::Alternate => {
                // execute every other nearest-cell *change* (a skipped
                // crossing leaves the user on the old cell until the next
                // crossing, not until the next slot)
                if t == 0 {
                    serving = near;
                } else if near != prev_near {
                    if execute {
                        if near != serving {
                            serving = near;
                            hos += 1;
                            ho_here = true;
                        }
                        execute = false;
                    } else {
                        execute = true;
                    }
                }
            }
        }
        prev_near = near;
        if t == m_eff {
            break; // final slot only closes the last cycle's handover check
        }

        let mut interference = plan.tail_mean;
        let mut signal = -1.0f64;
        field.for_each_within(px, py, plan.interference_radius, |i, d_sq| {
            let power = exp1(&mut rng) / pow.pow_sq(d_sq);
            if i == serving {
                signal = power;
            } else {
                interference += power;
            }
        });
        if signal < 0.0 {
            // the serving cell drifted beyond the cutoff; it still gets a
            // fresh fade of its own
            let d_sq = field.dist_sq(serving, px, py);
            signal = exp1(&mut rng) / pow.pow_sq(d_sq);
        }
        let sinr = signal / (interference + net.sigma2);
        let rate = sinr.ln_1p();
        rate_sum += rate;
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                slot: t,
                x_km: px,
                y_km: py,
                serving_index: serving as usize,
                sinr,
                rate_nats: rate,
                ho_flag: ho_here,
            });
        }
    }

    let slots = m_eff as f64;
    Ok(ReplicationOutcome {
        rate: rate_sum / slots,
        handover: hos as f64 / slots,
        trace,
    })
}

/// Mean number of serving-cell boundaries crossed while traversing a straight
/// segment of the given length, averaged over freshly sampled fields. The
/// segment is discretized into 4096 sub-steps; whenever the nearest station
/// changes across a sub-step, bisection refinement separates crossings that
/// landed in the same sub-step, so clustered boundaries are counted
/// individually rather than collapsed into one.
///
/// This is the continuous-motion counterpart of the per-slot handover count:
/// it measures the tessellation's boundary intensity along a line, free of
/// slot-granularity effects.
pub fn crossing_count_oracle(
    lambda: f64,
    segment_length: f64,
    seed: u64,
    reps: u32,
) -> Result<MetricEstimate, SimError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(ValidationError::Lambda(lambda).into());
    }
    if !(segment_length.is_finite() && segment_length >= 0.0) {
        return Err(ValidationError::Argument {
            name: "segment_length",
            value: segment_length,
        }
        .into());
    }
    if reps == 0 {
        return Err(ValidationError::Argument {
            name: "reps",
            value: 0.0,
        }
        .into());
    }
    const SUBSTEPS: u32 = 4096;
    const REFINE_DEPTH: u32 = 10;
    let guard = 5.0 / lambda.sqrt();
    let half = 0.5 * segment_length + guard;
    let center = (0.5 * segment_length, 0.0);
    let side = 2.0 * half;
    let mut counts = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let n_bs = Poisson::new(lambda * side * side)
            .expect("positive window area")
            .sample(&mut rng) as usize;
        let mut xs = Vec::with_capacity(n_bs);
        let mut ys = Vec::with_capacity(n_bs);
        for _ in 0..n_bs {
            xs.push(center.0 - half + side * rng.random::<f64>());
            ys.push(center.1 - half + side * rng.random::<f64>());
        }
        let field = Field::build(xs, ys, center, half);
        let mut crossings = 0u64;
        let mut prev_x = 0.0f64;
        let mut prev = field.nearest(prev_x, 0.0);
        for k in 1..=SUBSTEPS {
            let x = segment_length * k as f64 / SUBSTEPS as f64;
            let cur = field.nearest(x, 0.0);
            if cur != prev {
                crossings += refine_crossings(&field, prev_x, x, prev, cur, REFINE_DEPTH);
            }
            prev = cur;
            prev_x = x;
        }
        counts.push(crossings as f64);
    }
    Ok(MetricEstimate::from_samples(&counts))
}

/// Crossings between two x-positions on the segment whose nearest stations
/// differ: split at the midpoint until each piece shows a single change (or
/// the depth budget runs out), so two boundaries inside one sub-step count as
/// two. A half whose midpoint agrees with its endpoint is taken as settled —
/// an even number of crossings hiding below the resolution stays invisible,
/// which is second-order at sub-step scale.
fn refine_crossings(field: &Field, ax: f64, bx: f64, na: u32, nb: u32, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let mx = 0.5 * (ax + bx);
    let nm = field.nearest(mx, 0.0);
    if nm == na {
        refine_crossings(field, mx, bx, nm, nb, depth - 1)
    } else if nm == nb {
        refine_crossings(field, ax, mx, na, nm, depth - 1)
    } else {
        refine_crossings(field, ax, mx, na, nm, depth - 1)
            + refine_crossings(field, mx, bx, nm, nb, depth - 1)
    }
}

/// Base stations with a uniform-grid spatial index (one station per cell on
/// average).
struct Field {
    xs: Vec<f64>,
    ys: Vec<f64>,
    origin: (f64, f64),
    cell: f64,
    nx: usize,
    ny: usize,
    /// CSR layout: `order[cell_start[c]..cell_start[c + 1]]` lists the
    /// stations of cell `c` in index order.
    cell_start: Vec<u32>,
    order: Vec<u32>,
}

impl Field {
    fn build(xs: Vec<f64>, ys: Vec<f64>, center: (f64, f64), half: f64) -> Field {
        let n = xs.len();
        let side = 2.0 * half;
        // target one station per cell; clamp for tiny fields
        let cells_per_side = ((n as f64).sqrt().ceil() as usize).max(1);
        let cell = side / cells_per_side as f64;
        let origin = (center.0 - half, center.1 - half);
        let (nx, ny) = (cells_per_side, cells_per_side);

        let cell_index = |x: f64, y: f64| -> usize {
            let ix = (((x - origin.0) / cell) as usize).min(nx - 1);
            let iy = (((y - origin.1) / cell) as usize).min(ny - 1);
            iy * nx + ix
        };
        let mut counts = alloc::vec![0u32; nx * ny + 1];
        for i in 0..n {
            counts[cell_index(xs[i], ys[i]) + 1] += 1;
        }
        for c in 0..nx * ny {
            counts[c + 1] += counts[c];
        }
        let cell_start = counts.clone();
        let mut cursor = counts;
        let mut order = alloc::vec![0u32; n];
        for i in 0..n {
            let c = cell_index(xs[i], ys[i]);
            order[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        Field {
            xs,
            ys,
            origin,
            cell,
            nx,
            ny,
            cell_start,
            order,
        }
    }

    #[inline]
    fn dist_sq(&self, i: u32, px: f64, py: f64) -> f64 {
        let dx = self.xs[i as usize] - px;
        let dy = self.ys[i as usize] - py;
        dx * dx + dy * dy
    }

    fn scan_cell(&self, ix: usize, iy: usize, px: f64, py: f64, best: &mut (u32, f64)) {
        let c = iy * self.nx + ix;
        for &i in &self.order[self.cell_start[c] as usize..self.cell_start[c + 1] as usize] {
            let d = self.dist_sq(i, px, py);
            if d < best.1 {
                *best = (i, d);
            }
        }
    }

    /// Nearest station to `(px, py)` by expanding-ring search.
    fn nearest(&self, px: f64, py: f64) -> u32 {
        let cx = (((px - self.origin.0) / self.cell) as isize).clamp(0, self.nx as isize - 1);
        let cy = (((py - self.origin.1) / self.cell) as isize).clamp(0, self.ny as isize - 1);
        let mut best: (u32, f64) = (u32::MAX, f64::INFINITY);
        let max_ring = self.nx.max(self.ny) as isize;
        for ring in 0..=max_ring {
            if best.0 != u32::MAX {
                // any station in this ring is at least (ring - 1) cells away
                let lower = (ring - 1) as f64 * self.cell;
                if lower > 0.0 && lower * lower >= best.1 {
                    break;
                }
            }
            if ring == 0 {
                self.scan_cell(cx as usize, cy as usize, px, py, &mut best);
                continue;
            }
            let (x0, x1) = (cx - ring, cx + ring);
            let (y0, y1) = (cy - ring, cy + ring);
            // top and bottom rows of the ring frame
            for ix in x0.max(0)..=x1.min(self.nx as isize - 1) {
                for iy in [y0, y1] {
                    if iy >= 0 && iy < self.ny as isize {
                        self.scan_cell(ix as usize, iy as usize, px, py, &mut best);
                    }
                }
            }
            // left and right columns, corners already covered
            for iy in (y0 + 1).max(0)..=(y1 - 1).min(self.ny as isize - 1) {
                for ix in [x0, x1] {
                    if ix >= 0 && ix < self.nx as isize {
                        self.scan_cell(ix as usize, iy as usize, px, py, &mut best);
                    }
                }
            }
        }
        debug_assert!(best.0 != u32::MAX, "empty base-station field");
        if best.0 == u32::MAX {
            // probability e^{-100} under the guard band; deterministic abort
            // beats silently wrong physics
            panic!("base-station field unexpectedly empty inside the guarded window");
        }
        best.0
    }

    /// Visit every station within `radius` of `(px, py)` in a fixed
    /// (cell-major, then index) order.
    fn for_each_within<F: FnMut(u32, f64)>(&self, px: f64, py: f64, radius: f64, mut f: F) {
        let r_sq = radius * radius;
        let x0 = (((px - radius - self.origin.0) / self.cell) as isize).clamp(0, self.nx as isize - 1);
        let x1 = (((px + radius - self.origin.0) / self.cell) as isize).clamp(0, self.nx as isize - 1);
        let y0 = (((py - radius - self.origin.1) / self.cell) as isize).clamp(0, self.ny as isize - 1);
        let y1 = (((py + radius - self.origin.1) / self.cell) as isize).clamp(0, self.ny as isize - 1);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let c = iy as usize * self.nx + ix as usize;
                for &i in &self.order[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
                {
                    let d = self.dist_sq(i, px, py);
                    if d <= r_sq {
                        f(i, d);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SpeedDistribution, UtilityParams};

    fn net(lambda: f64, beta: f64, sigma2: f64) -> NetworkParams {
        NetworkParams::new(lambda, beta, sigma2).unwrap()
    }

    fn mob(v: f64) -> MobilityModel {
        MobilityModel::new(SpeedDistribution::Constant(v)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Brute-force nearest for cross-checking the grid index.
    fn brute_nearest(field: &Field, px: f64, py: f64) -> u32 {
        (0..field.xs.len() as u32)
            .min_by(|&a, &b| {
                field
                    .dist_sq(a, px, py)
                    .partial_cmp(&field.dist_sq(b, px, py))
                    .unwrap()
            })
            .unwrap()
    }

    /// Continuous crossing count along the trajectory: nearest-cell changes
    /// detected on a dense subdivision of every slot's segment.
    fn crossing_count_dense(field: &Field, positions: &[(f64, f64)], substeps: u32) -> u64 {
        let mut count = 0;
        let mut prev = field.nearest(positions[0].0, positions[0].1);
        for w in positions.windows(2) {
            let (ax, ay) = w[0];
            let (bx, by) = w[1];
            for k in 1..=substeps {
                let f = k as f64 / substeps as f64;
                let cur = field.nearest(ax + f * (bx - ax), ay + f * (by - ay));
                if cur != prev {
                    count += 1;
                    prev = cur;
                }
            }
        }
        count
    }

    #[test]
    fn plan_defaults_are_scale_free_in_bs_count() {
        let cfg = SimConfig::default();
        let p1 = SimPlan::new(&net(1.0, 3.0, 0.0), &SkippingPolicy::Scenario0, &cfg).unwrap();
        let p10 = SimPlan::new(&net(10.0, 3.0, 0.0), &SkippingPolicy::Scenario0, &cfg).unwrap();
        // λ·R² is density-independent for the default cutoff
        let n1 = 1.0 * p1.interference_radius * p1.interference_radius;
        let n10 = 10.0 * p10.interference_radius * p10.interference_radius;
        assert!(rel(n1, n10) < 1e-9);
        assert!(p1.guard_radius >= p1.interference_radius);
        assert!(p1.guard_radius >= 5.0);
    }

    #[test]
    fn plan_aligns_horizon_to_whole_cycles() {
        let cfg = SimConfig {
            horizon: 1000,
            ..SimConfig::default()
        };
        let p = SimPlan::new(
            &net(1.0, 3.0, 0.0),
            &SkippingPolicy::Periodic { s: 7 },
            &cfg,
        )
        .unwrap();
        assert_eq!(p.cycle_slots, 7);
        assert_eq!(p.horizon_slots, 7 * 143); // 1001: first multiple of 7 ≥ 1000
        let p0 = SimPlan::new(&net(1.0, 3.0, 0.0), &SkippingPolicy::Scenario0, &cfg).unwrap();
        assert_eq!(p0.cycle_slots, 1000);
        assert_eq!(p0.horizon_slots, 1000);
    }

    #[test]
    fn plan_rejects_bad_config() {
        let n = net(1.0, 3.0, 0.0);
        let bad = SimConfig {
            replications: 0,
            ..SimConfig::default()
        };
        assert!(SimPlan::new(&n, &SkippingPolicy::Scenario0, &bad).is_err());
        let bad = SimConfig {
            interference_radius: Some(-1.0),
            ..SimConfig::default()
        };
        assert!(SimPlan::new(&n, &SkippingPolicy::Scenario0, &bad).is_err());
        assert!(SimPlan::new(&n, &SkippingPolicy::Periodic { s: 0 }, &bad).is_err());
    }

    #[test]
    fn field_index_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 1 + (rng.random::<u32>() % 300) as usize;
            let half = 4.0;
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for _ in 0..n {
                xs.push(-half + 2.0 * half * rng.random::<f64>());
                ys.push(-half + 2.0 * half * rng.random::<f64>());
            }
            let field = Field::build(xs, ys, (0.0, 0.0), half);
            for _ in 0..50 {
                let px = -half + 2.0 * half * rng.random::<f64>();
                let py = -half + 2.0 * half * rng.random::<f64>();
                let a = field.nearest(px, py);
                let b = brute_nearest(&field, px, py);
                assert!(
                    (field.dist_sq(a, px, py) - field.dist_sq(b, px, py)).abs() < 1e-12,
                    "grid {a} vs brute {b}"
                );
                // radius query finds exactly the brute-force subset
                let r = 1.5;
                let mut got = Vec::new();
                field.for_each_within(px, py, r, |i, _| got.push(i));
                let want: Vec<u32> = (0..field.xs.len() as u32)
                    .filter(|&i| field.dist_sq(i, px, py) <= r * r)
                    .collect();
                let mut got_sorted = got.clone();
                got_sorted.sort_unstable();
                assert_eq!(got_sorted, want);
            }
        }
    }

    #[test]
    fn ppp_count_matches_intensity() {
        let lambda = 3.0;
        let cfg = SimConfig {
            replications: 300,
            horizon: 1,
            seed: 99,
            ..SimConfig::default()
        };
        // piggyback on full replications: count stations via the trace? —
        // simpler to sample the Poisson layer directly here
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let side = 8.0;
        let mean = lambda * side * side;
        let mut counts = Vec::new();
        for _ in 0..2000 {
            counts.push(Poisson::new(mean).unwrap().sample(&mut rng));
        }
        let est = MetricEstimate::from_samples(&counts);
        assert!(
            (est.mean - mean).abs() < 4.0 * est.std_err,
            "mean {} vs {mean}",
            est.mean
        );
        // Poisson dispersion: variance ≈ mean
        let var = est.std_err * est.std_err * counts.len() as f64;
        assert!(rel(var, mean) < 0.15, "variance {var} vs {mean}");
    }

    #[test]
    fn speed_samples_match_model_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mean = 0.02;
        for dist in [
            SpeedDistribution::Constant(mean),
            SpeedDistribution::Exponential { mean },
            SpeedDistribution::Erlang2 { mean },
            SpeedDistribution::HyperExp2 { mean },
        ] {
            let n = 40_000;
            let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let est = MetricEstimate::from_samples(&xs);
            assert!(
                (est.mean - dist.mean()).abs() <= 4.0 * est.std_err + 1e-12,
                "{dist:?}: mean {} vs {}",
                est.mean,
                dist.mean()
            );
            let var = est.std_err * est.std_err * n as f64;
            assert!(
                (var - dist.variance()).abs() <= 0.1 * dist.variance() + 1e-12,
                "{dist:?}: var {var} vs {}",
                dist.variance()
            );
        }
    }

    #[test]
    fn estimates_are_reproducible_and_seed_sensitive() {
        let n = net(1.0, 3.0, 0.0);
        let m = mob(1e-3);
        let cfg = SimConfig {
            replications: 5,
            horizon: 200,
            seed: 42,
            ..SimConfig::default()
        };
        let a = estimate(&n, &m, &SkippingPolicy::Scenario0, &cfg).unwrap();
        let b = estimate(&n, &m, &SkippingPolicy::Scenario0, &cfg).unwrap();
        assert_eq!(a.rate_per_rep, b.rate_per_rep);
        assert_eq!(a.handover_per_rep, b.handover_per_rep);
        let c = estimate(
            &n,
            &m,
            &SkippingPolicy::Scenario0,
            &SimConfig { seed: 43, ..cfg },
        )
        .unwrap();
        assert_ne!(a.rate_per_rep, c.rate_per_rep);
    }

    #[test]
    fn window_cap_trips_on_long_fast_runs() {
        let n = net(1.0, 3.0, 0.0);
        let cfg = SimConfig {
            replications: 1,
            horizon: 10_000,
            max_half_span: 8.0,
            ..SimConfig::default()
        };
        let res = estimate(&n, &mob(0.05), &SkippingPolicy::Scenario0, &cfg);
        assert!(matches!(res, Err(SimError::WindowTooSmall { .. })));
    }

    #[test]
    fn slot_handovers_track_dense_crossings() {
        // one long replication, compared path-by-path against a 64-fold
        // subdivision of the same trajectory on the same field
        let lambda = 25.0;
        let n = net(lambda, 3.0, 0.0);
        let v = 1e-3;
        let cfg = SimConfig {
            replications: 1,
            horizon: 4000,
            seed: 5,
            ..SimConfig::default()
        };
        let plan = SimPlan::new(&n, &SkippingPolicy::Scenario0, &cfg).unwrap();
        // rebuild the exact geometry of replication 0
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        let _v = SpeedDistribution::Constant(v).sample(&mut rng);
        let theta = rng.random::<f64>() * 2.0 * core::f64::consts::PI;
        let (sin_t, cos_t) = theta.sin_cos();
        let positions: Vec<(f64, f64)> = (0..=cfg.horizon)
            .map(|t| (t as f64 * v * cos_t, t as f64 * v * sin_t))
            .collect();
        let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
            (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(px, py) in &positions {
            lo_x = lo_x.min(px);
            hi_x = hi_x.max(px);
            lo_y = lo_y.min(py);
            hi_y = hi_y.max(py);
        }
        let half = 0.5 * (hi_x - lo_x).max(hi_y - lo_y) + plan.guard_radius;
        let center = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));
        let side = 2.0 * half;
        let n_bs = Poisson::new(lambda * side * side)
            .unwrap()
            .sample(&mut rng) as usize;
        let mut xs = Vec::with_capacity(n_bs);
        let mut ys = Vec::with_capacity(n_bs);
        for _ in 0..n_bs {
            xs.push(center.0 - half + side * rng.random::<f64>());
            ys.push(center.1 - half + side * rng.random::<f64>());
        }
        let field = Field::build(xs, ys, center, half);

        let mut slot_count = 0u64;
        let mut prev = field.nearest(positions[0].0, positions[0].1);
        for &(px, py) in &positions[1..] {
            let cur = field.nearest(px, py);
            if cur != prev {
                slot_count += 1;
                prev = cur;
            }
        }
        let dense = crossing_count_dense(&field, &positions, 64);
        assert!(slot_count <= dense);
        // slow motion: per-slot steps (v·√λ = 0.005) almost never cross twice
        assert!(
            (dense - slot_count) as f64 <= 0.02 * dense as f64 + 2.0,
            "slot {slot_count} vs dense {dense}"
        );
        // and the estimate layer reproduces the same count
        let sim = estimate(&n, &mob(v), &SkippingPolicy::Scenario0, &cfg).unwrap();
        assert_eq!(
            (sim.handover_per_rep[0] * cfg.horizon as f64).round() as u64,
            slot_count
        );
    }

    #[test]
    fn scenario0_handover_rate_matches_analytic() {
        let lambda = 1.0;
        let n = net(lambda, 3.0, 0.0);
        let v = 2e-3;
        let cfg = SimConfig {
            replications: 400,
            horizon: 2000,
            seed: 21,
            ..SimConfig::default()
        };
        let out = estimate(&n, &mob(v), &SkippingPolicy::Scenario0, &cfg).unwrap();
        let expected = 4.0 * lambda.sqrt() * v / core::f64::consts::PI;
        assert!(
            (out.handover.mean - expected).abs() <= 3.0 * out.handover.std_err + 0.01 * expected,
            "sim {} ± {} vs analytic {expected}",
            out.handover.mean,
            out.handover.std_err
        );
    }

    #[test]
    fn scenario0_rate_matches_analytic_baseline() {
        let n = net(1.0, 3.0, 0.0);
        let cfg = SimConfig {
            replications: 400,
            horizon: 250,
            seed: 31,
            ..SimConfig::default()
        };
        let out = estimate(&n, &mob(1e-3), &SkippingPolicy::Scenario0, &cfg).unwrap();
        let t0 = 0.8712597932203789; // zero-noise baseline rate at β = 3
        assert!(
            (out.rate.mean - t0).abs() <= 3.0 * out.rate.std_err + 0.01 * t0,
            "sim {} ± {} vs analytic {t0}",
            out.rate.mean,
            out.rate.std_err
        );
    }

    #[test]
    fn periodic_skipping_never_hands_over_more_per_path() {
        let n = net(4.0, 3.0, 0.0);
        let m = mob(2e-3);
        let s = 50;
        let cfg = SimConfig {
            replications: 40,
            horizon: 2000,
            seed: 77,
            cycle_slots: Some(s), // shared trajectories across policies
            ..SimConfig::default()
        };
        let base = estimate(&n, &m, &SkippingPolicy::Scenario0, &cfg).unwrap();
        let skip = estimate(&n, &m, &SkippingPolicy::Periodic { s }, &cfg).unwrap();
        let alt = estimate(&n, &m, &SkippingPolicy::Alternate, &cfg).unwrap();
        for i in 0..base.handover_per_rep.len() {
            assert!(
                skip.handover_per_rep[i] <= base.handover_per_rep[i] + 1e-12,
                "rep {i}: periodic exceeded always-connected"
            );
            assert!(
                alt.handover_per_rep[i] <= base.handover_per_rep[i] + 1e-12,
                "rep {i}: alternate exceeded always-connected"
            );
        }
        // skipping trades rate for fewer handovers
        assert!(skip.handover.mean < base.handover.mean);
        assert!(skip.rate.mean < base.rate.mean);
    }

    #[test]
    fn alternate_executes_about_half_the_events() {
        let n = net(4.0, 3.0, 0.0);
        let m = mob(2e-3);
        let cfg = SimConfig {
            replications: 60,
            horizon: 2000,
            seed: 13,
            cycle_slots: Some(2000),
            ..SimConfig::default()
        };
        let base = estimate(&n, &m, &SkippingPolicy::Scenario0, &cfg).unwrap();
        let alt = estimate(&n, &m, &SkippingPolicy::Alternate, &cfg).unwrap();
        let ratio = alt.handover.mean / base.handover.mean;
        assert!(
            (0.4..=0.6).contains(&ratio),
            "alternate/baseline handover ratio {ratio}"
        );
    }

    #[test]
    fn static_user_sees_no_handovers_and_stable_rate() {
        let n = net(1.0, 3.0, 0.0);
        let cfg = SimConfig {
            replications: 50,
            horizon: 100,
            seed: 3,
            ..SimConfig::default()
        };
        let out = estimate(&n, &mob(0.0), &SkippingPolicy::Scenario0, &cfg).unwrap();
        assert_eq!(out.handover.mean, 0.0);
        assert!(out.rate.mean > 0.0);
    }

    #[test]
    fn trace_is_consistent_with_counts() {
        let n = net(1.0, 3.0, 0.0);
        let cfg = SimConfig {
            replications: 3,
            horizon: 500,
            seed: 8,
            record_trace: true,
            ..SimConfig::default()
        };
        let policy = SkippingPolicy::Periodic { s: 10 };
        let out = estimate(&n, &mob(5e-3), &policy, &cfg).unwrap();
        let trace = out.trace.as_ref().unwrap();
        assert_eq!(trace.len(), 500);
        let flagged = trace.iter().filter(|r| r.ho_flag).count() as f64;
        // the final cycle-boundary check (slot 500) is outside the trace
        let counted = out.handover_per_rep[0] * 500.0;
        assert!(
            counted - flagged <= 1.0 + 1e-9 && counted >= flagged,
            "trace {flagged} vs counted {counted}"
        );
        for row in trace.iter() {
            assert!(row.rate_nats >= 0.0);
            assert!(row.sinr >= 0.0);
            assert!((row.rate_nats - row.sinr.ln_1p()).abs() < 1e-15);
        }
        // handovers only on cycle boundaries for the periodic policy
        assert!(trace
            .iter()
            .filter(|r| r.ho_flag)
            .all(|r| r.slot % 10 == 0));
    }

    #[test]
    fn single_replication_reproduces_batch_entries() {
        let n = net(2.0, 3.5, 0.0);
        let m = mob(3e-3);
        let policy = SkippingPolicy::Periodic { s: 20 };
        let cfg = SimConfig {
            replications: 6,
            horizon: 400,
            seed: 17,
            ..SimConfig::default()
        };
        let batch = estimate(&n, &m, &policy, &cfg).unwrap();
        for rep in 0..cfg.replications {
            let one = run_single(&n, &m, &policy, &cfg, rep, true).unwrap();
            assert_eq!(one.rate, batch.rate_per_rep[rep as usize]);
            assert_eq!(one.handover, batch.handover_per_rep[rep as usize]);
            let trace = one.trace.unwrap();
            assert_eq!(trace.len(), 400);
            let flagged = trace.iter().filter(|r| r.ho_flag).count() as f64;
            let counted = one.handover * 400.0;
            assert!(counted >= flagged && counted - flagged <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn crossing_oracle_matches_line_intensity() {
        // expected crossings along a unit segment: 4√λ/π
        let est = crossing_count_oracle(1.0, 1.0, 2024, 3000).unwrap();
        let expected = 4.0 / core::f64::consts::PI;
        assert!(
            (est.mean - expected).abs() <= 3.0 * est.std_err + 0.02 * expected,
            "oracle {} ± {} vs {expected}",
            est.mean,
            est.std_err
        );
    }

    #[test]
    fn crossing_oracle_scales_with_sqrt_density() {
        let lo = crossing_count_oracle(1.0, 1.0, 7, 1500).unwrap();
        let hi = crossing_count_oracle(2.0, 1.0, 7, 1500).unwrap();
        let ratio = hi.mean / lo.mean;
        assert!(
            (ratio - core::f64::consts::SQRT_2).abs() < 0.12,
            "density ratio {ratio}"
        );
    }

    #[test]
    fn crossing_oracle_degenerate_segment_counts_nothing() {
        let est = crossing_count_oracle(1.0, 0.0, 5, 50).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_err, 0.0);
        assert!(crossing_count_oracle(0.0, 1.0, 5, 50).is_err());
        assert!(crossing_count_oracle(1.0, -1.0, 5, 50).is_err());
        assert!(crossing_count_oracle(1.0, 1.0, 5, 0).is_err());
    }

    #[test]
    fn utility_per_path_combines_metrics() {
        // smoke check that per-rep vectors support downstream utility CIs
        let n = net(1.0, 3.0, 0.0);
        let cfg = SimConfig {
            replications: 30,
            horizon: 300,
            seed: 55,
            ..SimConfig::default()
        };
        let out = estimate(&n, &mob(1e-3), &SkippingPolicy::Periodic { s: 5 }, &cfg).unwrap();
        let c = UtilityParams::new(10.0).unwrap().c;
        let per_rep: Vec<f64> = out
            .rate_per_rep
            .iter()
            .zip(&out.handover_per_rep)
            .map(|(r, h)| r - c * h)
            .collect();
        let u = MetricEstimate::from_samples(&per_rep);
        assert!(u.mean.is_finite() && u.std_err.is_finite());
        assert!((u.mean - (out.rate.mean - c * out.handover.mean)).abs() < 1e-12);
    }
}
