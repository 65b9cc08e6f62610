//! Trust dynamics: realized-loss evaluation, finite-difference trust
//! gradients, the per-event update loop, stability detection, and the
//! mean-matching reference trust.
//!
//! Each event runs a four-step cycle: fuse the source forecasts under the
//! current trust, sample an empirical scenario set, solve the robust
//! allocation model, then observe the true demand and charge the realized
//! loss. The loss differences from perturbed trust entries drive the next
//! trust step. All perturbed solves inside one event reuse the event's
//! sampling seed (common random numbers), so the finite differences reflect
//! trust changes rather than sampling noise.

use thiserror::Error;

use crate::fusion::{fuse_marginals, sample_empirical, FusionError, RngSeed};
use crate::models::{solve_dro, ModelError, SupportPolyhedron};
use crate::types::{
    AllocationSolution, ProblemConfig, SourceForecast, TrustMatrix, TRUST_MAX, TRUST_MIN,
};

/// Per-event cap on each trust entry's motion. Losses are dollar-scale while
/// trust lives on the unit simplex, so the raw product of step size and loss
/// gradient saturates the interval; the cap keeps adaptation gradual the way
/// the per-event trial-and-error scheme intends.
pub const MAX_TRUST_STEP: f64 = 0.018;

/// Default sliding-window length for stability detection.
pub const STABILITY_WINDOW: usize = 10;
/// Default spread tolerance: a trust entry is stable once its last
/// [`STABILITY_WINDOW`] snapshots span at most this much.
pub const STABILITY_SPREAD_TOL: f64 = 0.12;

#[derive(Debug, Error)]
pub enum TrustError {
    #[error("event {event}: {source}")]
    Event {
        event: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("reference trust undefined in region {region}: both sources share relative error {value}")]
    DegenerateIdeal { region: usize, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// One demand event: the realization, the per-source forecasts issued for
/// it, and the seed that drives all scenario sampling within the event.
#[derive(Clone, Debug)]
pub struct EventInstance {
    pub true_demand: Vec<f64>,
    pub forecasts: Vec<SourceForecast>,
    pub seed: RngSeed,
}

/// Solve counts and solver wall time accumulated inside one event.
#[derive(Clone, Copy, Debug, Default)]
pub struct EventStats {
    pub solves: usize,
    pub solve_time: f64,
}

/// The trust path of one update run: trust snapshots before and after every
/// event, plus per-event realized losses and solve statistics.
#[derive(Clone, Debug)]
pub struct TrustTrajectory {
    /// `num_events + 1` snapshots; index 0 is the initial trust.
    pub snapshots: Vec<TrustMatrix>,
    /// Realized loss per event, in money.
    pub losses: Vec<f64>,
    pub stats: Vec<EventStats>,
}

impl TrustTrajectory {
    pub fn num_events(&self) -> usize {
        self.losses.len()
    }

    /// The trust entry `(source, region)` across all snapshots.
    pub fn entry_series(&self, source: usize, region: usize) -> Vec<f64> {
        self.snapshots
            .iter()
            .map(|t| t.get(source, region))
            .collect()
    }
}

/// Stability verdict per `(source, region)`: the min/max band of the last
/// window when its spread is small enough, absent otherwise.
#[derive(Clone, Debug)]
pub struct StableIntervals {
    num_sources: usize,
    num_regions: usize,
    intervals: Vec<Option<(f64, f64)>>,
}

impl StableIntervals {
    pub fn get(&self, source: usize, region: usize) -> Option<(f64, f64)> {
        self.intervals[source * self.num_regions + region]
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    pub fn all_present(&self) -> bool {
        self.intervals.iter().all(|i| i.is_some())
    }

    pub fn any_present(&self) -> bool {
        self.intervals.iter().any(|i| i.is_some())
    }
}

/// Unmet-plus-over-service cost of an allocation against realized demand.
pub fn realized_loss(allocation: &[f64], xi_true: &[f64], cfg: &ProblemConfig) -> f64 {
    debug_assert_eq!(allocation.len(), cfg.num_regions);
    debug_assert_eq!(xi_true.len(), cfg.num_regions);
    let mut total = 0.0;
    for k in 0..cfg.num_regions {
        let shortfall = (xi_true[k] - allocation[k]).max(0.0);
        let excess = (allocation[k] - xi_true[k]).max(0.0);
        total += cfg.cost_unmet[k] * shortfall + cfg.cost_over[k] * excess;
    }
    total
}

/// Moves entry `(source, region)` by `delta` (clamped into the trust band)
/// and rescales the other sources in that column proportionally so the
/// column still sums to one.
fn perturb_trust(trust: &TrustMatrix, source: usize, region: usize, delta: f64) -> TrustMatrix {
    let mut out = trust.clone();
    let current = trust.get(source, region);
    let target = (current + delta).clamp(TRUST_MIN, TRUST_MAX);
    let mut col = trust.column(region);
    let other_sum = 1.0 - current;
    if other_sum > 1e-12 {
        let factor = (1.0 - target) / other_sum;
        for (h, v) in col.iter_mut().enumerate() {
            if h != source {
                *v *= factor;
            }
        }
    } else {
        // Degenerate full-trust column: spread the released mass evenly.
        let others = col.len().saturating_sub(1);
        if others == 0 {
            return out;
        }
        let share = (1.0 - target) / others as f64;
        for (h, v) in col.iter_mut().enumerate() {
            if h != source {
                *v = share;
            }
        }
    }
    col[source] = target;
    out.set_column(region, &col);
    out
}

/// Fuse, sample, and solve the robust model for one event under `trust`.
fn allocate_for_event(
    trust: &TrustMatrix,
    event: &EventInstance,
    cfg: &ProblemConfig,
) -> Result<AllocationSolution, TrustError> {
    let fused = fuse_marginals(&event.forecasts, trust)?;
    let scenarios = sample_empirical(&fused, cfg.num_samples, &cfg.support_upper, event.seed);
    let support = SupportPolyhedron::from_box(&cfg.support_upper);
    let sol = solve_dro(&scenarios, cfg, &support)?;
    if sol.status != crate::lp::Status::Optimal {
        return Err(ModelError::NotOptimal {
            kind: crate::models::ModelKind::Dro,
            status: sol.status,
        }
        .into());
    }
    Ok(sol)
}

fn probe_loss(
    trust: &TrustMatrix,
    event: &EventInstance,
    cfg: &ProblemConfig,
) -> Result<(f64, f64), TrustError> {
    let sol = allocate_for_event(trust, event, cfg)?;
    Ok((
        realized_loss(&sol.allocation, &event.true_demand, cfg),
        sol.solve_time,
    ))
}

/// Central-difference estimate of the realized-loss sensitivity to trust
/// entry `(source, region)`. Both probes resample with the event seed, so
/// the difference isolates the trust change. Divides by the spread the
/// clamps actually achieved (`2 * delta` away from the band edges).
pub fn estimate_trust_gradient(
    event: &EventInstance,
    trust: &TrustMatrix,
    cfg: &ProblemConfig,
    source: usize,
    region: usize,
    delta: f64,
) -> Result<f64, TrustError> {
    if delta <= 0.0 {
        return Err(TrustError::Invalid(format!(
            "gradient step must be positive, got {delta}"
        )));
    }
    let up = perturb_trust(trust, source, region, delta);
    let dn = perturb_trust(trust, source, region, -delta);
    let spread = up.get(source, region) - dn.get(source, region);
    if spread <= 1e-15 {
        return Ok(0.0);
    }
    let (loss_up, _) = probe_loss(&up, event, cfg)?;
    let (loss_dn, _) = probe_loss(&dn, event, cfg)?;
    Ok((loss_up - loss_dn) / spread)
}

/// Applies one trust step: each entry moves against its gradient by
/// `step_size * gradient`, capped at [`MAX_TRUST_STEP`] per event, then the
/// matrix is clamped into the trust band and each column renormalized to
/// sum one.
///
/// `gradients` is row-major `num_sources x num_regions`.
pub fn update_trust(trust: &TrustMatrix, gradients: &[f64], step_size: f64) -> TrustMatrix {
    let h = trust.num_sources();
    let k = trust.num_regions();
    assert_eq!(gradients.len(), h * k, "gradient grid shape");
    let mut out = trust.clone();
    for source in 0..h {
        for region in 0..k {
            let raw = step_size * gradients[source * k + region];
            let step = raw.clamp(-MAX_TRUST_STEP, MAX_TRUST_STEP);
            let v = (trust.get(source, region) - step).clamp(TRUST_MIN, TRUST_MAX);
            out.set(source, region, v);
        }
    }
    for region in 0..k {
        let mut col = out.column(region);
        normalize_bounded(&mut col);
        out.set_column(region, &col);
    }
    out
}

/// Divides a column by its sum; if that pushes entries outside the trust
/// band (possible for three or more sources), redistributes the violation
/// within the band. Single-source columns are pinned at one.
fn normalize_bounded(col: &mut [f64]) {
    let h = col.len();
    if h == 1 {
        col[0] = 1.0;
        return;
    }
    let sum: f64 = col.iter().sum();
    if sum > 0.0 {
        for v in col.iter_mut() {
            *v /= sum;
        }
    }
    if col.iter().all(|v| (TRUST_MIN..=TRUST_MAX).contains(v)) {
        return;
    }
    for v in col.iter_mut() {
        *v = v.clamp(TRUST_MIN, TRUST_MAX);
    }
    for _ in 0..h {
        let sum: f64 = col.iter().sum();
        if (sum - 1.0).abs() <= 1e-12 {
            return;
        }
        if sum > 1.0 {
            let excess = sum - 1.0;
            let adjustable: f64 = col.iter().map(|v| v - TRUST_MIN).sum();
            if adjustable <= 0.0 {
                return;
            }
            let f = ((adjustable - excess) / adjustable).max(0.0);
            for v in col.iter_mut() {
                *v = TRUST_MIN + (*v - TRUST_MIN) * f;
            }
        } else {
            let deficit = 1.0 - sum;
            let adjustable: f64 = col.iter().map(|v| TRUST_MAX - *v).sum();
            if adjustable <= 0.0 {
                return;
            }
            let f = ((adjustable - deficit) / adjustable).max(0.0);
            for v in col.iter_mut() {
                *v = TRUST_MAX - (TRUST_MAX - *v) * f;
            }
        }
    }
}

/// Runs the full per-event update loop over `events`, starting from
/// `initial` trust. Records every trust snapshot, the per-event realized
/// losses, and solve statistics. Aborts with the event index on any solver
/// failure.
pub fn run_trust_update(
    events: &[EventInstance],
    initial: &TrustMatrix,
    cfg: &ProblemConfig,
    step_size: f64,
    delta: f64,
) -> Result<TrustTrajectory, TrustError> {
    let h = cfg.num_sources;
    let k = cfg.num_regions;
    if initial.num_sources() != h || initial.num_regions() != k {
        return Err(TrustError::Invalid(format!(
            "initial trust is {}x{}, config wants {h}x{k}",
            initial.num_sources(),
            initial.num_regions()
        )));
    }
    let mut snapshots = Vec::with_capacity(events.len() + 1);
    let mut losses = Vec::with_capacity(events.len());
    let mut stats = Vec::with_capacity(events.len());
    snapshots.push(initial.clone());

    let mut current = initial.clone();
    for (idx, event) in events.iter().enumerate() {
        let event_no = idx + 1;
        if event.true_demand.len() != k {
            return Err(TrustError::Invalid(format!(
                "event {event_no}: true demand has {} regions, config wants {k}",
                event.true_demand.len()
            )));
        }
        for (region, &d) in event.true_demand.iter().enumerate() {
            if d < 0.0 || d > cfg.support_upper[region] {
                return Err(TrustError::Invalid(format!(
                    "event {event_no}: true demand {d} outside support in region {region}"
                )));
            }
        }
        for forecast in &event.forecasts {
            forecast
                .validate(k)
                .map_err(|e| TrustError::Invalid(format!("event {event_no}: {e}")))?;
        }
        let wrap = |e: TrustError| match e {
            TrustError::Model(m) => TrustError::Event {
                event: event_no,
                source: m,
            },
            other => other,
        };

        let base = allocate_for_event(&current, event, cfg).map_err(wrap)?;
        let loss = realized_loss(&base.allocation, &event.true_demand, cfg);
        let mut solve_time = base.solve_time;

        let mut gradients = vec![0.0; h * k];
        for source in 0..h {
            for region in 0..k {
                let up = perturb_trust(&current, source, region, delta);
                let dn = perturb_trust(&current, source, region, -delta);
                let spread = up.get(source, region) - dn.get(source, region);
                if spread <= 1e-15 {
                    continue;
                }
                let (lu, tu) = probe_loss(&up, event, cfg).map_err(&wrap)?;
                let (ld, td) = probe_loss(&dn, event, cfg).map_err(&wrap)?;
                solve_time += tu + td;
                gradients[source * k + region] = (lu - ld) / spread;
            }
        }
        current = update_trust(&current, &gradients, step_size);
        snapshots.push(current.clone());
        losses.push(loss);
        stats.push(EventStats {
            solves: 1 + 2 * h * k,
            solve_time,
        });
    }
    Ok(TrustTrajectory {
        snapshots,
        losses,
        stats,
    })
}

/// Scans the last `window` snapshots of every trust entry: an entry is
/// stable when its min-max spread over the window is at most `spread_tol`.
pub fn detect_stable_interval(
    traj: &TrustTrajectory,
    window: usize,
    spread_tol: f64,
) -> StableIntervals {
    assert!(window >= 2, "stability window must cover at least 2 snapshots");
    let first = &traj.snapshots[0];
    let (h, k) = (first.num_sources(), first.num_regions());
    let n = traj.snapshots.len();
    let mut intervals = vec![None; h * k];
    if n >= window {
        let tail = &traj.snapshots[n - window..];
        for source in 0..h {
            for region in 0..k {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for snap in tail {
                    let v = snap.get(source, region);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi - lo <= spread_tol {
                    intervals[source * k + region] = Some((lo, hi));
                }
            }
        }
    }
    StableIntervals {
        num_sources: h,
        num_regions: k,
        intervals,
    }
}

/// For two sources with fixed relative errors, the trust that makes the
/// fused mean match the truth: `t * r1 + (1 - t) * r2 = 1` per region.
/// Returns the source-1 weights. When both errors coincide the equation is
/// degenerate; both-unbiased reports the 0.5 convention, anything else is
/// an error.
pub fn ideal_trust(relative_errors: &[Vec<f64>]) -> Result<Vec<f64>, TrustError> {
    if relative_errors.len() != 2 {
        return Err(TrustError::Invalid(format!(
            "reference trust is defined for exactly 2 sources, got {}",
            relative_errors.len()
        )));
    }
    let (r1, r2) = (&relative_errors[0], &relative_errors[1]);
    if r1.len() != r2.len() {
        return Err(TrustError::Invalid(
            "relative error rows have different lengths".into(),
        ));
    }
    let mut out = Vec::with_capacity(r1.len());
    for (region, (&a, &b)) in r1.iter().zip(r2.iter()).enumerate() {
        if (a - b).abs() < 1e-12 {
            if (a - 1.0).abs() < 1e-12 {
                out.push(0.5);
            } else {
                return Err(TrustError::DegenerateIdeal { region, value: a });
            }
        } else {
            out.push((1.0 - b) / (a - b));
        }
    }
    Ok(out)
}
