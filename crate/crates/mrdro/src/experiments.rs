//! Experiment harness: synthetic truth and forecast generation, the
//! trust-update study, out-of-sample model comparisons, sensitivity sweeps,
//! and CSV emission for all of them.
//!
//! Every random draw flows from the configured seed list through tagged
//! sub-streams, so a full experiment reruns bit-identically (wall-clock time
//! fields aside).

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::fusion::{fuse_marginals, sample_empirical, FusionError, RngSeed};
use crate::models::{solve_dro, solve_saa, ModelError, SupportPolyhedron};
use crate::trust::{
    detect_stable_interval, realized_loss, run_trust_update, EventInstance, StableIntervals,
    TrustError, TrustTrajectory, STABILITY_SPREAD_TOL, STABILITY_WINDOW,
};
use crate::types::{ConfigError, ProblemConfig, SourceForecast, TrustMatrix};

// Sub-stream tags for seed derivation.
const TAG_TRUTH: u64 = 1;
const TAG_SCENARIOS: u64 = 2;
const TAG_OOS_TRUTH: u64 = 3;
const TAG_OOS_FUSED: u64 = 4;
const TAG_OOS_SOURCE: u64 = 5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("out-of-sample event {event}: {source}")]
    Event {
        event: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Full experiment description: the allocation problem plus source error
/// structure, event counts, trust-update parameters, and seeds.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    /// Relative forecast error per source and region; forecast mean is
    /// truth times this factor.
    pub relative_errors: Vec<Vec<f64>>,
    /// Forecast noise as a fraction of the forecast mean.
    pub sigma_ratio: f64,
    /// True demand is an integer drawn uniformly from this inclusive range.
    pub truth_lo: u32,
    pub truth_hi: u32,
    /// Trust-update events per study.
    pub num_events: usize,
    /// Out-of-sample evaluation events.
    pub oos_events: usize,
    /// Trust step size.
    pub step_size: f64,
    /// Finite-difference probe width.
    pub delta: f64,
    /// Initial trust in source 1 (two-source studies).
    pub initial_trust: f64,
    /// Operational trust used by out-of-sample evaluation.
    pub trust_star: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
}

/// The two baseline relative-error patterns; larger instances cycle them.
const BASE_ERRORS: [[f64; 3]; 2] = [[1.1, 0.6, 1.1], [0.7, 1.2, 0.3]];
/// Default operational trust for out-of-sample evaluation under the
/// baseline error patterns.
const BASE_TRUST_STAR: [[f64; 3]; 2] = [[0.58, 0.43, 0.72], [0.42, 0.57, 0.28]];

fn cycled(patterns: &[[f64; 3]], num_sources: usize, num_regions: usize) -> Vec<Vec<f64>> {
    (0..num_sources)
        .map(|h| {
            (0..num_regions)
                .map(|k| patterns[h % patterns.len()][k % 3])
                .collect()
        })
        .collect()
}

impl ExperimentConfig {
    /// The standard desk-scale setup: three regions, two sources, 200
    /// samples, radius 0.01, budget 1000, and the default error patterns.
    pub fn baseline() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig {
                num_regions: 3,
                num_sources: 2,
                cost_unmet: vec![5000.0; 3],
                cost_over: vec![1000.0; 3],
                budget: 1000.0,
                support_upper: vec![1000.0; 3],
                wasserstein_radius: 0.01,
                num_samples: 200,
            },
            relative_errors: cycled(&BASE_ERRORS, 2, 3),
            sigma_ratio: 0.02,
            truth_lo: 100,
            truth_hi: 200,
            num_events: 50,
            oos_events: 100,
            step_size: 1e-3,
            delta: 1e-3,
            initial_trust: 0.5,
            trust_star: cycled(&BASE_TRUST_STAR, 2, 3),
            seeds: vec![1, 2, 3, 4, 5],
        }
    }

    /// Resizes the setup to `num_regions`, cycling the baseline error and
    /// trust patterns across regions. The shared budget scales with the
    /// region count so the scarcity regime stays comparable across sizes.
    pub fn with_regions(&self, num_regions: usize) -> ExperimentConfig {
        let mut out = self.clone();
        let cycle = |v: &[f64]| -> Vec<f64> {
            (0..num_regions).map(|k| v[k % v.len()]).collect()
        };
        out.problem.num_regions = num_regions;
        out.problem.budget =
            self.problem.budget * num_regions as f64 / self.problem.num_regions as f64;
        out.problem.cost_unmet = cycle(&self.problem.cost_unmet);
        out.problem.cost_over = cycle(&self.problem.cost_over);
        out.problem.support_upper = cycle(&self.problem.support_upper);
        out.relative_errors = self.relative_errors.iter().map(|r| cycle(r)).collect();
        out.trust_star = self.trust_star.iter().map(|r| cycle(r)).collect();
        out
    }

    /// Resizes the setup to `num_sources`: error rows cycle the existing
    /// patterns; the operational trust falls back to uniform weights (the
    /// stored defaults only describe the two-source study).
    pub fn with_sources(&self, num_sources: usize) -> ExperimentConfig {
        let mut out = self.clone();
        let k = self.problem.num_regions;
        out.problem.num_sources = num_sources;
        out.relative_errors = (0..num_sources)
            .map(|h| self.relative_errors[h % self.relative_errors.len()].clone())
            .collect();
        if num_sources != self.problem.num_sources {
            out.trust_star = vec![vec![1.0 / num_sources as f64; k]; num_sources];
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem.validate()?;
        let h = self.problem.num_sources;
        let k = self.problem.num_regions;
        let check_grid = |grid: &Vec<Vec<f64>>, field: &'static str| -> Result<(), ConfigError> {
            if grid.len() != h || grid.iter().any(|r| r.len() != k) {
                return Err(ConfigError {
                    field,
                    message: format!("expected {h}x{k} entries"),
                });
            }
            Ok(())
        };
        check_grid(&self.relative_errors, "relative_errors")?;
        if self
            .relative_errors
            .iter()
            .flatten()
            .any(|r| !r.is_finite() || *r <= 0.0)
        {
            return Err(ConfigError {
                field: "relative_errors",
                message: "entries must be positive".into(),
            });
        }
        check_grid(&self.trust_star, "trust_star")?;
        for region in 0..k {
            let sum: f64 = (0..h).map(|s| self.trust_star[s][region]).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(ConfigError {
                    field: "trust_star",
                    message: format!("column {region} sums to {sum}, expected 1"),
                });
            }
        }
        if !self.sigma_ratio.is_finite() || self.sigma_ratio <= 0.0 {
            return Err(ConfigError {
                field: "sigma_ratio",
                message: format!("must be positive, got {}", self.sigma_ratio),
            });
        }
        if self.truth_lo > self.truth_hi {
            return Err(ConfigError {
                field: "truth_range",
                message: format!("lo {} exceeds hi {}", self.truth_lo, self.truth_hi),
            });
        }
        if f64::from(self.truth_hi) > self.problem.support_upper.iter().copied().fold(f64::INFINITY, f64::min) {
            return Err(ConfigError {
                field: "truth_range",
                message: "hi exceeds the demand support".into(),
            });
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(ConfigError {
                field: "step_size",
                message: format!("must be positive, got {}", self.step_size),
            });
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(ConfigError {
                field: "delta",
                message: format!("must be positive, got {}", self.delta),
            });
        }
        if !(0.0..=1.0).contains(&self.initial_trust) {
            return Err(ConfigError {
                field: "initial_trust",
                message: format!("must lie in [0, 1], got {}", self.initial_trust),
            });
        }
        if self.seeds.is_empty() {
            return Err(ConfigError {
                field: "seeds",
                message: "at least one seed is required".into(),
            });
        }
        Ok(())
    }

    /// Initial trust matrix: `(t0, 1 - t0)` columns for two sources,
    /// uniform otherwise.
    pub fn initial_trust_matrix(&self) -> TrustMatrix {
        let h = self.problem.num_sources;
        let k = self.problem.num_regions;
        if h == 2 {
            let mut values = vec![self.initial_trust; k];
            values.extend(std::iter::repeat_n(1.0 - self.initial_trust, k));
            TrustMatrix::new(2, k, values).expect("valid two-source initial trust")
        } else {
            TrustMatrix::uniform(h, k)
        }
    }

    /// Operational trust matrix from the configured per-source rows.
    pub fn trust_star_matrix(&self) -> Result<TrustMatrix, ConfigError> {
        let h = self.problem.num_sources;
        let k = self.problem.num_regions;
        let mut values = Vec::with_capacity(h * k);
        for row in &self.trust_star {
            values.extend_from_slice(row);
        }
        TrustMatrix::new(h, k, values)
    }
}

/// Draws the per-region true demand: independent uniform integers from the
/// configured range. The drawn vector serves as both the mean of the truth
/// and the realization.
pub fn generate_truth(lo: u32, hi: u32, num_regions: usize, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..num_regions)
        .map(|_| f64::from(rng.gen_range(lo..=hi)))
        .collect()
}

/// Forecast means are the truth scaled by each source's relative error;
/// noise scales with the mean.
pub fn make_forecasts(
    mu_true: &[f64],
    relative_errors: &[Vec<f64>],
    sigma_ratio: f64,
) -> Vec<SourceForecast> {
    relative_errors
        .iter()
        .enumerate()
        .map(|(h, row)| {
            let means: Vec<f64> = mu_true.iter().zip(row).map(|(m, r)| m * r).collect();
            let stds: Vec<f64> = means.iter().map(|m| sigma_ratio * m).collect();
            SourceForecast {
                source_id: h,
                means,
                stds,
            }
        })
        .collect()
}

/// Builds the `index`-th trust-update event for a run seeded by `run_seed`.
pub fn make_event(cfg: &ExperimentConfig, run_seed: RngSeed, index: u64) -> EventInstance {
    let truth = generate_truth(
        cfg.truth_lo,
        cfg.truth_hi,
        cfg.problem.num_regions,
        run_seed.derive(TAG_TRUTH, index),
    );
    let forecasts = make_forecasts(&truth, &cfg.relative_errors, cfg.sigma_ratio);
    EventInstance {
        true_demand: truth,
        forecasts,
        seed: run_seed.derive(TAG_SCENARIOS, index),
    }
}

/// One comparison table row: a method, its average realized loss, and the
/// solver wall time it consumed.
#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub method: String,
    pub avg_loss: f64,
    pub total_time: f64,
}

/// Per-event, per-method realized loss record.
#[derive(Clone, Debug)]
pub struct OosEventRecord {
    pub event: usize,
    pub method: String,
    pub loss: f64,
    pub time: f64,
}

#[derive(Clone, Debug)]
pub struct OosReport {
    pub rows: Vec<ComparisonRow>,
    pub events: Vec<OosEventRecord>,
}

/// Out-of-sample comparison: for each fresh event, the fused robust model
/// under `trust_star` competes with single-source robust and sample-average
/// models. Single-source DRO and SP share the same scenario draw.
pub fn run_out_of_sample(
    trust_star: &TrustMatrix,
    cfg: &ExperimentConfig,
) -> Result<OosReport, ExperimentError> {
    let h = cfg.problem.num_sources;
    let run_seed = RngSeed(cfg.seeds[0]);
    let support = SupportPolyhedron::from_box(&cfg.problem.support_upper);

    let method_count = 1 + 2 * h;
    let mut totals = vec![0.0; method_count];
    let mut times = vec![0.0; method_count];
    let mut events = Vec::with_capacity(cfg.oos_events * method_count);
    let label = |m: usize| -> String {
        if m == 0 {
            "MR-DRO".into()
        } else if m <= h {
            format!("h{}-DRO", m)
        } else {
            format!("h{}-SP", m - h)
        }
    };

    for q in 1..=cfg.oos_events {
        let truth = generate_truth(
            cfg.truth_lo,
            cfg.truth_hi,
            cfg.problem.num_regions,
            run_seed.derive(TAG_OOS_TRUTH, q as u64),
        );
        let forecasts = make_forecasts(&truth, &cfg.relative_errors, cfg.sigma_ratio);
        let wrap = |source: ModelError| ExperimentError::Event { event: q, source };

        let mut record = |m: usize, loss: f64, time: f64, events: &mut Vec<OosEventRecord>| {
            totals[m] += loss;
            times[m] += time;
            events.push(OosEventRecord {
                event: q,
                method: label(m),
                loss,
                time,
            });
        };

        // Fused model at the operational trust.
        let fused = fuse_marginals(&forecasts, trust_star)?;
        let scen = sample_empirical(
            &fused,
            cfg.problem.num_samples,
            &cfg.problem.support_upper,
            run_seed.derive(TAG_OOS_FUSED, q as u64),
        );
        let sol = solve_dro(&scen, &cfg.problem, &support).map_err(&wrap)?;
        record(
            0,
            realized_loss(&sol.allocation, &truth, &cfg.problem),
            sol.solve_time,
            &mut events,
        );

        // Single-source models; DRO and SP share the scenario set.
        for source in 0..h {
            let full = TrustMatrix::full_trust(source, h, cfg.problem.num_regions);
            let dist = fuse_marginals(&forecasts, &full)?;
            let scen = sample_empirical(
                &dist,
                cfg.problem.num_samples,
                &cfg.problem.support_upper,
                run_seed
                    .derive(TAG_OOS_SOURCE, q as u64)
                    .derive(source as u64, 0),
            );
            let dro = solve_dro(&scen, &cfg.problem, &support).map_err(&wrap)?;
            record(
                1 + source,
                realized_loss(&dro.allocation, &truth, &cfg.problem),
                dro.solve_time,
                &mut events,
            );
            let sp = solve_saa(&scen, &cfg.problem).map_err(&wrap)?;
            record(
                1 + h + source,
                realized_loss(&sp.allocation, &truth, &cfg.problem),
                sp.solve_time,
                &mut events,
            );
        }
    }

    let q = cfg.oos_events.max(1) as f64;
    let rows = (0..method_count)
        .map(|m| ComparisonRow {
            method: label(m),
            avg_loss: totals[m] / q,
            total_time: times[m],
        })
        .collect();
    Ok(OosReport { rows, events })
}

/// Trust-update study output: the trajectory, its stability verdict, and
/// the mean realized loss over the final stability window.
#[derive(Clone, Debug)]
pub struct TrustStudyReport {
    pub trajectory: TrustTrajectory,
    pub intervals: StableIntervals,
    pub mean_stable_loss: Option<f64>,
    pub wall_time: f64,
    pub solver_time: f64,
}

/// Drives the trust-update loop over generated events with the first
/// configured seed.
pub fn run_trust_study(cfg: &ExperimentConfig) -> Result<TrustStudyReport, ExperimentError> {
    run_trust_study_seeded(cfg, RngSeed(cfg.seeds[0]))
}

/// Like [`run_trust_study`] but with an explicit run seed, for multi-seed
/// averaging.
pub fn run_trust_study_seeded(
    cfg: &ExperimentConfig,
    run_seed: RngSeed,
) -> Result<TrustStudyReport, ExperimentError> {
    let events: Vec<EventInstance> = (1..=cfg.num_events)
        .map(|m| make_event(cfg, run_seed, m as u64))
        .collect();
    let initial = cfg.initial_trust_matrix();
    let started = Instant::now();
    let trajectory = run_trust_update(
        &events,
        &initial,
        &cfg.problem,
        cfg.step_size,
        cfg.delta,
    )?;
    let wall_time = started.elapsed().as_secs_f64();
    let solver_time = trajectory.stats.iter().map(|s| s.solve_time).sum();
    let intervals = detect_stable_interval(&trajectory, STABILITY_WINDOW, STABILITY_SPREAD_TOL);
    // Loss is only attributed to the fluctuating band once every entry has
    // actually settled into one.
    let tail = STABILITY_WINDOW.min(trajectory.losses.len());
    let mean_stable_loss = if tail == 0 || !intervals.all_present() {
        None
    } else {
        let losses = &trajectory.losses[trajectory.losses.len() - tail..];
        Some(losses.iter().sum::<f64>() / tail as f64)
    };
    Ok(TrustStudyReport {
        trajectory,
        intervals,
        mean_stable_loss,
        wall_time,
        solver_time,
    })
}

#[derive(Clone, Debug)]
pub struct BudgetRun {
    pub budget: f64,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Clone, Debug)]
pub struct EventCountRun {
    pub num_events: usize,
    pub intervals: StableIntervals,
    pub mean_stable_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RegionRun {
    pub num_regions: usize,
    pub wall_time: f64,
    pub solver_time: f64,
}

#[derive(Clone, Debug)]
pub struct SensitivityReport {
    pub budget_runs: Vec<BudgetRun>,
    pub event_count_runs: Vec<EventCountRun>,
    pub region_runs: Vec<RegionRun>,
}

/// Sweeps budgets (out-of-sample comparisons), event counts (stability of
/// the trust study), and region counts (wall time of a fixed-length study).
pub fn run_sensitivity(
    cfg: &ExperimentConfig,
    budgets: &[f64],
    event_counts: &[usize],
    region_counts: &[usize],
) -> Result<SensitivityReport, ExperimentError> {
    let mut budget_runs = Vec::new();
    for &budget in budgets {
        let mut c = cfg.clone();
        c.problem.budget = budget;
        let trust_star = c.trust_star_matrix()?;
        let report = run_out_of_sample(&trust_star, &c)?;
        budget_runs.push(BudgetRun {
            budget,
            rows: report.rows,
        });
    }
    let mut event_count_runs = Vec::new();
    for &m in event_counts {
        let mut c = cfg.clone();
        c.num_events = m;
        let report = run_trust_study(&c)?;
        event_count_runs.push(EventCountRun {
            num_events: m,
            intervals: report.intervals,
            mean_stable_loss: report.mean_stable_loss,
        });
    }
    let mut region_runs = Vec::new();
    for &k in region_counts {
        let c = cfg.with_regions(k);
        let report = run_trust_study(&c)?;
        region_runs.push(RegionRun {
            num_regions: k,
            wall_time: report.wall_time,
            solver_time: report.solver_time,
        });
    }
    Ok(SensitivityReport {
        budget_runs,
        event_count_runs,
        region_runs,
    })
}

// ---------------------------------------------------------------------
// CSV emission. Sources and regions are 1-based in all output files.
// ---------------------------------------------------------------------

pub fn write_event_csv<W: Write>(records: &[OosEventRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "event,method,loss,time")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.event, r.method, r.loss, r.time)?;
    }
    Ok(())
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,avg_loss,total_time")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.method, r.avg_loss, r.total_time)?;
    }
    Ok(())
}

/// Trust path in long form; the loss column is empty on the initial
/// snapshot rows.
pub fn write_trajectory_csv<W: Write>(traj: &TrustTrajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "event,source,region,trust,loss")?;
    for (m, snap) in traj.snapshots.iter().enumerate() {
        for source in 0..snap.num_sources() {
            for region in 0..snap.num_regions() {
                let loss = if m == 0 {
                    String::new()
                } else {
                    traj.losses[m - 1].to_string()
                };
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    m,
                    source + 1,
                    region + 1,
                    snap.get(source, region),
                    loss
                )?;
            }
        }
    }
    Ok(())
}

/// Study summary in the layout of the trust-update tables: one row per
/// `(source, region)` with the stability band (or N/A) and the shared loss
/// and time columns.
pub fn write_trust_summary_csv<W: Write>(
    cfg: &ExperimentConfig,
    report: &TrustStudyReport,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "num_regions,num_events,source,region,interval_lo,interval_hi,midpoint,mean_stable_loss,solver_time"
    )?;
    let loss = report
        .mean_stable_loss
        .map(|l| l.to_string())
        .unwrap_or_else(|| "N/A".into());
    for source in 0..report.intervals.num_sources() {
        for region in 0..report.intervals.num_regions() {
            let (lo, hi, mid) = match report.intervals.get(source, region) {
                Some((lo, hi)) => (lo.to_string(), hi.to_string(), ((lo + hi) / 2.0).to_string()),
                None => ("N/A".into(), "N/A".into(), "N/A".into()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                cfg.problem.num_regions,
                cfg.num_events,
                source + 1,
                region + 1,
                lo,
                hi,
                mid,
                loss,
                report.solver_time
            )?;
        }
    }
    Ok(())
}

pub fn write_sensitivity_csv<W: Write>(
    report: &SensitivityReport,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "section,key,method_or_entry,value,extra")?;
    for run in &report.budget_runs {
        for row in &run.rows {
            writeln!(
                w,
                "budget,{},{},{},{}",
                run.budget, row.method, row.avg_loss, row.total_time
            )?;
        }
    }
    for run in &report.event_count_runs {
        for source in 0..run.intervals.num_sources() {
            for region in 0..run.intervals.num_regions() {
                let cell = match run.intervals.get(source, region) {
                    Some((lo, hi)) => format!("[{lo};{hi}]"),
                    None => "N/A".into(),
                };
                writeln!(
                    w,
                    "events,{},s{}r{},{},",
                    run.num_events,
                    source + 1,
                    region + 1,
                    cell
                )?;
            }
        }
    }
    for run in &report.region_runs {
        writeln!(
            w,
            "regions,{},wall_time,{},{}",
            run.num_regions, run.wall_time, run.solver_time
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::baseline();
        cfg.problem.num_samples = 30;
        cfg.num_events = 2;
        cfg.oos_events = 2;
        cfg
    }

    #[test]
    fn baseline_validates() {
        assert!(ExperimentConfig::baseline().validate().is_ok());
    }

    #[test]
    fn truth_is_integral_in_range_and_deterministic() {
        let a = generate_truth(100, 200, 5, RngSeed(9));
        let b = generate_truth(100, 200, 5, RngSeed(9));
        assert_eq!(a, b);
        for v in &a {
            assert!((100.0..=200.0).contains(v));
            assert_eq!(v.fract(), 0.0);
        }
        let c = generate_truth(100, 200, 5, RngSeed(10));
        assert_ne!(a, c);
    }

    #[test]
    fn truth_mean_is_near_range_center() {
        let n = 10_000;
        let mut sums = vec![0.0; 3];
        for i in 0..n {
            let t = generate_truth(100, 200, 3, RngSeed(40_000 + i));
            for (s, v) in sums.iter_mut().zip(&t) {
                *s += v;
            }
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((mean - 150.0).abs() < 3.0, "mean {mean}");
        }
    }

    #[test]
    fn forecasts_scale_truth_by_relative_errors() {
        let truth = vec![150.0, 150.0, 150.0];
        let r = cycled(&BASE_ERRORS, 2, 3);
        let fs = make_forecasts(&truth, &r, 0.02);
        assert_eq!(fs[0].means, vec![165.0, 90.0, 165.0]);
        let expect_stds = [3.3, 1.8, 3.3];
        for (got, want) in fs[0].stds.iter().zip(expect_stds) {
            assert!((got - want).abs() < 1e-9);
        }
        let unbiased = make_forecasts(&truth, &vec![vec![1.0; 3]; 2], 0.02);
        assert_eq!(unbiased[0].means, truth);
        let silent = make_forecasts(&truth, &r, 0.0);
        assert!(silent[1].stds.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn oos_single_event_rows_match_event_records() {
        let mut cfg = small_cfg();
        cfg.oos_events = 1;
        let t = cfg.trust_star_matrix().unwrap();
        let report = run_out_of_sample(&t, &cfg).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.events.len(), 5);
        for row in &report.rows {
            let rec = report
                .events
                .iter()
                .find(|e| e.method == row.method)
                .unwrap();
            assert_eq!(row.avg_loss, rec.loss, "{}", row.method);
        }
    }

    #[test]
    fn reported_averages_rederive_from_event_records() {
        let mut cfg = small_cfg();
        cfg.oos_events = 3;
        let t = cfg.trust_star_matrix().unwrap();
        let report = run_out_of_sample(&t, &cfg).unwrap();
        for row in &report.rows {
            let per_event: Vec<f64> = report
                .events
                .iter()
                .filter(|e| e.method == row.method)
                .map(|e| e.loss)
                .collect();
            assert_eq!(per_event.len(), 3);
            let mean = per_event.iter().sum::<f64>() / per_event.len() as f64;
            assert!(
                (row.avg_loss - mean).abs() <= 1e-12 * (1.0 + mean.abs()),
                "{}: {} vs {}",
                row.method,
                row.avg_loss,
                mean
            );
        }
    }

    #[test]
    fn oos_with_perfect_sources_shows_no_method_gap() {
        // Perfect sources: unbiased and noise-free. Every method then
        // allocates the truth exactly and all losses vanish. (With noise
        // kept, fusion still wins systematically by shrinking variance, so
        // "no gap" requires noise-free sources.)
        let mut cfg = small_cfg();
        cfg.relative_errors = vec![vec![1.0; 3]; 2];
        cfg.sigma_ratio = 0.0;
        cfg.oos_events = 4;
        let t = cfg.trust_star_matrix().unwrap();
        let report = run_out_of_sample(&t, &cfg).unwrap();
        let losses: Vec<f64> = report.rows.iter().map(|r| r.avg_loss).collect();
        let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            hi - lo <= 0.02 * hi.max(1e-9),
            "methods should agree within 2%: {losses:?}"
        );
        assert!(hi < 1e-6, "noise-free perfect sources give zero loss");
    }

    #[test]
    fn trust_study_snapshot_counts_and_determinism() {
        let cfg = small_cfg();
        let a = run_trust_study(&cfg).unwrap();
        assert_eq!(a.trajectory.snapshots.len(), cfg.num_events + 1);
        assert_eq!(a.trajectory.losses.len(), cfg.num_events);
        let b = run_trust_study(&cfg).unwrap();
        assert_eq!(a.trajectory.snapshots, b.trajectory.snapshots);

        let mut csv_a = Vec::new();
        write_trajectory_csv(&a.trajectory, &mut csv_a).unwrap();
        let mut csv_b = Vec::new();
        write_trajectory_csv(&b.trajectory, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b, "trajectory CSV must be byte-stable");
        assert_eq!(
            csv_a.iter().filter(|b| **b == b'\n').count(),
            1 + (cfg.num_events + 1) * 2 * 3
        );
    }

    #[test]
    fn sensitivity_sweeps_cover_requested_axes() {
        let mut cfg = small_cfg();
        cfg.problem.num_samples = 20;
        cfg.num_events = 1;
        cfg.oos_events = 1;
        let report = run_sensitivity(&cfg, &[1000.0, 400.0], &[1], &[1, 2]).unwrap();
        assert_eq!(report.budget_runs.len(), 2);
        assert_eq!(report.event_count_runs.len(), 1);
        assert_eq!(report.region_runs.len(), 2);
        assert_eq!(report.region_runs[0].num_regions, 1);
        let mut out = Vec::new();
        write_sensitivity_csv(&report, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("budget,1000"));
    }

    #[test]
    fn with_regions_cycles_patterns() {
        let cfg = ExperimentConfig::baseline().with_regions(5);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.relative_errors[0], vec![1.1, 0.6, 1.1, 1.1, 0.6]);
        assert_eq!(cfg.problem.cost_unmet.len(), 5);
    }

    #[test]
    fn invalid_configs_name_the_offending_field() {
        let mut cfg = ExperimentConfig::baseline();
        cfg.sigma_ratio = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "sigma_ratio");
        let mut cfg = ExperimentConfig::baseline();
        cfg.truth_lo = 300;
        assert_eq!(cfg.validate().unwrap_err().field, "truth_range");
        let mut cfg = ExperimentConfig::baseline();
        cfg.trust_star[0][1] = 0.9;
        assert_eq!(cfg.validate().unwrap_err().field, "trust_star");
        let mut cfg = ExperimentConfig::baseline();
        cfg.seeds.clear();
        assert_eq!(cfg.validate().unwrap_err().field, "seeds");
    }

    #[test]
    fn comparison_csv_layout() {
        let rows = vec![
            ComparisonRow {
                method: "MR-DRO".into(),
                avg_loss: 155790.0,
                total_time: 18.49,
            },
            ComparisonRow {
                method: "h1-DRO".into(),
                avg_loss: 325110.0,
                total_time: 18.35,
            },
        ];
        let mut out = Vec::new();
        write_comparison_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "method,avg_loss,total_time\nMR-DRO,155790,18.49\nh1-DRO,325110,18.35\n"
        );
    }
}
