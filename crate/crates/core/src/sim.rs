//! Discrete-time replay of slicing decisions.
//!
//! A static run replays one solution: every admitted task emits jobs at
//! its rate, each job's latency is the model value plus optional Gaussian
//! noise truncated so samples stay non-negative. A dynamic run re-solves
//! the instance at every period boundary after applying that period's
//! job-rate overrides; running tasks get no incumbency advantage, so a
//! re-solve may evict a previously admitted task.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::candidates::SolveError;
use crate::exact::OracleLimits;
use crate::model::{verify_feasible, Allocation, ProblemInstance, SlicingSolution, TaskId, Violation};
use crate::solvers::solve_by_name;

/// Per-period job-rate updates. Overrides accumulate: a task keeps its
/// most recent rate until a later period overrides it again.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodOverride {
    #[serde(default)]
    pub fps_overrides: BTreeMap<TaskId, f64>,
}

/// A dynamic scenario: fixed-length periods, per-period overrides, and
/// the solver re-run at each boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTimeline {
    pub period_length: f64,
    pub solver: String,
    pub periods: Vec<PeriodOverride>,
}

/// One sampled job latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub time: f64,
    pub task: TaskId,
    pub period: usize,
    pub latency: f64,
    pub threshold: f64,
}

/// Violation counting for one task across the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub samples: usize,
    pub violations: usize,
}

impl TaskStats {
    pub fn violation_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.violations as f64 / self.samples as f64
        }
    }
}

/// Allocations and constraint findings for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub index: usize,
    pub start: f64,
    pub allocations: BTreeMap<TaskId, Allocation>,
    /// Constraint check of the period's solution; non-empty only for
    /// solvers that admit tasks violating a threshold.
    pub constraint_flags: Vec<Violation>,
}

/// A previously admitted task dropped by a later re-solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionEvent {
    pub period: usize,
    pub task: TaskId,
}

/// Complete simulation output. Deterministic for fixed inputs and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub periods: Vec<PeriodRecord>,
    pub samples: Vec<LatencySample>,
    pub stats: BTreeMap<TaskId, TaskStats>,
    pub evictions: Vec<EvictionEvent>,
    pub thresholds: BTreeMap<TaskId, f64>,
}

/// Errors from simulation runs.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("noise sigma must be non-negative, got {0}")]
    BadSigma(f64),
    #[error("period {period} overrides unknown task {task}")]
    UnknownTask { period: usize, task: TaskId },
    #[error("timeline must define at least one period")]
    EmptyTimeline,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("report export failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Replays one fixed solution for `duration` seconds.
pub fn run_static(
    inst: &ProblemInstance,
    sol: &SlicingSolution,
    duration: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SimReport, SimError> {
    if !(duration > 0.0) {
        return Err(SimError::BadDuration(duration));
    }
    check_sigma(noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimReport {
        periods: Vec::new(),
        samples: Vec::new(),
        stats: BTreeMap::new(),
        evictions: Vec::new(),
        thresholds: thresholds_of(inst),
    };
    let fps: BTreeMap<TaskId, f64> = inst.tasks.iter().map(|t| (t.id, t.fps)).collect();
    record_period(inst, sol, &fps, 0, 0.0, duration, noise_sigma, &mut rng, &mut report);
    Ok(report)
}

/// Re-solves and replays each period of a timeline.
pub fn run_dynamic(
    inst: &ProblemInstance,
    timeline: &ScenarioTimeline,
    noise_sigma: f64,
    seed: u64,
) -> Result<SimReport, SimError> {
    if !(timeline.period_length > 0.0) {
        return Err(SimError::BadDuration(timeline.period_length));
    }
    if timeline.periods.is_empty() {
        return Err(SimError::EmptyTimeline);
    }
    check_sigma(noise_sigma)?;
    // Resolve the solver before doing any work.
    let _: crate::solvers::Algo = timeline.solver.parse()?;

    let known: BTreeSet<TaskId> = inst.tasks.iter().map(|t| t.id).collect();
    for (index, p) in timeline.periods.iter().enumerate() {
        if let Some(task) = p.fps_overrides.keys().find(|t| !known.contains(t)) {
            return Err(SimError::UnknownTask { period: index, task: *task });
        }
    }

    let cfg = BaselineConfig::default();
    let limits = OracleLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimReport {
        periods: Vec::new(),
        samples: Vec::new(),
        stats: BTreeMap::new(),
        evictions: Vec::new(),
        thresholds: thresholds_of(inst),
    };

    let mut fps: BTreeMap<TaskId, f64> = inst.tasks.iter().map(|t| (t.id, t.fps)).collect();
    let mut previous_admitted: Option<BTreeSet<TaskId>> = None;

    for (index, period) in timeline.periods.iter().enumerate() {
        for (task, rate) in &period.fps_overrides {
            fps.insert(*task, *rate);
        }
        let mut effective = inst.clone();
        for task in &mut effective.tasks {
            task.fps = fps[&task.id];
        }
        let sol = solve_by_name(&timeline.solver, &effective, &cfg, &limits)?;

        let admitted: BTreeSet<TaskId> = sol.admitted_ids().into_iter().collect();
        if let Some(prev) = &previous_admitted {
            for task in prev.difference(&admitted) {
                report.evictions.push(EvictionEvent { period: index, task: *task });
            }
        }
        previous_admitted = Some(admitted);

        let start = index as f64 * timeline.period_length;
        record_period(
            &effective,
            &sol,
            &fps,
            index,
            start,
            timeline.period_length,
            noise_sigma,
            &mut rng,
            &mut report,
        );
    }
    Ok(report)
}

fn check_sigma(noise_sigma: f64) -> Result<(), SimError> {
    if noise_sigma < 0.0 || !noise_sigma.is_finite() {
        return Err(SimError::BadSigma(noise_sigma));
    }
    Ok(())
}

fn thresholds_of(inst: &ProblemInstance) -> BTreeMap<TaskId, f64> {
    inst.tasks
        .iter()
        .filter_map(|t| inst.class(t.id.class).map(|c| (t.id, c.latency_threshold)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn record_period(
    inst: &ProblemInstance,
    sol: &SlicingSolution,
    fps: &BTreeMap<TaskId, f64>,
    index: usize,
    start: f64,
    length: f64,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
    report: &mut SimReport,
) {
    report.periods.push(PeriodRecord {
        index,
        start,
        allocations: sol.allocations.clone(),
        constraint_flags: verify_feasible(inst, sol),
    });
    let normal = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).unwrap());

    for (id, alloc) in sol.allocations.iter() {
        if !alloc.admitted {
            continue;
        }
        let Some(task) = inst.tasks.iter().find(|t| t.id == *id) else { continue };
        let Some(cls) = inst.class(id.class) else { continue };
        let Some(model) = inst.profiles.latency(&cls.latency_id) else { continue };
        let rate = fps.get(id).copied().unwrap_or(task.fps);
        let base = model.eval(alloc.compression, &alloc.slice, rate, task.base_bitrate);
        let threshold = cls.latency_threshold;

        let mut k = 0u64;
        loop {
            let offset = k as f64 / rate;
            if offset >= length {
                break;
            }
            let eps = match &normal {
                Some(n) => n.sample(rng).max(-base),
                None => 0.0,
            };
            let latency = base + eps;
            let stats = report.stats.entry(*id).or_default();
            stats.samples += 1;
            if latency > threshold {
                stats.violations += 1;
            }
            report.samples.push(LatencySample {
                time: start + offset,
                task: *id,
                period: index,
                latency,
                threshold,
            });
            k += 1;
        }
    }
}

/// Writes a report as CSV with one row per job sample plus one row per
/// unadmitted task and period, in period-major, task-major, time order.
/// Columns: `timestamp,task_id,latency,threshold,admitted,rbg,gpu_equivalents,z`.
pub fn export_report(report: &SimReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "timestamp,task_id,latency,threshold,admitted,rbg,gpu_equivalents,z")?;
    let mut by_key: BTreeMap<(usize, TaskId), Vec<&LatencySample>> = BTreeMap::new();
    for s in &report.samples {
        by_key.entry((s.period, s.task)).or_default().push(s);
    }
    for period in &report.periods {
        for (id, alloc) in &period.allocations {
            let rbg = alloc.slice.first().copied().unwrap_or(0);
            let gpu_equivalents: u32 = alloc.slice.iter().skip(1).sum();
            if alloc.admitted {
                for s in by_key.get(&(period.index, *id)).map(Vec::as_slice).unwrap_or(&[]) {
                    writeln!(
                        out,
                        "{},{},{},{},true,{},{},{}",
                        s.time, id, s.latency, s.threshold, rbg, gpu_equivalents, alloc.compression
                    )?;
                }
            } else {
                let threshold = report.thresholds.get(id).copied().unwrap_or(f64::NAN);
                writeln!(
                    out,
                    "{},{},,{},false,0,0,{}",
                    period.start, id, threshold, alloc.compression
                )?;
            }
        }
    }
    Ok(())
}

/// [`export_report`] into a string.
pub fn report_csv(report: &SimReport) -> String {
    let mut buf = Vec::new();
    export_report(report, &mut buf).expect("writing to a vec cannot fail");
    String::from_utf8(buf).expect("csv is utf-8")
}
