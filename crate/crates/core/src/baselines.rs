//! Comparison algorithms sharing the same model and performance functions,
//! so that measured differences are purely algorithmic:
//!
//! - min-resource with semantics: per-task minimal compression, then the
//!   latency-feasible slice with the fewest total units, admitted in
//!   ascending task-id order;
//! - edge-slicing baseline: as above, but compression is chosen against
//!   the dataset-wide fallback profile, blind to per-class semantics;
//! - flexible without semantics: the primal-gradient solver, with the
//!   fallback-profile compression;
//! - aggressive compression: a fixed strong compression factor for every
//!   task regardless of its accuracy requirement;
//! - static over-provisioning: a fixed share of every capacity per task
//!   at full quality.
//!
//! The last two may admit tasks that violate accuracy or latency
//! thresholds; they still never breach capacity.

use std::collections::BTreeMap;

use crate::candidates::{enumerate_candidates, Candidate, SolveError, DEFAULT_GRID_BUDGET};
use crate::greedy::{solve_primal_gradient, CompressionRule};
use crate::model::{
    objective_value, validate_instance, Allocation, ProblemInstance, RejectReason,
    SlicingSolution, TaskId,
};

/// Knobs for the semantics-blind and static baselines.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Compression factor forced by the aggressive-compression baseline.
    pub highcomp_z: f64,
    /// Share of each capacity statically granted per task.
    pub highres_fraction: f64,
    /// Fallback profile for classes that do not name one themselves.
    pub all_profile_id: Option<String>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { highcomp_z: 0.1, highres_fraction: 0.2, all_profile_id: None }
    }
}

/// Semantic compression, minimal-unit slices, ascending-id admission.
pub fn solve_minres_sem(inst: &ProblemInstance) -> Result<SlicingSolution, SolveError> {
    solve_sequential(inst, &PerTaskZ::Rule(CompressionRule::Semantic))
}

/// Minimal-unit slices with compression chosen against the fallback
/// profile; tasks whose threshold exceeds its maximum are rejected.
pub fn solve_sl_edge(
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
) -> Result<SlicingSolution, SolveError> {
    let rule = CompressionRule::AllProfile { default_id: cfg.all_profile_id.clone() };
    solve_sequential(inst, &PerTaskZ::Rule(rule))
}

/// Primal-gradient allocation with fallback-profile compression.
pub fn solve_flexres_nsem(
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
) -> Result<SlicingSolution, SolveError> {
    let rule = CompressionRule::AllProfile { default_id: cfg.all_profile_id.clone() };
    solve_primal_gradient(inst, &rule, None).map(|o| o.solution)
}

/// Fixed aggressive compression for every task; admitted tasks may
/// violate their accuracy threshold.
pub fn solve_highcomp(
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
) -> Result<SlicingSolution, SolveError> {
    if !(cfg.highcomp_z > 0.0 && cfg.highcomp_z <= 1.0) {
        return Err(SolveError::InvalidConfig(format!(
            "highcomp compression factor {} outside (0, 1]",
            cfg.highcomp_z
        )));
    }
    solve_sequential(inst, &PerTaskZ::Fixed(cfg.highcomp_z))
}

/// Statically grants each task `floor(fraction * S_k)` of every resource
/// at full quality, in ascending task-id order while capacity remains.
/// A task whose static slice cannot support it at all (infinite latency)
/// is unadmittable rather than rounded up.
pub fn solve_highres(
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
) -> Result<SlicingSolution, SolveError> {
    if !(cfg.highres_fraction > 0.0 && cfg.highres_fraction <= 1.0) {
        return Err(SolveError::InvalidConfig(format!(
            "static capacity share {} outside (0, 1]",
            cfg.highres_fraction
        )));
    }
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(SolveError::InvalidInstance(violations));
    }
    let pool = &inst.pool;
    let m = pool.resource_count();
    let static_slice: Vec<u32> = pool
        .capacities
        .iter()
        .map(|&cap| (cfg.highres_fraction * cap as f64).floor() as u32)
        .collect();

    let mut allocations: BTreeMap<TaskId, Allocation> = BTreeMap::new();
    let mut diagnostics: BTreeMap<TaskId, RejectReason> = BTreeMap::new();
    let mut occupied = vec![0u32; m];

    for task in inst.sorted_tasks() {
        let cls = inst
            .class(task.id.class)
            .ok_or(SolveError::UnknownClass { task: task.id, class: task.id.class })?;
        let model = inst.profiles.require_latency(&cls.latency_id)?;
        let latency = model.eval(1.0, &static_slice, task.fps, task.base_bitrate);
        if latency.is_infinite() {
            allocations.insert(task.id, Allocation::rejected(m, 1.0));
            diagnostics.insert(task.id, RejectReason::LatencyUnreachable);
            continue;
        }
        let fits = static_slice
            .iter()
            .zip(&occupied)
            .zip(&pool.capacities)
            .all(|((&s, &o), &cap)| o + s <= cap);
        if !fits {
            allocations.insert(task.id, Allocation::rejected(m, 1.0));
            diagnostics.insert(task.id, RejectReason::CapacityExhausted);
            continue;
        }
        for k in 0..m {
            occupied[k] += static_slice[k];
        }
        allocations.insert(
            task.id,
            Allocation { admitted: true, slice: static_slice.clone(), compression: 1.0 },
        );
        diagnostics.insert(task.id, RejectReason::Admitted);
    }

    let mut solution = SlicingSolution { allocations, objective: 0.0, occupied, diagnostics };
    solution.objective = objective_value(inst, &solution).expect("all tasks covered");
    Ok(solution)
}

enum PerTaskZ {
    Rule(CompressionRule),
    Fixed(f64),
}

/// Minimal-unit slice within `remaining`, ties to the lexicographically
/// smallest slice.
fn pick_min_units<'a>(cands: &'a [Candidate], remaining: &[u32]) -> Option<&'a Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in cands {
        if !c.fits(remaining) {
            continue;
        }
        match best {
            None => best = Some(c),
            Some(b) => {
                if c.units < b.units || (c.units == b.units && c.slice < b.slice) {
                    best = Some(c);
                }
            }
        }
    }
    best
}

fn solve_sequential(inst: &ProblemInstance, zsel: &PerTaskZ) -> Result<SlicingSolution, SolveError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(SolveError::InvalidInstance(violations));
    }
    let pool = &inst.pool;
    let m = pool.resource_count();

    let mut allocations: BTreeMap<TaskId, Allocation> = BTreeMap::new();
    let mut diagnostics: BTreeMap<TaskId, RejectReason> = BTreeMap::new();
    let mut occupied = vec![0u32; m];

    for task in inst.sorted_tasks() {
        let cls = inst
            .class(task.id.class)
            .ok_or(SolveError::UnknownClass { task: task.id, class: task.id.class })?;
        let z = match zsel {
            PerTaskZ::Rule(rule) => match rule.select(inst, cls)? {
                Some(z) => z,
                None => {
                    allocations.insert(task.id, Allocation::rejected(m, 1.0));
                    diagnostics.insert(task.id, RejectReason::AccuracyUnreachable);
                    continue;
                }
            },
            PerTaskZ::Fixed(z) => {
                // The forced factor must be a real grid point of the task's
                // own profile, otherwise the solution would be unevaluable.
                let profile = inst.profiles.require_accuracy(&cls.profile_id)?;
                if profile.grid_index(*z).is_none() {
                    return Err(SolveError::FixedCompressionOffGrid {
                        profile: cls.profile_id.clone(),
                        z: *z,
                    });
                }
                *z
            }
        };

        let model = inst.profiles.require_latency(&cls.latency_id)?;
        let cands = enumerate_candidates(
            pool,
            model,
            task.id,
            z,
            task.fps,
            task.base_bitrate,
            cls.latency_threshold,
            DEFAULT_GRID_BUDGET,
        )?;
        if cands.is_empty() {
            allocations.insert(task.id, Allocation::rejected(m, z));
            diagnostics.insert(task.id, RejectReason::LatencyUnreachable);
            continue;
        }
        let remaining: Vec<u32> = pool
            .capacities
            .iter()
            .zip(&occupied)
            .map(|(&cap, &o)| cap - o)
            .collect();
        match pick_min_units(&cands, &remaining) {
            None => {
                allocations.insert(task.id, Allocation::rejected(m, z));
                diagnostics.insert(task.id, RejectReason::CapacityExhausted);
            }
            Some(c) => {
                for k in 0..m {
                    occupied[k] += c.slice[k];
                }
                allocations.insert(
                    task.id,
                    Allocation { admitted: true, slice: c.slice.clone(), compression: z },
                );
                diagnostics.insert(task.id, RejectReason::Admitted);
            }
        }
    }

    let mut solution = SlicingSolution { allocations, objective: 0.0, occupied, diagnostics };
    solution.objective = objective_value(inst, &solution).expect("all tasks covered");
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{verify_feasible, ViolationKind};
    use crate::solvers::{solve_with, Algo};

    #[test]
    fn minres_picks_the_cheapest_unit_count() {
        // Feasible boundary slices are (5,4), (6,3) at 9 units and (10,2)
        // at 12; the lexicographic tie-break prefers (5,4).
        let mut inst = fixtures::flex_example_instance();
        inst.tasks.truncate(1);
        let sol = solve_minres_sem(&inst).unwrap();
        let alloc = sol.allocations.values().next().unwrap();
        assert!(alloc.admitted);
        assert_eq!(alloc.slice, vec![5, 4]);
    }

    #[test]
    fn minres_strands_the_second_task() {
        let inst = fixtures::flex_example_instance();
        let sol = solve_minres_sem(&inst).unwrap();
        assert_eq!(sol.admitted_count(), 1);
        let second = &sol.diagnostics[&TaskId::new(0, 1, 0)];
        assert_eq!(*second, RejectReason::CapacityExhausted);
        assert!(verify_feasible(&inst, &sol).is_empty());
    }

    #[test]
    fn minres_rejects_unreachable_accuracy() {
        let mut inst = fixtures::flex_example_instance();
        inst.classes[0].accuracy_threshold = 0.9;
        let sol = solve_minres_sem(&inst).unwrap();
        assert_eq!(sol.admitted_count(), 0);
        assert!(sol.diagnostics.values().all(|r| *r == RejectReason::AccuracyUnreachable));
    }

    fn coco_instance(threshold: f64) -> ProblemInstance {
        // One detection task whose class profile outperforms the dataset
        // fallback profile everywhere.
        let mut inst = fixtures::testbed_instance();
        inst.tasks.truncate(1);
        inst.classes.truncate(1);
        inst.classes[0].accuracy_threshold = threshold;
        inst
    }

    #[test]
    fn sl_edge_rejects_thresholds_above_fallback_maximum() {
        // The detection fallback profile saturates at 0.40.
        let inst = coco_instance(0.55);
        let sol = solve_sl_edge(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(sol.admitted_count(), 0);
        assert_eq!(sol.diagnostics[&TaskId::new(0, 0, 0)], RejectReason::AccuracyUnreachable);
        // At 0.45 the fallback still cannot reach the threshold while the
        // class profile passes at 0.28, so the semantic variant admits.
        let inst = coco_instance(0.45);
        let blind = solve_sl_edge(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(blind.admitted_count(), 0);
        let sem = solve_minres_sem(&inst).unwrap();
        assert_eq!(sem.admitted_count(), 1);
    }

    #[test]
    fn sl_edge_uses_weakly_larger_compression() {
        // At threshold 0.22 the class profile passes at 0.14 while the
        // fallback profile needs 0.18: the blind solver compresses less.
        let mut inst = coco_instance(0.22);
        // Extend the latency grid to cover both factors.
        if let crate::perf::LatencyModel::Tabulated(t) =
            inst.profiles.latency_models.get_mut("l-testbed-bags").unwrap()
        {
            t.entries.push(crate::perf::TabEntry {
                z: 0.14,
                slice: vec![1, 8],
                fps: 10.0,
                seconds: 0.25,
            });
            t.entries.push(crate::perf::TabEntry {
                z: 0.18,
                slice: vec![1, 8],
                fps: 10.0,
                seconds: 0.27,
            });
        }
        let sem = solve_minres_sem(&inst).unwrap();
        let blind = solve_sl_edge(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(sem.admitted_count(), 1);
        assert_eq!(blind.admitted_count(), 1);
        let z_sem = sem.allocations[&TaskId::new(0, 0, 0)].compression;
        let z_blind = blind.allocations[&TaskId::new(0, 0, 0)].compression;
        assert_eq!(z_sem, 0.14);
        assert_eq!(z_blind, 0.18);
        assert!(z_blind >= z_sem);
        assert!(verify_feasible(&inst, &blind).is_empty());
    }

    #[test]
    fn flexres_rejects_high_threshold_tasks_that_greedy_admits() {
        let inst = coco_instance(0.45);
        let greedy = crate::greedy::solve_greedy(&inst).unwrap();
        let blind = solve_flexres_nsem(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(greedy.admitted_count(), 1);
        assert_eq!(blind.admitted_count(), 0);
    }

    #[test]
    fn flexres_matches_greedy_slices_at_weakly_larger_compression() {
        let mut inst = coco_instance(0.22);
        if let crate::perf::LatencyModel::Tabulated(t) =
            inst.profiles.latency_models.get_mut("l-testbed-bags").unwrap()
        {
            t.entries.push(crate::perf::TabEntry {
                z: 0.14,
                slice: vec![1, 8],
                fps: 10.0,
                seconds: 0.25,
            });
            t.entries.push(crate::perf::TabEntry {
                z: 0.18,
                slice: vec![1, 8],
                fps: 10.0,
                seconds: 0.27,
            });
        }
        let id = TaskId::new(0, 0, 0);
        let greedy = crate::greedy::solve_greedy(&inst).unwrap();
        let blind = solve_flexres_nsem(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(greedy.allocations[&id].slice, blind.allocations[&id].slice);
        assert_eq!(greedy.allocations[&id].compression, 0.14);
        assert_eq!(blind.allocations[&id].compression, 0.18);
        assert!(verify_feasible(&inst, &blind).is_empty());
    }

    #[test]
    fn highcomp_admits_but_violates_strict_accuracy() {
        let mut inst = coco_instance(0.55);
        // Make the aggressive factor latency-feasible on this model.
        if let crate::perf::LatencyModel::Tabulated(t) =
            inst.profiles.latency_models.get_mut("l-testbed-bags").unwrap()
        {
            t.entries.push(crate::perf::TabEntry {
                z: 0.1,
                slice: vec![1, 8],
                fps: 10.0,
                seconds: 0.2,
            });
        }
        let sol = solve_highcomp(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(sol.admitted_count(), 1);
        let vs = verify_feasible(&inst, &sol);
        assert!(vs.iter().any(|v| v.kind == ViolationKind::Accuracy));
        assert!(vs.iter().all(|v| v.kind != ViolationKind::Capacity));

        // An undemanding threshold makes the same admission genuinely clean.
        inst.classes[0].accuracy_threshold = 0.05;
        let sol = solve_highcomp(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(sol.admitted_count(), 1);
        assert!(verify_feasible(&inst, &sol).is_empty());
    }

    #[test]
    fn highcomp_off_grid_factor_is_an_error() {
        let inst = coco_instance(0.2);
        let cfg = BaselineConfig { highcomp_z: 0.3, ..BaselineConfig::default() };
        let err = solve_highcomp(&inst, &cfg).unwrap_err();
        assert!(matches!(err, SolveError::FixedCompressionOffGrid { .. }));
    }

    #[test]
    fn out_of_range_config_is_rejected() {
        let inst = coco_instance(0.2);
        let cfg = BaselineConfig { highcomp_z: 0.0, ..BaselineConfig::default() };
        assert!(matches!(solve_highcomp(&inst, &cfg), Err(SolveError::InvalidConfig(_))));
        let cfg = BaselineConfig { highres_fraction: 1.5, ..BaselineConfig::default() };
        assert!(matches!(solve_highres(&inst, &cfg), Err(SolveError::InvalidConfig(_))));
    }

    #[test]
    fn highres_zero_share_of_a_required_resource_blocks_admission() {
        // floor(0.2 * 4) = 0 GPUs: the static slice cannot run anything.
        let inst = fixtures::flex_example_instance();
        let sol = solve_highres(&inst, &BaselineConfig::default()).unwrap();
        assert_eq!(sol.admitted_count(), 0);
        assert!(sol
            .diagnostics
            .values()
            .all(|r| *r == RejectReason::LatencyUnreachable));
    }

    #[test]
    fn highres_admits_up_to_the_capacity_quotient() {
        let mut inst = fixtures::flex_example_instance();
        inst.pool.capacities = vec![25, 20];
        inst.tasks = (0..8)
            .map(|d| crate::model::TaskSpec {
                id: TaskId::new(0, d, 0),
                fps: 10.0,
                base_bitrate: 1.0,
            })
            .collect();
        let sol = solve_highres(&inst, &BaselineConfig::default()).unwrap();
        // Slice (5, 4) per task: five fit the 25-RBG budget.
        assert_eq!(sol.admitted_count(), 5);
        for alloc in sol.allocations.values().filter(|a| a.admitted) {
            assert_eq!(alloc.slice, vec![5, 4]);
        }
        let vs = verify_feasible(&inst, &sol);
        assert!(vs.iter().all(|v| v.kind != ViolationKind::Capacity));
    }

    #[test]
    fn empty_instances_solve_to_empty_solutions_under_every_baseline() {
        let mut inst = fixtures::flex_example_instance();
        inst.tasks.clear();
        let cfg = BaselineConfig::default();
        let limits = crate::exact::OracleLimits::default();
        for algo in Algo::ALL {
            let sol = solve_with(algo, &inst, &cfg, &limits).unwrap();
            assert_eq!(sol.admitted_count(), 0, "{}", algo.name());
            assert_eq!(sol.objective, 0.0);
        }
    }

    #[test]
    fn greedy_and_minres_agree_on_compression_for_shared_admissions() {
        let inst = fixtures::testbed_instance();
        let greedy = crate::greedy::solve_greedy(&inst).unwrap();
        let minres = solve_minres_sem(&inst).unwrap();
        for (id, a) in greedy.allocations.iter().filter(|(_, a)| a.admitted) {
            let b = &minres.allocations[id];
            if b.admitted {
                assert_eq!(a.compression, b.compression, "task {id}");
            }
        }
    }
}
