//! Greedy admission driven by the primal effective gradient.
//!
//! Each task first gets the smallest compression factor on its accuracy
//! grid that meets the class threshold; tasks that cannot meet it are
//! pruned. The admission loop then repeatedly scores every remaining
//! candidate task by the best primal gradient over its latency-feasible
//! allocations within the remaining capacity, admits the task with the
//! highest gradient, and re-scores from scratch, until no candidate is
//! left.
//!
//! The gradient of a slice `s` under occupation `o` is
//!
//! ```text
//!   o = 0:      sum_k p_k (S_k - s_k) * sqrt(m)            / sum_k s_k / S_k
//!   otherwise:  sum_k p_k (S_k - s_k) * sqrt(sum_k o_k^2)  / sum_k s_k o_k / S_k
//! ```
//!
//! so while resources are untouched every unit of usage is penalized in
//! proportion to its share of capacity, and afterwards in proportion to
//! how loaded its resource type already is. A slice that consumes only
//! untouched resource types has a zero denominator and scores infinite:
//! it is preferred over every finite gradient.

use std::collections::BTreeMap;
use std::io::Write;

use crate::candidates::{enumerate_candidates, Candidate, SolveError, DEFAULT_GRID_BUDGET};
use crate::model::{
    objective_value, validate_instance, Allocation, ApplicationClass, ProblemInstance,
    RejectReason, ResourcePool, SlicingSolution, TaskId, TaskSpec,
};
use crate::perf::{AccuracyProfile, LatencyModel};

/// Outcome of scoring one task: the gradient-maximizing feasible slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEvaluation {
    pub task_id: TaskId,
    pub best_slice: Vec<u32>,
    /// Primal gradient of `best_slice`; `f64::INFINITY` marks a slice that
    /// touches only unoccupied resource types.
    pub gradient: f64,
}

/// Smallest grid compression factor whose accuracy meets `threshold`,
/// or `None` when even the full-quality point falls short.
pub fn optimal_compression(profile: &AccuracyProfile, threshold: f64) -> Option<f64> {
    profile
        .z_grid
        .iter()
        .zip(&profile.accuracy)
        .find(|(_, &a)| a >= threshold)
        .map(|(&z, _)| z)
}

/// Primal gradient of slice `s` given the current occupation vector.
/// An all-zero slice is meaningless and rejected.
pub fn primal_gradient(s: &[u32], pool: &ResourcePool, occupied: &[u32]) -> Result<f64, SolveError> {
    if s.iter().all(|&v| v == 0) {
        return Err(SolveError::ZeroSlice);
    }
    Ok(gradient_unchecked(s, pool, occupied))
}

fn gradient_unchecked(s: &[u32], pool: &ResourcePool, occupied: &[u32]) -> f64 {
    let m = pool.resource_count();
    let mut numerator = 0.0;
    for k in 0..m {
        numerator += pool.prices[k] * (pool.capacities[k] as f64 - s[k] as f64);
    }
    let free_pool = occupied.iter().all(|&o| o == 0);
    let (scale, denom) = if free_pool {
        let mut denom = 0.0;
        for k in 0..m {
            if pool.capacities[k] > 0 {
                denom += s[k] as f64 / pool.capacities[k] as f64;
            }
        }
        ((m as f64).sqrt(), denom)
    } else {
        let mut denom = 0.0;
        let mut norm = 0.0;
        for k in 0..m {
            let o = occupied[k] as f64;
            norm += o * o;
            if pool.capacities[k] > 0 {
                denom += s[k] as f64 * o / pool.capacities[k] as f64;
            }
        }
        (norm.sqrt(), denom)
    };
    if denom == 0.0 {
        if numerator > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        numerator * scale / denom
    }
}

/// Gradient-maximizing candidate within `remaining`, with ties broken by
/// lower priced cost and then lexicographically smaller slice.
fn pick_best<'a>(
    cands: &'a [Candidate],
    pool: &ResourcePool,
    occupied: &[u32],
    remaining: &[u32],
) -> Option<(f64, &'a Candidate)> {
    let mut best: Option<(f64, &'a Candidate)> = None;
    for c in cands {
        if !c.fits(remaining) {
            continue;
        }
        let pg = gradient_unchecked(&c.slice, pool, occupied);
        match &best {
            None => best = Some((pg, c)),
            Some((bpg, bc)) => {
                let better = pg > *bpg
                    || (pg == *bpg
                        && (c.priced_cost < bc.priced_cost
                            || (c.priced_cost == bc.priced_cost && c.slice < bc.slice)));
                if better {
                    best = Some((pg, c));
                }
            }
        }
    }
    best
}

/// Scores one task against the current occupation: enumerates its
/// latency-feasible allocations at compression `z`, keeps those fitting
/// the remaining capacity, and returns the gradient maximizer, or `None`
/// when no allocation fits.
pub fn best_allocation(
    pool: &ResourcePool,
    model: &LatencyModel,
    task: &TaskSpec,
    z: f64,
    latency_threshold: f64,
    occupied: &[u32],
) -> Result<Option<GradientEvaluation>, SolveError> {
    let cands = enumerate_candidates(
        pool,
        model,
        task.id,
        z,
        task.fps,
        task.base_bitrate,
        latency_threshold,
        DEFAULT_GRID_BUDGET,
    )?;
    let remaining: Vec<u32> = pool
        .capacities
        .iter()
        .zip(occupied)
        .map(|(&cap, &o)| cap.saturating_sub(o))
        .collect();
    Ok(pick_best(&cands, pool, occupied, &remaining).map(|(pg, c)| GradientEvaluation {
        task_id: task.id,
        best_slice: c.slice.clone(),
        gradient: pg,
    }))
}

/// How the per-task compression factor is chosen.
pub(crate) enum CompressionRule {
    /// Class threshold against the class's own accuracy profile.
    Semantic,
    /// Class threshold against the dataset-wide fallback profile,
    /// ignoring per-class semantics.
    AllProfile { default_id: Option<String> },
}

impl CompressionRule {
    pub(crate) fn select(
        &self,
        inst: &ProblemInstance,
        cls: &ApplicationClass,
    ) -> Result<Option<f64>, SolveError> {
        let profile_id = match self {
            CompressionRule::Semantic => cls.profile_id.clone(),
            CompressionRule::AllProfile { default_id } => cls
                .all_profile_id
                .clone()
                .or_else(|| default_id.clone())
                .ok_or(SolveError::MissingAllProfile { class: cls.class_id })?,
        };
        let profile = inst.profiles.require_accuracy(&profile_id)?;
        Ok(optimal_compression(profile, cls.accuracy_threshold))
    }
}

struct PreparedTask<'a> {
    task: &'a TaskSpec,
    z: f64,
    candidates: Vec<Candidate>,
}

/// Full greedy result plus loop statistics.
pub struct GreedyOutcome {
    pub solution: SlicingSolution,
    /// Admission loop iterations executed; bounded by the task count.
    pub iterations: usize,
}

/// Solves an instance with the primal-gradient greedy.
pub fn solve_greedy(inst: &ProblemInstance) -> Result<SlicingSolution, SolveError> {
    solve_primal_gradient(inst, &CompressionRule::Semantic, None).map(|o| o.solution)
}

/// As [`solve_greedy`], also emitting one JSON line per solver event
/// (task scored, task removed, task admitted) to `sink` and reporting
/// loop statistics.
pub fn solve_greedy_traced(
    inst: &ProblemInstance,
    sink: &mut dyn Write,
) -> Result<GreedyOutcome, SolveError> {
    solve_primal_gradient(inst, &CompressionRule::Semantic, Some(sink))
}

#[derive(serde::Serialize)]
struct TraceLine<'a> {
    iteration: usize,
    action: &'static str,
    task: TaskId,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradient: Option<f64>,
    unbounded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    slice: Option<&'a [u32]>,
}

fn trace(sink: &mut Option<&mut dyn Write>, line: &TraceLine) {
    if let Some(w) = sink {
        let text = serde_json::to_string(line).expect("trace line serializes");
        let _ = writeln!(w, "{text}");
    }
}

pub(crate) fn solve_primal_gradient(
    inst: &ProblemInstance,
    rule: &CompressionRule,
    mut sink: Option<&mut dyn Write>,
) -> Result<GreedyOutcome, SolveError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(SolveError::InvalidInstance(violations));
    }
    let pool = &inst.pool;
    let m = pool.resource_count();

    let mut allocations: BTreeMap<TaskId, Allocation> = BTreeMap::new();
    let mut diagnostics: BTreeMap<TaskId, RejectReason> = BTreeMap::new();
    let mut active: Vec<PreparedTask> = Vec::new();

    for task in inst.sorted_tasks() {
        let cls = inst
            .class(task.id.class)
            .ok_or(SolveError::UnknownClass { task: task.id, class: task.id.class })?;
        match rule.select(inst, cls)? {
            None => {
                allocations.insert(task.id, Allocation::rejected(m, 1.0));
                diagnostics.insert(task.id, RejectReason::AccuracyUnreachable);
            }
            Some(z) => {
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
                allocations.insert(task.id, Allocation::rejected(m, z));
                if cands.is_empty() {
                    diagnostics.insert(task.id, RejectReason::LatencyUnreachable);
                } else {
                    diagnostics.insert(task.id, RejectReason::CapacityExhausted);
                    active.push(PreparedTask { task, z, candidates: cands });
                }
            }
        }
    }

    let mut occupied = vec![0u32; m];
    let mut iterations = 0usize;
    while !active.is_empty() {
        iterations += 1;
        let remaining: Vec<u32> = pool
            .capacities
            .iter()
            .zip(&occupied)
            .map(|(&cap, &o)| cap - o)
            .collect();

        let mut scored: Vec<(usize, f64, Vec<u32>)> = Vec::new();
        let mut keep: Vec<bool> = vec![true; active.len()];
        for (i, prep) in active.iter().enumerate() {
            match pick_best(&prep.candidates, pool, &occupied, &remaining) {
                Some((pg, cand)) => {
                    trace(
                        &mut sink,
                        &TraceLine {
                            iteration: iterations,
                            action: "evaluate",
                            task: prep.task.id,
                            gradient: pg.is_finite().then_some(pg),
                            unbounded: pg.is_infinite(),
                            slice: Some(&cand.slice),
                        },
                    );
                    scored.push((i, pg, cand.slice.clone()));
                }
                None => {
                    keep[i] = false;
                    trace(
                        &mut sink,
                        &TraceLine {
                            iteration: iterations,
                            action: "remove",
                            task: prep.task.id,
                            gradient: None,
                            unbounded: false,
                            slice: None,
                        },
                    );
                }
            }
        }

        // Admit the highest gradient; equal gradients fall to the smaller
        // task id, which is the iteration order here.
        let winner = scored
            .iter()
            .fold(None::<&(usize, f64, Vec<u32>)>, |best, entry| match best {
                None => Some(entry),
                Some(b) if entry.1 > b.1 => Some(entry),
                Some(b) => Some(b),
            })
            .cloned();

        let mut removed: Vec<usize> = (0..active.len()).filter(|&i| !keep[i]).collect();
        if let Some((idx, pg, slice)) = winner {
            let prep = &active[idx];
            trace(
                &mut sink,
                &TraceLine {
                    iteration: iterations,
                    action: "admit",
                    task: prep.task.id,
                    gradient: pg.is_finite().then_some(pg),
                    unbounded: pg.is_infinite(),
                    slice: Some(&slice),
                },
            );
            for k in 0..m {
                occupied[k] += slice[k];
            }
            allocations.insert(
                prep.task.id,
                Allocation { admitted: true, slice, compression: prep.z },
            );
            diagnostics.insert(prep.task.id, RejectReason::Admitted);
            removed.push(idx);
        }
        removed.sort_unstable();
        for idx in removed.into_iter().rev() {
            active.remove(idx);
        }
    }

    let mut solution = SlicingSolution {
        allocations,
        objective: 0.0,
        occupied,
        diagnostics,
    };
    solution.objective =
        objective_value(inst, &solution).expect("solver covers every instance task");
    Ok(GreedyOutcome { solution, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::kp_instance_from_slices;
    use crate::fixtures;
    use crate::model::verify_feasible;

    fn demo_person() -> AccuracyProfile {
        fixtures::default_registry().accuracy("DEMO-Person").unwrap().clone()
    }

    #[test]
    fn optimal_compression_scans_the_grid() {
        let p = demo_person();
        assert_eq!(optimal_compression(&p, 0.5), Some(0.28));
        assert_eq!(optimal_compression(&p, 0.0), Some(0.04));
        assert_eq!(optimal_compression(&p, 0.7), None);
    }

    fn pool_25_4() -> ResourcePool {
        fixtures::flex_example_instance().pool
    }

    #[test]
    fn gradient_single_resource_free_pool() {
        let pool = ResourcePool::new(vec!["r".into()], vec![10], vec![1.0]);
        let pg = primal_gradient(&[2], &pool, &[0]).unwrap();
        assert!((pg - 40.0).abs() < 1e-9, "{pg}");
    }

    #[test]
    fn gradient_free_pool_two_resources() {
        let pool = pool_25_4();
        let pg = primal_gradient(&[10, 2], &pool, &[0, 0]).unwrap();
        let expect = 27.5 * 2f64.sqrt() / 0.9;
        assert!((pg - expect).abs() < 1e-9, "{pg} vs {expect}");
        assert!((pg - 43.21).abs() < 0.01);
    }

    #[test]
    fn gradient_occupied_pool_weights_by_usage() {
        let pool = pool_25_4();
        let pg = primal_gradient(&[10, 2], &pool, &[10, 2]).unwrap();
        let expect = 27.5 * 104f64.sqrt() / 5.0;
        assert!((pg - expect).abs() < 1e-9, "{pg} vs {expect}");
        assert!((pg - 56.09).abs() < 0.01);
    }

    #[test]
    fn gradient_on_untouched_types_is_infinite() {
        let pool = pool_25_4();
        let pg = primal_gradient(&[3, 0], &pool, &[0, 5]).unwrap();
        assert!(pg.is_infinite());
    }

    #[test]
    fn gradient_rejects_zero_slice() {
        let pool = pool_25_4();
        assert!(matches!(primal_gradient(&[0, 0], &pool, &[0, 0]), Err(SolveError::ZeroSlice)));
    }

    fn flex_task() -> TaskSpec {
        fixtures::flex_example_instance().tasks[0].clone()
    }

    fn flex_model() -> LatencyModel {
        fixtures::flex_example_instance().profiles.latency("l-flex").unwrap().clone()
    }

    #[test]
    fn best_allocation_prefers_balanced_slice() {
        let pool = pool_25_4();
        let eval = best_allocation(&pool, &flex_model(), &flex_task(), 1.0, 0.4, &[0, 0])
            .unwrap()
            .unwrap();
        assert_eq!(eval.best_slice, vec![10, 2]);
        assert!((eval.gradient - 27.5 * 2f64.sqrt() / 0.9).abs() < 1e-9);
    }

    #[test]
    fn best_allocation_under_occupation() {
        let pool = pool_25_4();
        let eval = best_allocation(&pool, &flex_model(), &flex_task(), 1.0, 0.4, &[10, 2])
            .unwrap()
            .unwrap();
        assert_eq!(eval.best_slice, vec![10, 2]);
        assert!((eval.gradient - 27.5 * 104f64.sqrt() / 5.0).abs() < 1e-9);
    }

    #[test]
    fn best_allocation_none_when_gpus_exhausted() {
        let pool = pool_25_4();
        // Occupation (6, 3) leaves (19, 1): one GPU cannot reach 0.4 s.
        let eval =
            best_allocation(&pool, &flex_model(), &flex_task(), 1.0, 0.4, &[6, 3]).unwrap();
        assert!(eval.is_none());
    }

    #[test]
    fn empty_instance_solves_to_empty_solution() {
        let mut inst = fixtures::flex_example_instance();
        inst.tasks.clear();
        let sol = solve_greedy(&inst).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.admitted_count(), 0);
    }

    #[test]
    fn flex_example_admits_both_tasks_balanced() {
        let inst = fixtures::flex_example_instance();
        let sol = solve_greedy(&inst).unwrap();
        assert_eq!(sol.admitted_count(), 2);
        for alloc in sol.allocations.values() {
            assert_eq!(alloc.slice, vec![10, 2]);
            assert_eq!(alloc.compression, 1.0);
        }
        assert_eq!(sol.occupied, vec![20, 4]);
        assert_eq!(sol.objective, 55.0);
        assert!(verify_feasible(&inst, &sol).is_empty());
    }

    #[test]
    fn knapsack_shaped_instance_admits_the_two_small_tasks() {
        let inst = kp_instance_from_slices(vec![10], vec![1.0], &[vec![6], vec![5], vec![5]]);
        let sol = solve_greedy(&inst).unwrap();
        assert_eq!(sol.objective, 10.0);
        let admitted = sol.admitted_ids();
        assert_eq!(admitted, vec![TaskId::new(1, 0, 0), TaskId::new(2, 0, 0)]);
        assert!(verify_feasible(&inst, &sol).is_empty());
    }

    #[test]
    fn solver_is_deterministic_and_bounded() {
        let inst = fixtures::testbed_instance();
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        let a = solve_greedy_traced(&inst, &mut t1).unwrap();
        let b = solve_greedy_traced(&inst, &mut t2).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(t1, t2);
        assert!(a.iterations <= inst.tasks.len());

        // Every trace line is standalone JSON with the expected fields.
        let text = String::from_utf8(t1).unwrap();
        let mut admits = 0;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["iteration"].is_u64());
            assert!(v["task"].is_string());
            if v["action"] == "admit" {
                admits += 1;
            }
        }
        assert_eq!(admits, a.solution.admitted_count());
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let mut inst = fixtures::flex_example_instance();
        inst.pool.prices[0] = -1.0;
        assert!(matches!(solve_greedy(&inst), Err(SolveError::InvalidInstance(_))));
    }

    #[test]
    fn disjoint_resource_users_ride_the_unbounded_gradient() {
        // Task 0 only consumes resource 0 and task 1 only resource 1, so
        // whichever goes second scores an infinite gradient (its slice
        // touches no occupied type) and must still be admitted.
        let inst =
            kp_instance_from_slices(vec![10, 10], vec![1.0, 1.0], &[vec![3, 0], vec![0, 4]]);
        let mut sink = Vec::new();
        let outcome = solve_greedy_traced(&inst, &mut sink).unwrap();
        assert_eq!(outcome.solution.admitted_count(), 2);
        let text = String::from_utf8(sink).unwrap();
        let unbounded_admits = text
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|v| v["action"] == "admit" && v["unbounded"] == true)
            .count();
        assert_eq!(unbounded_admits, 1);
    }

    proptest::proptest! {
        // The pivot-minimal candidate search must agree with a brute-force
        // sweep of the full allocation grid, for both the gradient argmax
        // (with its priced-cost and lexicographic tie-breaks) and the
        // minimal-unit choice.
        #[test]
        fn candidate_search_matches_full_grid_sweep(
            cap1 in 4u32..12, cap2 in 2u32..8,
            price2 in 1u32..8,
            alpha in 0.5f64..3.0, gamma in 0.1f64..1.5,
            l_max in 0.3f64..1.0,
            occ1 in 0u32..4, occ2 in 0u32..3,
        ) {
            let pool = ResourcePool::new(
                vec!["a".into(), "b".into()],
                vec![cap1, cap2],
                vec![1.0, price2 as f64],
            );
            let model = LatencyModel::Parametric(crate::perf::ParametricLatency {
                id: "t".into(),
                network_coeff: alpha,
                network_index: 0,
                compute_terms: vec![crate::perf::ComputeTerm { index: 1, coeff: gamma }],
                fixed_seconds: 0.0,
                fps_factor: None,
            });
            let occupied = [occ1.min(cap1), occ2.min(cap2)];
            let remaining = [cap1 - occupied[0], cap2 - occupied[1]];

            // Full sweep with identical selection rules.
            let mut sweep_best: Option<(f64, f64, Vec<u32>)> = None;
            let mut sweep_min_units: Option<(u64, Vec<u32>)> = None;
            for s1 in 0..=remaining[0] {
                for s2 in 0..=remaining[1] {
                    let slice = vec![s1, s2];
                    if (s1, s2) == (0, 0) || model.eval(1.0, &slice, 10.0, 1.0) > l_max {
                        continue;
                    }
                    let pg = gradient_unchecked(&slice, &pool, &occupied);
                    let priced = s1 as f64 + price2 as f64 * s2 as f64;
                    let better = match &sweep_best {
                        None => true,
                        Some((bpg, bpriced, bslice)) => {
                            pg > *bpg
                                || (pg == *bpg
                                    && (priced < *bpriced
                                        || (priced == *bpriced && slice < *bslice)))
                        }
                    };
                    if better {
                        sweep_best = Some((pg, priced, slice.clone()));
                    }
                    let units = (s1 + s2) as u64;
                    let smaller = match &sweep_min_units {
                        None => true,
                        Some((bu, bslice)) => units < *bu || (units == *bu && slice < *bslice),
                    };
                    if smaller {
                        sweep_min_units = Some((units, slice));
                    }
                }
            }

            let task = TaskSpec { id: TaskId::new(0, 0, 0), fps: 10.0, base_bitrate: 1.0 };
            let eval = best_allocation(&pool, &model, &task, 1.0, l_max, &occupied).unwrap();
            match (&sweep_best, &eval) {
                (None, None) => {}
                (Some((pg, _, slice)), Some(e)) => {
                    proptest::prop_assert_eq!(slice, &e.best_slice);
                    proptest::prop_assert_eq!(*pg, e.gradient);
                }
                other => proptest::prop_assert!(false, "mismatch: {:?}", other),
            }

            let cands = crate::candidates::enumerate_candidates(
                &pool, &model, task.id, 1.0, 10.0, 1.0, l_max,
                crate::candidates::DEFAULT_GRID_BUDGET,
            ).unwrap();
            let min_units = cands
                .iter()
                .filter(|c| c.fits(&remaining))
                .min_by(|a, b| a.units.cmp(&b.units).then(a.slice.cmp(&b.slice)))
                .map(|c| c.slice.clone());
            proptest::prop_assert_eq!(sweep_min_units.map(|(_, s)| s), min_units);
        }

        // Scaling all prices by a power of two scales every gradient
        // exactly and leaves the argmax slice unchanged.
        #[test]
        fn price_scaling_preserves_choice(exp in -3i32..6) {
            let lambda = 2f64.powi(exp);
            let inst = fixtures::flex_example_instance();
            let mut scaled = inst.clone();
            for p in &mut scaled.pool.prices {
                *p *= lambda;
            }
            let base = best_allocation(
                &inst.pool, &flex_model(), &flex_task(), 1.0, 0.4, &[0, 0],
            ).unwrap().unwrap();
            let scaled_eval = best_allocation(
                &scaled.pool, &flex_model(), &flex_task(), 1.0, 0.4, &[0, 0],
            ).unwrap().unwrap();
            proptest::prop_assert_eq!(&base.best_slice, &scaled_eval.best_slice);
            proptest::prop_assert_eq!(base.gradient * lambda, scaled_eval.gradient);

            let s1 = solve_greedy(&inst).unwrap();
            let s2 = solve_greedy(&scaled).unwrap();
            proptest::prop_assert_eq!(s1.admitted_ids(), s2.admitted_ids());
        }
    }
}
