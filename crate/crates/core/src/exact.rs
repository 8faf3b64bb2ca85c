//! Brute-force exact solver for small instances.
//!
//! Enumerates every admission subset in lexicographic order of the
//! admission vector and, per subset, searches all combinations of
//! per-task latency-feasible slices by depth-first product, pruning only
//! on capacity. The first assignment reaching a strictly higher objective
//! wins, so ties resolve toward the lexicographically smallest admission
//! vector and then the smallest slices. Deliberately simple: the point is
//! an auditable ground truth for measuring the greedy's gap, not speed.
//!
//! The objective never depends on the compression factor, accuracy only
//! improves with a larger factor, and latency never improves, so fixing
//! each task at its minimal accuracy-feasible factor is optimal. The
//! `no_dominance` entry point re-enumerates every accuracy-feasible
//! factor instead, as a cross-check of that argument.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::candidates::{enumerate_candidates, SolveError, DEFAULT_GRID_BUDGET};
use crate::greedy::{optimal_compression, solve_greedy};
use crate::model::{
    objective_value, validate_instance, Allocation, ProblemInstance, RejectReason,
    SlicingSolution, TaskId,
};

/// Enumeration limits; exceeding any of them is an explicit refusal,
/// never a silently truncated result.
#[derive(Debug, Clone)]
pub struct OracleLimits {
    pub max_tasks: usize,
    pub max_candidates_per_task: usize,
    pub time_budget: Duration,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_tasks: 6, max_candidates_per_task: 200, time_budget: Duration::from_secs(60) }
    }
}

/// Greedy-versus-exact comparison on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub greedy_objective: f64,
    pub exact_objective: f64,
    /// `greedy / exact`, defined as 1 when both are zero.
    pub ratio: f64,
    pub greedy_admitted: usize,
    pub exact_admitted: usize,
}

/// Exact optimum with the compression factor fixed at its minimal
/// accuracy-feasible grid point per task.
pub fn solve_exact(inst: &ProblemInstance, limits: &OracleLimits) -> Result<SlicingSolution, SolveError> {
    solve(inst, limits, false)
}

/// Exact optimum enumerating every accuracy-feasible compression factor;
/// must agree with [`solve_exact`] on the objective.
pub fn solve_exact_no_dominance(
    inst: &ProblemInstance,
    limits: &OracleLimits,
) -> Result<SlicingSolution, SolveError> {
    solve(inst, limits, true)
}

/// Runs both solvers and reports the objective ratio.
pub fn gap_report(inst: &ProblemInstance, limits: &OracleLimits) -> Result<GapReport, SolveError> {
    let exact = solve_exact(inst, limits)?;
    let greedy = solve_greedy(inst)?;
    let ratio = if exact.objective == 0.0 && greedy.objective == 0.0 {
        1.0
    } else {
        greedy.objective / exact.objective
    };
    Ok(GapReport {
        greedy_objective: greedy.objective,
        exact_objective: exact.objective,
        ratio,
        greedy_admitted: greedy.admitted_count(),
        exact_admitted: exact.admitted_count(),
    })
}

struct TaskChoice {
    id: TaskId,
    /// `(z, slice, value)` sorted by slice then z; value is the priced
    /// spare capacity this slice leaves.
    options: Vec<(f64, Vec<u32>, f64)>,
}

fn solve(
    inst: &ProblemInstance,
    limits: &OracleLimits,
    no_dominance: bool,
) -> Result<SlicingSolution, SolveError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(SolveError::InvalidInstance(violations));
    }
    let started = Instant::now();
    let tasks = inst.sorted_tasks();
    if tasks.len() > limits.max_tasks {
        return Err(SolveError::OracleRefusal(format!(
            "{} tasks exceed the limit of {}",
            tasks.len(),
            limits.max_tasks
        )));
    }
    let pool = &inst.pool;
    let m = pool.resource_count();

    let mut allocations: BTreeMap<TaskId, Allocation> = BTreeMap::new();
    let mut diagnostics: BTreeMap<TaskId, RejectReason> = BTreeMap::new();
    let mut choices: Vec<TaskChoice> = Vec::new();

    for task in &tasks {
        let cls = inst
            .class(task.id.class)
            .ok_or(SolveError::UnknownClass { task: task.id, class: task.id.class })?;
        let profile = inst.profiles.require_accuracy(&cls.profile_id)?;
        let model = inst.profiles.require_latency(&cls.latency_id)?;
        let Some(z_star) = optimal_compression(profile, cls.accuracy_threshold) else {
            allocations.insert(task.id, Allocation::rejected(m, 1.0));
            diagnostics.insert(task.id, RejectReason::AccuracyUnreachable);
            continue;
        };
        let z_options: Vec<f64> = if no_dominance {
            profile
                .z_grid
                .iter()
                .zip(&profile.accuracy)
                .filter(|(_, &a)| a >= cls.accuracy_threshold)
                .map(|(&z, _)| z)
                .collect()
        } else {
            vec![z_star]
        };

        let mut options = Vec::new();
        for z in z_options {
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
            for c in cands {
                let value = crate::model::slice_value(pool, &c.slice);
                options.push((z, c.slice, value));
            }
        }
        if options.len() > limits.max_candidates_per_task {
            return Err(SolveError::OracleRefusal(format!(
                "task {} has {} feasible candidates, above the limit of {}",
                task.id,
                options.len(),
                limits.max_candidates_per_task
            )));
        }
        if options.is_empty() {
            allocations.insert(task.id, Allocation::rejected(m, z_star));
            diagnostics.insert(task.id, RejectReason::LatencyUnreachable);
            continue;
        }
        options.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.partial_cmp(&b.0).unwrap()));
        allocations.insert(task.id, Allocation::rejected(m, z_star));
        diagnostics.insert(task.id, RejectReason::CapacityExhausted);
        choices.push(TaskChoice { id: task.id, options });
    }

    let n = choices.len();
    let mut best_objective = 0.0f64;
    let mut best_assignment: Vec<Option<usize>> = vec![None; n];
    let mut nodes: u64 = 0;

    // Admission vectors in lexicographic order: bit 0 of the vector is the
    // first task, so it maps to the most significant counter bit.
    for mask in 0u64..(1u64 << n) {
        if started.elapsed() > limits.time_budget {
            return Err(SolveError::OracleRefusal(format!(
                "time budget of {:.1}s exceeded",
                limits.time_budget.as_secs_f64()
            )));
        }
        let members: Vec<usize> =
            (0..n).filter(|i| mask >> (n - 1 - i) & 1 == 1).collect();
        let mut occupied = vec![0u64; m];
        let mut picked: Vec<usize> = Vec::with_capacity(members.len());
        dfs(
            &choices,
            &members,
            0,
            pool,
            &mut occupied,
            0.0,
            &mut picked,
            &mut best_objective,
            &mut best_assignment,
            &mut nodes,
            started,
            limits.time_budget,
        )?;
    }

    for (i, choice) in choices.iter().enumerate() {
        if let Some(opt_idx) = best_assignment[i] {
            let (z, slice, _) = &choice.options[opt_idx];
            allocations
                .insert(choice.id, Allocation { admitted: true, slice: slice.clone(), compression: *z });
            diagnostics.insert(choice.id, RejectReason::Admitted);
        }
    }

    let mut occupied = vec![0u32; m];
    for alloc in allocations.values() {
        if alloc.admitted {
            for k in 0..m {
                occupied[k] += alloc.slice[k];
            }
        }
    }
    let mut solution = SlicingSolution { allocations, objective: 0.0, occupied, diagnostics };
    solution.objective = objective_value(inst, &solution).expect("oracle covers every task");
    Ok(solution)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    choices: &[TaskChoice],
    members: &[usize],
    depth: usize,
    pool: &crate::model::ResourcePool,
    occupied: &mut Vec<u64>,
    value_so_far: f64,
    picked: &mut Vec<usize>,
    best_objective: &mut f64,
    best_assignment: &mut Vec<Option<usize>>,
    nodes: &mut u64,
    started: Instant,
    budget: Duration,
) -> Result<(), SolveError> {
    *nodes += 1;
    if *nodes & 0xFFF == 0 && started.elapsed() > budget {
        return Err(SolveError::OracleRefusal(format!(
            "time budget of {:.1}s exceeded",
            budget.as_secs_f64()
        )));
    }
    if depth == members.len() {
        if value_so_far > *best_objective {
            *best_objective = value_so_far;
            best_assignment.iter_mut().for_each(|a| *a = None);
            for (d, &i) in members.iter().enumerate() {
                best_assignment[i] = Some(picked[d]);
            }
        }
        return Ok(());
    }
    let choice = &choices[members[depth]];
    'options: for (opt_idx, (_, slice, value)) in choice.options.iter().enumerate() {
        for k in 0..pool.resource_count() {
            if occupied[k] + slice[k] as u64 > pool.capacities[k] as u64 {
                continue 'options;
            }
        }
        for k in 0..pool.resource_count() {
            occupied[k] += slice[k] as u64;
        }
        picked.push(opt_idx);
        let result = dfs(
            choices,
            members,
            depth + 1,
            pool,
            occupied,
            value_so_far + value,
            picked,
            best_objective,
            best_assignment,
            nodes,
            started,
            budget,
        );
        picked.pop();
        for k in 0..pool.resource_count() {
            occupied[k] -= slice[k] as u64;
        }
        result?;
    }
    Ok(())
}
