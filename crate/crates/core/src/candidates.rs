//! Enumeration of latency-feasible slice candidates for one task.
//!
//! Every solver picks its slice by optimizing some figure of merit over the
//! integer allocation grid `prod_k {0, stride_k, ..., S_k}` restricted to
//! latency-feasible points. All merits used in this crate (primal gradient,
//! unit count, priced cost) are strictly worse at a point that allocates
//! more of any resource without need, so it suffices to enumerate points
//! that are minimal in the pivot coordinate for each combination of the
//! remaining coordinates: for parametric models the smallest network
//! allocation that meets the latency bound, for tabulated models the
//! defined grid entries themselves. This keeps results identical to a full
//! grid sweep while touching a tiny fraction of it.
//!
//! Feasibility is decided solely by [`LatencyModel::eval`]`(z, s, fps, b) <=
//! l_max`, the same evaluation used when verifying solutions, so the search
//! and the checker can never disagree. Closed-form predictions are only
//! used to seed the pivot scan and are corrected by direct evaluation.

use crate::model::{ResourcePool, TaskId, Violation};
use crate::perf::LatencyModel;

/// Guard against combinatorial blow-up: instances whose full allocation
/// grid exceeds this many points per task are rejected outright.
pub const DEFAULT_GRID_BUDGET: u128 = 1_000_000;

/// Errors surfaced by solvers.
#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("instance failed validation:\n{}", format_violations(.0))]
    InvalidInstance(Vec<Violation>),
    #[error("allocation grid for task {task} has {size} points, above the budget of {budget}")]
    GridBudgetExceeded { task: TaskId, size: u128, budget: u128 },
    #[error("task {task} references class {class} with no definition")]
    UnknownClass { task: TaskId, class: u32 },
    #[error("profile lookup failed: {0}")]
    Perf(#[from] crate::perf::PerfError),
    #[error("compression factor {z} required by the solver is not on profile {profile:?} grid")]
    FixedCompressionOffGrid { profile: String, z: f64 },
    #[error("no semantics-blind fallback profile configured for class {class}")]
    MissingAllProfile { class: u32 },
    #[error("primal gradient is undefined for an all-zero slice")]
    ZeroSlice,
    #[error("unknown solver name {0:?}")]
    UnknownAlgorithm(String),
    #[error("oracle refused: {0}")]
    OracleRefusal(String),
    #[error("bad solver configuration: {0}")]
    InvalidConfig(String),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

/// One latency-feasible allocation option for a task at a fixed
/// compression factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub slice: Vec<u32>,
    pub latency: f64,
    /// `sum_k p_k * s_k`, the tie-break cost.
    pub priced_cost: f64,
    /// `sum_k s_k`, the unit count minimized by min-resource policies.
    pub units: u64,
}

impl Candidate {
    fn new(pool: &ResourcePool, slice: Vec<u32>, latency: f64) -> Self {
        let priced_cost =
            slice.iter().zip(&pool.prices).map(|(&s, &p)| p * s as f64).sum();
        let units = slice.iter().map(|&s| s as u64).sum();
        Self { slice, latency, priced_cost, units }
    }

    pub fn fits(&self, remaining: &[u32]) -> bool {
        self.slice.iter().zip(remaining).all(|(&s, &r)| s <= r)
    }
}

/// Number of points in the full allocation grid for this pool.
pub fn full_grid_size(pool: &ResourcePool) -> u128 {
    let mut size: u128 = 1;
    for k in 0..pool.resource_count() {
        let steps = (pool.capacities[k] / pool.stride(k)) as u128 + 1;
        size = size.saturating_mul(steps);
    }
    size
}

/// Enumerates the latency-feasible candidates for one task at compression
/// `z`, within the pool's full capacities. The all-zero slice is never a
/// candidate. Results are sorted by slice, lexicographically ascending.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_candidates(
    pool: &ResourcePool,
    model: &LatencyModel,
    task: TaskId,
    z: f64,
    fps: f64,
    bitrate: f64,
    l_max: f64,
    grid_budget: u128,
) -> Result<Vec<Candidate>, SolveError> {
    let size = full_grid_size(pool);
    if size > grid_budget {
        return Err(SolveError::GridBudgetExceeded { task, size, budget: grid_budget });
    }
    let m = pool.resource_count();
    let mut out = Vec::new();

    match model {
        LatencyModel::Tabulated(t) => {
            for e in &t.entries {
                if e.slice.len() != m || e.slice.iter().all(|&s| s == 0) {
                    continue;
                }
                if e.slice.iter().zip(&pool.capacities).any(|(&s, &cap)| s > cap) {
                    continue;
                }
                let lat = model.eval(z, &e.slice, fps, bitrate);
                if lat <= l_max {
                    out.push(Candidate::new(pool, e.slice.clone(), lat));
                }
            }
            out.sort_by(|a, b| a.slice.cmp(&b.slice));
        }
        LatencyModel::Parametric(p) => {
            let required = model.required_indices(m);
            // Pivot on the network resource when it carries load, otherwise
            // on the first required resource; with no terms at all any
            // single resource at one stride supports the task.
            let pivot = if p.network_coeff > 0.0 {
                Some(p.network_index)
            } else {
                required.iter().position(|&r| r)
            };
            let Some(pivot) = pivot else {
                if p.fixed_seconds <= l_max {
                    for k in 0..m {
                        let stride = pool.stride(k);
                        if stride <= pool.capacities[k] {
                            let mut slice = vec![0; m];
                            slice[k] = stride;
                            let lat = model.eval(z, &slice, fps, bitrate);
                            out.push(Candidate::new(pool, slice, lat));
                        }
                    }
                }
                out.sort_by(|a, b| a.slice.cmp(&b.slice));
                return Ok(out);
            };
            if pivot >= m {
                return Ok(out);
            }

            // Every non-pivot coordinate ranges over its stride grid,
            // starting at one stride when the resource is required.
            let rest: Vec<usize> = (0..m).filter(|&k| k != pivot).collect();
            let mut slice = vec![0u32; m];
            enumerate_rest(
                pool, model, z, fps, bitrate, l_max, pivot, &rest, &required, 0, &mut slice,
                &mut out,
            );
            out.sort_by(|a, b| a.slice.cmp(&b.slice));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rest(
    pool: &ResourcePool,
    model: &LatencyModel,
    z: f64,
    fps: f64,
    bitrate: f64,
    l_max: f64,
    pivot: usize,
    rest: &[usize],
    required: &[bool],
    depth: usize,
    slice: &mut Vec<u32>,
    out: &mut Vec<Candidate>,
) {
    if depth == rest.len() {
        if let Some(cand) = minimal_pivot(pool, model, z, fps, bitrate, l_max, pivot, slice) {
            out.push(cand);
        }
        return;
    }
    let k = rest[depth];
    let stride = pool.stride(k);
    let start = if required[k] { stride } else { 0 };
    let mut v = start;
    loop {
        if v > pool.capacities[k] {
            break;
        }
        slice[k] = v;
        enumerate_rest(pool, model, z, fps, bitrate, l_max, pivot, rest, required, depth + 1, slice, out);
        if v == 0 {
            v = stride;
        } else {
            match v.checked_add(stride) {
                Some(next) => v = next,
                None => break,
            }
        }
    }
    slice[k] = 0;
}

/// Finds the smallest pivot allocation making `slice` latency-feasible,
/// seeding the scan with the closed-form prediction and correcting it by
/// direct evaluation so boundary cases match `eval` exactly.
#[allow(clippy::too_many_arguments)]
fn minimal_pivot(
    pool: &ResourcePool,
    model: &LatencyModel,
    z: f64,
    fps: f64,
    bitrate: f64,
    l_max: f64,
    pivot: usize,
    slice: &mut Vec<u32>,
) -> Option<Candidate> {
    let stride = pool.stride(pivot);
    let cap = pool.capacities[pivot];
    if stride > cap {
        return None;
    }
    let feasible = |slice: &mut Vec<u32>, v: u32| -> Option<f64> {
        slice[pivot] = v;
        let lat = model.eval(z, slice, fps, bitrate);
        if lat <= l_max {
            Some(lat)
        } else {
            None
        }
    };

    let guess = match model {
        LatencyModel::Parametric(p) => {
            slice[pivot] = 1;
            let with_unit = model.eval(z, slice, fps, bitrate);
            if with_unit.is_infinite() {
                // Some other required resource is zero on this branch.
                slice[pivot] = 0;
                return None;
            }
            let g = p.fps_factor.as_ref().map_or(1.0, |t| t.eval(fps));
            let load = p.network_coeff * z * bitrate * g;
            let room = l_max - (with_unit - load);
            if room <= 0.0 {
                slice[pivot] = 0;
                return None;
            }
            let raw = (load / room).ceil().max(1.0);
            if raw > cap as f64 {
                cap
            } else {
                raw as u32
            }
        }
        LatencyModel::Tabulated(_) => unreachable!("tabulated models enumerate their entries"),
    };

    // Round up to the stride grid, then correct against direct evaluation.
    let mut v = guess.div_ceil(stride).max(1) * stride;
    if v > cap {
        v = (cap / stride) * stride;
    }
    if v < stride {
        return None;
    }
    let mut lat = feasible(slice, v);
    if lat.is_some() {
        while v > stride {
            match feasible(slice, v - stride) {
                Some(l) => {
                    v -= stride;
                    lat = Some(l);
                }
                None => break,
            }
        }
    } else {
        while lat.is_none() {
            let next = v.saturating_add(stride);
            if next > cap {
                slice[pivot] = 0;
                return None;
            }
            v = next;
            lat = feasible(slice, v);
        }
    }
    slice[pivot] = v;
    let cand = Candidate::new(pool, slice.clone(), lat.unwrap());
    slice[pivot] = 0;
    Some(cand)
}
