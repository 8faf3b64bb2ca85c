//! Semantic flexible edge slicing: joint task admission, compression
//! selection, and multi-type resource allocation for edge-assisted
//! inference workloads.
//!
//! The crate provides the problem model and constraint checker, a greedy
//! solver driven by the primal effective gradient, an exact brute-force
//! oracle for small instances, five comparison baselines, a discrete-time
//! re-slicing simulator, and an experiment harness with CSV output.

// Negated comparisons like `!(x > 0.0)` are deliberate: they treat NaN as
// a validation failure. Index loops over parallel per-resource vectors
// read better than zipped iterator chains here.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod candidates;
pub mod exact;
pub mod experiment;
pub mod fixtures;
pub mod greedy;
pub mod model;
pub mod perf;
pub mod sim;
pub mod solvers;

pub use baselines::{
    solve_flexres_nsem, solve_highcomp, solve_highres, solve_minres_sem, solve_sl_edge,
    BaselineConfig,
};
pub use candidates::SolveError;
pub use exact::{gap_report, solve_exact, solve_exact_no_dominance, GapReport, OracleLimits};
pub use greedy::{
    best_allocation, optimal_compression, primal_gradient, solve_greedy, solve_greedy_traced,
    GradientEvaluation,
};
pub use model::{
    objective_value, validate_instance, verify_feasible, Allocation, ApplicationClass,
    ModelError, ProblemInstance, RejectReason, ResourcePool, ServiceKind, SlicingSolution,
    TaskId, TaskSpec, Violation, ViolationKind,
};
pub use perf::{
    load_profiles, AccuracyProfile, LatencyModel, PerfError, ProfileRegistry,
};
pub use sim::{
    export_report, run_dynamic, run_static, EvictionEvent, ScenarioTimeline, SimError, SimReport,
};
pub use solvers::{solve_by_name, solve_with, Algo};
