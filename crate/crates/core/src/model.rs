//! Problem model for semantic flexible edge slicing.
//!
//! An instance couples application classes (accuracy/latency requirements),
//! tasks (periodic inference job streams identified by `(class, device, task)`),
//! and a capacitated pool of priced edge resource types. A solution assigns
//! each task an admission flag, an integer resource slice per type, and a
//! compression scaling factor in `(0, 1]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::perf::ProfileRegistry;

/// System-wide task identity: `(class, device, task)`.
///
/// Ordering is lexicographic on the triple, which defines the "ascending
/// task id" order used by sequential admission and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId {
    pub class: u32,
    pub device: u32,
    pub task: u32,
}

impl TaskId {
    pub fn new(class: u32, device: u32, task: u32) -> Self {
        Self { class, device, task }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.class, self.device, self.task)
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("task id must be 'c:d:t', got {s:?}"));
        }
        let parse = |p: &str| p.parse::<u32>().map_err(|e| format!("bad task id {s:?}: {e}"));
        Ok(TaskId::new(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
    }
}

// Task ids serialize as "c:d:t" so they can key JSON maps.
impl Serialize for TaskId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Deep-learning service family behind an application class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Detection,
    Segmentation,
}

/// An application class: the service, its target object classes, and the
/// accuracy/latency requirements every task of this class must meet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplicationClass {
    pub class_id: u32,
    pub service: ServiceKind,
    pub target_labels: Vec<String>,
    /// Minimum acceptable accuracy (mAP or mIoU) in `[0, 1]`.
    pub accuracy_threshold: f64,
    /// Maximum acceptable end-to-end latency in seconds, `> 0`.
    pub latency_threshold: f64,
    /// Accuracy profile id in the instance registry.
    pub profile_id: String,
    /// Latency model id in the instance registry.
    pub latency_id: String,
    /// Accuracy profile a semantics-blind solver falls back to for this
    /// class (typically the dataset-wide "All" profile).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_profile_id: Option<String>,
}

/// One periodic inference task submitted by a device.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(rename = "task_id")]
    pub id: TaskId,
    /// Jobs generated per second, `> 0`.
    pub fps: f64,
    /// Uncompressed stream size in megabits per job, `> 0`.
    pub base_bitrate: f64,
}

/// The multi-type capacitated resource pool shared by all tasks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourcePool {
    pub names: Vec<String>,
    /// Integer capacity per resource type.
    pub capacities: Vec<u32>,
    /// Positive unit price per resource type.
    pub prices: Vec<f64>,
    /// Enumeration step per resource type (defaults to 1 everywhere).
    #[serde(default)]
    pub allocation_stride: Vec<u32>,
}

impl ResourcePool {
    pub fn new(names: Vec<String>, capacities: Vec<u32>, prices: Vec<f64>) -> Self {
        let strides = vec![1; capacities.len()];
        Self { names, capacities, prices, allocation_stride: strides }
    }

    /// Pool priced so that `p_k * S_k` is the same for every type, with the
    /// largest capacity normalized to unit price. Requires all capacities > 0.
    pub fn equal_priced(names: Vec<String>, capacities: Vec<u32>) -> Self {
        let max = capacities.iter().copied().max().unwrap_or(1).max(1) as f64;
        let prices = capacities.iter().map(|&s| max / (s.max(1) as f64)).collect();
        Self::new(names, capacities, prices)
    }

    pub fn resource_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn stride(&self, k: usize) -> u32 {
        self.allocation_stride.get(k).copied().unwrap_or(1).max(1)
    }
}

/// A full problem instance. Immutable after construction; the registry is
/// embedded so instances round-trip through a single file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub classes: Vec<ApplicationClass>,
    pub tasks: Vec<TaskSpec>,
    pub pool: ResourcePool,
    pub profiles: ProfileRegistry,
}

impl ProblemInstance {
    pub fn class(&self, class_id: u32) -> Option<&ApplicationClass> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    /// Tasks sorted ascending by id.
    pub fn sorted_tasks(&self) -> Vec<&TaskSpec> {
        let mut ts: Vec<&TaskSpec> = self.tasks.iter().collect();
        ts.sort_by_key(|t| t.id);
        ts
    }
}

/// Per-task decision: admission, slice vector, compression factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub admitted: bool,
    pub slice: Vec<u32>,
    pub compression: f64,
}

impl Allocation {
    pub fn rejected(m: usize, compression: f64) -> Self {
        Self { admitted: false, slice: vec![0; m], compression }
    }
}

/// Why a task ended up admitted or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// No compression factor on the profile grid meets the accuracy threshold.
    AccuracyUnreachable,
    /// No slice within full capacities meets the latency threshold.
    LatencyUnreachable,
    /// Latency-feasible slices exist but none fits the remaining capacity.
    CapacityExhausted,
    Admitted,
}

/// A complete slicing decision over an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicingSolution {
    pub allocations: BTreeMap<TaskId, Allocation>,
    /// Value of the priced-spare-capacity objective over admitted tasks.
    pub objective: f64,
    /// Per-type sum of admitted slices.
    pub occupied: Vec<u32>,
    pub diagnostics: BTreeMap<TaskId, RejectReason>,
}

impl SlicingSolution {
    pub fn empty(m: usize) -> Self {
        Self {
            allocations: BTreeMap::new(),
            objective: 0.0,
            occupied: vec![0; m],
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn admitted_count(&self) -> usize {
        self.allocations.values().filter(|a| a.admitted).count()
    }

    pub fn admitted_ids(&self) -> Vec<TaskId> {
        self.allocations
            .iter()
            .filter(|(_, a)| a.admitted)
            .map(|(id, _)| *id)
            .collect()
    }
}

/// Category of a reported violation, for programmatic filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Structure,
    Capacity,
    Compression,
    Accuracy,
    Latency,
    Monotonicity,
}

/// One constraint or invariant violation, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Task the violation is attributed to, when task-specific.
    pub task: Option<TaskId>,
    pub message: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, task: Option<TaskId>, message: impl Into<String>) -> Self {
        Self { kind, task, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Errors from model-level operations.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("solution task set does not match instance: missing [{}], extra [{}]", fmt_ids(missing), fmt_ids(extra))]
    MismatchedTasks { missing: Vec<TaskId>, extra: Vec<TaskId> },
}

fn fmt_ids(ids: &[TaskId]) -> String {
    ids.iter().map(TaskId::to_string).collect::<Vec<_>>().join(", ")
}

/// Checks every structural invariant of an instance. Returns an empty list
/// iff the instance is well formed; violations name the offending entity.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<Violation> {
    use ViolationKind::Structure;
    let mut out = Vec::new();
    let pool = &inst.pool;
    let m = pool.resource_count();

    if m == 0 {
        out.push(Violation::new(Structure, None, "pool must define at least one resource type"));
    }
    if pool.names.len() != m || pool.prices.len() != m {
        out.push(Violation::new(
            Structure,
            None,
            format!(
                "pool vectors must have equal length: {} names, {} capacities, {} prices",
                pool.names.len(),
                m,
                pool.prices.len()
            ),
        ));
    }
    if !pool.allocation_stride.is_empty() && pool.allocation_stride.len() != m {
        out.push(Violation::new(
            Structure,
            None,
            format!("allocation_stride has {} entries, expected {m}", pool.allocation_stride.len()),
        ));
    }
    for (k, &p) in pool.prices.iter().enumerate() {
        if !(p > 0.0) {
            out.push(Violation::new(
                Structure,
                None,
                format!("prices must be positive: resource {k} ({}) has price {p}", name_of(pool, k)),
            ));
        }
    }
    for (k, &s) in pool.allocation_stride.iter().enumerate() {
        if s == 0 {
            out.push(Violation::new(Structure, None, format!("stride must be positive: resource {k}")));
        }
    }

    let mut class_ids = std::collections::BTreeSet::new();
    for cls in &inst.classes {
        if !class_ids.insert(cls.class_id) {
            out.push(Violation::new(Structure, None, format!("duplicate class id {}", cls.class_id)));
        }
        if !(0.0..=1.0).contains(&cls.accuracy_threshold) {
            out.push(Violation::new(
                Structure,
                None,
                format!("class {} accuracy threshold {} outside [0, 1]", cls.class_id, cls.accuracy_threshold),
            ));
        }
        if !(cls.latency_threshold > 0.0) {
            out.push(Violation::new(
                Structure,
                None,
                format!("class {} latency threshold {} must be positive", cls.class_id, cls.latency_threshold),
            ));
        }
        if inst.profiles.accuracy(&cls.profile_id).is_none() {
            out.push(Violation::new(
                Structure,
                None,
                format!("class {} references unknown accuracy profile {:?}", cls.class_id, cls.profile_id),
            ));
        }
        if inst.profiles.latency(&cls.latency_id).is_none() {
            out.push(Violation::new(
                Structure,
                None,
                format!("class {} references unknown latency model {:?}", cls.class_id, cls.latency_id),
            ));
        }
        if let Some(all_id) = &cls.all_profile_id {
            if inst.profiles.accuracy(all_id).is_none() {
                out.push(Violation::new(
                    Structure,
                    None,
                    format!("class {} references unknown fallback profile {:?}", cls.class_id, all_id),
                ));
            }
        }
    }

    let mut task_ids = std::collections::BTreeSet::new();
    for t in &inst.tasks {
        if !task_ids.insert(t.id) {
            out.push(Violation::new(Structure, Some(t.id), format!("duplicate task id {}", t.id)));
        }
        if !class_ids.contains(&t.id.class) {
            out.push(Violation::new(
                Structure,
                Some(t.id),
                format!("task {} references undefined class {}", t.id, t.id.class),
            ));
        }
        if !(t.fps > 0.0) {
            out.push(Violation::new(Structure, Some(t.id), format!("task {} fps must be positive", t.id)));
        }
        if !(t.base_bitrate > 0.0) {
            out.push(Violation::new(
                Structure,
                Some(t.id),
                format!("task {} base bitrate must be positive", t.id),
            ));
        }
    }

    // Registry contents must themselves be valid.
    for v in inst.profiles.validate_all() {
        out.push(v);
    }
    out
}

fn name_of(pool: &ResourcePool, k: usize) -> &str {
    pool.names.get(k).map(String::as_str).unwrap_or("?")
}

/// Evaluates the priced-spare-capacity objective of a solution:
/// the sum over admitted tasks of `sum_k p_k * (S_k - s_k)`.
///
/// Tasks are summed in ascending id order, so the value is independent of
/// map iteration details and stable across runs.
pub fn objective_value(inst: &ProblemInstance, sol: &SlicingSolution) -> Result<f64, ModelError> {
    let inst_ids: std::collections::BTreeSet<TaskId> = inst.tasks.iter().map(|t| t.id).collect();
    let sol_ids: std::collections::BTreeSet<TaskId> = sol.allocations.keys().copied().collect();
    if inst_ids != sol_ids {
        let missing = inst_ids.difference(&sol_ids).copied().collect();
        let extra = sol_ids.difference(&inst_ids).copied().collect();
        return Err(ModelError::MismatchedTasks { missing, extra });
    }

    let pool = &inst.pool;
    let mut total = 0.0;
    for alloc in sol.allocations.values() {
        if !alloc.admitted {
            continue;
        }
        total += slice_value(pool, &alloc.slice);
    }
    Ok(total)
}

/// Priced unused capacity left by one slice: `sum_k p_k * (S_k - s_k)`.
pub fn slice_value(pool: &ResourcePool, slice: &[u32]) -> f64 {
    let mut v = 0.0;
    for k in 0..pool.resource_count() {
        let s = slice.get(k).copied().unwrap_or(0);
        v += pool.prices[k] * (pool.capacities[k] as f64 - s as f64);
    }
    v
}

/// Checks a solution against every problem constraint:
/// per-type capacity, compression domain and grid membership, accuracy
/// threshold, and latency threshold. Returns an empty list iff feasible.
pub fn verify_feasible(inst: &ProblemInstance, sol: &SlicingSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    let pool = &inst.pool;
    let m = pool.resource_count();

    let mut occupied = vec![0u64; m];
    for (id, alloc) in sol.allocations.iter() {
        if alloc.slice.len() != m {
            out.push(Violation::new(
                ViolationKind::Structure,
                Some(*id),
                format!("task {} slice has {} entries, expected {m}", id, alloc.slice.len()),
            ));
            continue;
        }
        if !alloc.admitted {
            if alloc.slice.iter().any(|&s| s != 0) {
                out.push(Violation::new(
                    ViolationKind::Structure,
                    Some(*id),
                    format!("task {} is not admitted but holds a non-zero slice", id),
                ));
            }
            continue;
        }
        for k in 0..m {
            occupied[k] += alloc.slice[k] as u64;
        }

        let Some(task) = inst.tasks.iter().find(|t| t.id == *id) else {
            out.push(Violation::new(
                ViolationKind::Structure,
                Some(*id),
                format!("solution names task {} absent from the instance", id),
            ));
            continue;
        };
        let Some(cls) = inst.class(id.class) else {
            out.push(Violation::new(
                ViolationKind::Structure,
                Some(*id),
                format!("task {} references undefined class {}", id, id.class),
            ));
            continue;
        };

        let z = alloc.compression;
        if !(z > 0.0 && z <= 1.0) {
            out.push(Violation::new(
                ViolationKind::Compression,
                Some(*id),
                format!("task {} compression {z} outside (0, 1]", id),
            ));
        }

        match inst.profiles.accuracy(&cls.profile_id) {
            None => out.push(Violation::new(
                ViolationKind::Structure,
                Some(*id),
                format!("class {} accuracy profile {:?} not loaded", cls.class_id, cls.profile_id),
            )),
            Some(profile) => match profile.eval(z) {
                Err(_) => out.push(Violation::new(
                    ViolationKind::Compression,
                    Some(*id),
                    format!("task {} compression {z} is not on profile {:?} grid", id, cls.profile_id),
                )),
                Ok(acc) => {
                    if acc < cls.accuracy_threshold {
                        out.push(Violation::new(
                            ViolationKind::Accuracy,
                            Some(*id),
                            format!(
                                "task {} accuracy {acc:.4} below threshold {:.4} at compression {z}",
                                id, cls.accuracy_threshold
                            ),
                        ));
                    }
                }
            },
        }

        match inst.profiles.latency(&cls.latency_id) {
            None => out.push(Violation::new(
                ViolationKind::Structure,
                Some(*id),
                format!("class {} latency model {:?} not loaded", cls.class_id, cls.latency_id),
            )),
            Some(model) => {
                let lat = model.eval(z, &alloc.slice, task.fps, task.base_bitrate);
                if !(lat <= cls.latency_threshold) {
                    out.push(Violation::new(
                        ViolationKind::Latency,
                        Some(*id),
                        format!(
                            "task {} latency {lat:.4} exceeds threshold {:.4}",
                            id, cls.latency_threshold
                        ),
                    ));
                }
            }
        }
    }

    for k in 0..m {
        if occupied[k] > pool.capacities[k] as u64 {
            out.push(Violation::new(
                ViolationKind::Capacity,
                None,
                format!(
                    "resource {k} ({}) over capacity: {} > {}",
                    name_of(pool, k),
                    occupied[k],
                    pool.capacities[k]
                ),
            ));
        }
        let recorded = sol.occupied.get(k).copied().unwrap_or(0) as u64;
        if recorded != occupied[k] {
            out.push(Violation::new(
                ViolationKind::Structure,
                None,
                format!(
                    "recorded occupancy {} for resource {k} differs from admitted slice sum {}",
                    recorded, occupied[k]
                ),
            ));
        }
    }
    out
}
