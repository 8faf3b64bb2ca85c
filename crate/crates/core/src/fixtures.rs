//! Bundled fixture data: the default profile registry, a two-task
//! flexibility example, and a testbed-style dynamic scenario.
//!
//! The ten application profiles share one compression grid and are shaped
//! so that each dataset's "All" profile lies pointwise at or below every
//! per-class profile of the same dataset and saturates below the highest
//! accuracy level, while all per-class profiles reach it somewhere on the
//! grid. Threshold-driven behavior differences between semantics-aware and
//! semantics-blind solvers follow from exactly this shape.

use crate::model::ProblemInstance;
use crate::perf::ProfileRegistry;
use crate::sim::ScenarioTimeline;

pub const PROFILES_JSON: &str = include_str!("../fixtures/profiles.json");
pub const FLEX_EXAMPLE_JSON: &str = include_str!("../fixtures/flex_example.json");
pub const TESTBED_INSTANCE_JSON: &str = include_str!("../fixtures/testbed_instance.json");
pub const TESTBED_TIMELINE_JSON: &str = include_str!("../fixtures/testbed_timeline.json");

/// The bundled profile registry: ten application profiles, one demo
/// profile, and the stock latency models.
pub fn default_registry() -> ProfileRegistry {
    ProfileRegistry::from_json_str(PROFILES_JSON, "bundled profiles.json")
        .expect("bundled profile fixture is valid")
}

/// Two identical tasks on a (25 RBG, 4 GPU) pool where minimal-unit
/// allocation strands the second task but balanced allocation fits both.
pub fn flex_example_instance() -> ProblemInstance {
    serde_json::from_str(FLEX_EXAMPLE_JSON).expect("bundled flex example is valid")
}

/// Three task groups on a (15 RBG, 20 GPU) pool with tabulated latency
/// grids per job rate.
pub fn testbed_instance() -> ProblemInstance {
    serde_json::from_str(TESTBED_INSTANCE_JSON).expect("bundled scenario instance is valid")
}

/// Four 25-second periods of job-rate updates for [`testbed_instance`].
pub fn testbed_timeline() -> ScenarioTimeline {
    serde_json::from_str(TESTBED_TIMELINE_JSON).expect("bundled timeline is valid")
}
