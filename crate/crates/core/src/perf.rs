//! Data-driven accuracy and latency functions.
//!
//! Accuracy is a tabulated, non-decreasing function of the compression
//! scaling factor alone; latency depends on compression, the allocated
//! slice, the job rate, and the stream size. Both are defined only on
//! discrete grids: querying an accuracy profile off its grid is an error
//! rather than an interpolation, and a tabulated latency model treats a
//! missing grid point as infeasible (infinite latency).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Violation, ViolationKind};

/// Tolerance for matching a query against a tabulated grid point.
pub const GRID_EPS: f64 = 1e-9;

/// Errors from evaluating or loading performance functions.
#[derive(Debug, thiserror::Error)]
pub enum PerfError {
    #[error("off-grid compression factor {z} for profile {profile}")]
    OffGridCompression { profile: String, z: f64 },
    #[error("unknown profile id {0:?}")]
    UnknownId(String),
    #[error("profile data rejected: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("failed to parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

/// Tabulated accuracy over an ascending compression grid in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyProfile {
    pub profile_id: String,
    pub z_grid: Vec<f64>,
    pub accuracy: Vec<f64>,
}

impl AccuracyProfile {
    /// Index of `z` on the grid, within [`GRID_EPS`].
    pub fn grid_index(&self, z: f64) -> Option<usize> {
        self.z_grid.iter().position(|&g| (g - z).abs() <= GRID_EPS)
    }

    /// Tabulated accuracy at a grid point; off-grid queries are errors.
    pub fn eval(&self, z: f64) -> Result<f64, PerfError> {
        match self.grid_index(z) {
            Some(i) => Ok(self.accuracy[i]),
            None => Err(PerfError::OffGridCompression { profile: self.profile_id.clone(), z }),
        }
    }

    /// Largest accuracy the profile reaches anywhere on its grid.
    pub fn max_accuracy(&self) -> f64 {
        self.accuracy.iter().copied().fold(0.0, f64::max)
    }

    /// Monotonicity and domain checks; empty iff the profile is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mono = ViolationKind::Monotonicity;
        if self.z_grid.is_empty() || self.z_grid.len() != self.accuracy.len() {
            out.push(Violation::new(
                ViolationKind::Structure,
                None,
                format!(
                    "profile {:?}: grid has {} points but {} accuracy values",
                    self.profile_id,
                    self.z_grid.len(),
                    self.accuracy.len()
                ),
            ));
            return out;
        }
        for (i, &z) in self.z_grid.iter().enumerate() {
            if !(z > 0.0 && z <= 1.0) {
                out.push(Violation::new(
                    ViolationKind::Structure,
                    None,
                    format!("profile {:?}: grid point {z} at index {i} outside (0, 1]", self.profile_id),
                ));
            }
            if i > 0 && !(z > self.z_grid[i - 1]) {
                out.push(Violation::new(
                    ViolationKind::Structure,
                    None,
                    format!("profile {:?}: grid not strictly ascending at index {i}", self.profile_id),
                ));
            }
        }
        for (i, &a) in self.accuracy.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                out.push(Violation::new(
                    ViolationKind::Structure,
                    None,
                    format!("profile {:?}: accuracy {a} at index {i} outside [0, 1]", self.profile_id),
                ));
            }
            if i > 0 && a < self.accuracy[i - 1] {
                out.push(Violation::new(
                    mono,
                    None,
                    format!("profile {:?}: accuracy decreases at index {i}", self.profile_id),
                ));
            }
        }
        out
    }
}

/// Optional tabulated adjustment factor over the job rate; evaluated by
/// linear interpolation with clamped ends. Identity when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsTable {
    pub fps: Vec<f64>,
    pub factor: Vec<f64>,
}

impl FpsTable {
    pub fn eval(&self, fps: f64) -> f64 {
        if self.fps.is_empty() {
            return 1.0;
        }
        if fps <= self.fps[0] {
            return self.factor[0];
        }
        let last = self.fps.len() - 1;
        if fps >= self.fps[last] {
            return self.factor[last];
        }
        let i = self.fps.iter().rposition(|&f| f <= fps).unwrap();
        let (f0, f1) = (self.fps[i], self.fps[i + 1]);
        let (y0, y1) = (self.factor[i], self.factor[i + 1]);
        y0 + (fps - f0) * (y1 - y0) / (f1 - f0)
    }
}

/// One hyperbolic compute term `coeff / s[index]` of a parametric model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeTerm {
    pub index: usize,
    pub coeff: f64,
}

/// Closed-form latency:
/// `l(z, s, fps, b) = network_coeff * z * b * g(fps) / s[net] + sum_j coeff_j / s[idx_j] + fixed`.
///
/// Any resource carrying a positive term is required: a zero allocation
/// there yields infinite latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricLatency {
    pub id: String,
    /// Seconds * allocation-units per megabit on the network resource.
    pub network_coeff: f64,
    pub network_index: usize,
    #[serde(default)]
    pub compute_terms: Vec<ComputeTerm>,
    #[serde(default)]
    pub fixed_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps_factor: Option<FpsTable>,
}

/// One tabulated latency point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabEntry {
    pub z: f64,
    pub slice: Vec<u32>,
    pub fps: f64,
    pub seconds: f64,
}

/// Explicit latency grid over `(z, slice, fps)`. Points not in the table
/// are infeasible; resources listed in `required` must be non-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedLatency {
    pub id: String,
    #[serde(default)]
    pub required: Vec<usize>,
    pub entries: Vec<TabEntry>,
}

/// A latency function, either closed-form or tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Parametric(ParametricLatency),
    Tabulated(TabulatedLatency),
}

impl LatencyModel {
    pub fn id(&self) -> &str {
        match self {
            LatencyModel::Parametric(p) => &p.id,
            LatencyModel::Tabulated(t) => &t.id,
        }
    }

    /// Latency in seconds, or `f64::INFINITY` when the allocation cannot
    /// support the task (required resource at zero, or off-table point).
    pub fn eval(&self, z: f64, slice: &[u32], fps: f64, bitrate: f64) -> f64 {
        match self {
            LatencyModel::Parametric(p) => {
                let mut total = p.fixed_seconds;
                if p.network_coeff > 0.0 {
                    let s = slice.get(p.network_index).copied().unwrap_or(0);
                    if s == 0 {
                        return f64::INFINITY;
                    }
                    let g = p.fps_factor.as_ref().map_or(1.0, |t| t.eval(fps));
                    total += p.network_coeff * z * bitrate * g / s as f64;
                }
                for term in &p.compute_terms {
                    if term.coeff <= 0.0 {
                        continue;
                    }
                    let s = slice.get(term.index).copied().unwrap_or(0);
                    if s == 0 {
                        return f64::INFINITY;
                    }
                    total += term.coeff / s as f64;
                }
                total
            }
            LatencyModel::Tabulated(t) => {
                for &k in &t.required {
                    if slice.get(k).copied().unwrap_or(0) == 0 {
                        return f64::INFINITY;
                    }
                }
                for e in &t.entries {
                    if (e.z - z).abs() <= GRID_EPS
                        && (e.fps - fps).abs() <= GRID_EPS
                        && e.slice == slice
                    {
                        return e.seconds;
                    }
                }
                f64::INFINITY
            }
        }
    }

    /// Resource indices that must receive a non-zero allocation.
    pub fn required_indices(&self, m: usize) -> Vec<bool> {
        let mut req = vec![false; m];
        match self {
            LatencyModel::Parametric(p) => {
                if p.network_coeff > 0.0 && p.network_index < m {
                    req[p.network_index] = true;
                }
                for term in &p.compute_terms {
                    if term.coeff > 0.0 && term.index < m {
                        req[term.index] = true;
                    }
                }
            }
            LatencyModel::Tabulated(t) => {
                for &k in &t.required {
                    if k < m {
                        req[k] = true;
                    }
                }
            }
        }
        req
    }

    /// Monotonicity checks: latency must never decrease in `z` and never
    /// increase in any slice coordinate. Parametric models are checked by
    /// coefficient sign; tabulated models exhaustively over their grid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mono = ViolationKind::Monotonicity;
        match self {
            LatencyModel::Parametric(p) => {
                if p.network_coeff < 0.0 {
                    out.push(Violation::new(
                        mono,
                        None,
                        format!("model {:?}: latency decreasing in z (network coefficient {})", p.id, p.network_coeff),
                    ));
                }
                for term in &p.compute_terms {
                    if term.coeff < 0.0 {
                        out.push(Violation::new(
                            mono,
                            None,
                            format!(
                                "model {:?}: latency increasing in resource {} (coefficient {})",
                                p.id, term.index, term.coeff
                            ),
                        ));
                    }
                }
                if p.fixed_seconds < 0.0 {
                    out.push(Violation::new(
                        ViolationKind::Structure,
                        None,
                        format!("model {:?}: negative fixed latency", p.id),
                    ));
                }
                if let Some(t) = &p.fps_factor {
                    if t.fps.len() != t.factor.len() || t.factor.iter().any(|&f| !(f > 0.0)) {
                        out.push(Violation::new(
                            ViolationKind::Structure,
                            None,
                            format!("model {:?}: fps table must be positive and aligned", p.id),
                        ));
                    }
                }
            }
            LatencyModel::Tabulated(t) => {
                for (i, e) in t.entries.iter().enumerate() {
                    if !(e.z > 0.0 && e.z <= 1.0) {
                        out.push(Violation::new(
                            ViolationKind::Structure,
                            None,
                            format!("model {:?}: entry {i} has z {} outside (0, 1]", t.id, e.z),
                        ));
                    }
                    if !(e.seconds >= 0.0) {
                        out.push(Violation::new(
                            ViolationKind::Structure,
                            None,
                            format!("model {:?}: entry {i} has negative latency", t.id),
                        ));
                    }
                }
                for (i, a) in t.entries.iter().enumerate() {
                    for b in t.entries.iter().skip(i + 1) {
                        if (a.fps - b.fps).abs() > GRID_EPS {
                            continue;
                        }
                        let same_z = (a.z - b.z).abs() <= GRID_EPS;
                        if same_z && a.slice == b.slice {
                            out.push(Violation::new(
                                ViolationKind::Structure,
                                None,
                                format!("model {:?}: duplicate grid point for slice {:?}", t.id, a.slice),
                            ));
                            continue;
                        }
                        if a.slice == b.slice {
                            // Same slice, different z: seconds must follow z.
                            let (lo, hi) = if a.z < b.z { (a, b) } else { (b, a) };
                            if hi.seconds < lo.seconds {
                                out.push(Violation::new(
                                    mono,
                                    None,
                                    format!(
                                        "model {:?}: latency decreasing in z at slice {:?} ({} -> {})",
                                        t.id, a.slice, lo.z, hi.z
                                    ),
                                ));
                            }
                        } else if same_z {
                            // Differ in exactly one coordinate: seconds must
                            // not increase with the larger allocation.
                            if let Some(k) = single_diff(&a.slice, &b.slice) {
                                let (lo, hi) = if a.slice[k] < b.slice[k] { (a, b) } else { (b, a) };
                                if hi.seconds > lo.seconds {
                                    out.push(Violation::new(
                                        mono,
                                        None,
                                        format!(
                                            "model {:?}: latency increasing in resource {k} near slice {:?}",
                                            t.id, lo.slice
                                        ),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn single_diff(a: &[u32], b: &[u32]) -> Option<usize> {
    if a.len() != b.len() {
        return None;
    }
    let mut found = None;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            if found.is_some() {
                return None;
            }
            found = Some(k);
        }
    }
    found
}

/// All loaded accuracy profiles and latency models, keyed by id.
/// Immutable after load; shared read-only by every solver.
///
/// Serializes as the fixture-file shape: two arrays keyed
/// `accuracy_profiles` and `latency_models`. Duplicate ids are rejected
/// when deserializing; monotonicity is checked by the load/validate paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileRegistry {
    pub accuracy_profiles: BTreeMap<String, AccuracyProfile>,
    pub latency_models: BTreeMap<String, LatencyModel>,
}

/// On-disk shape of a profile fixture file.
#[derive(Debug, Serialize, Deserialize)]
struct ProfileFile {
    #[serde(default)]
    accuracy_profiles: Vec<AccuracyProfile>,
    #[serde(default)]
    latency_models: Vec<LatencyModel>,
}

impl Serialize for ProfileRegistry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let file = ProfileFile {
            accuracy_profiles: self.accuracy_profiles.values().cloned().collect(),
            latency_models: self.latency_models.values().cloned().collect(),
        };
        file.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProfileRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let file = ProfileFile::deserialize(deserializer)?;
        let mut reg = ProfileRegistry::default();
        for p in file.accuracy_profiles {
            let id = p.profile_id.clone();
            if reg.accuracy_profiles.insert(id.clone(), p).is_some() {
                return Err(D::Error::custom(format!("duplicate profile id {id:?}")));
            }
        }
        for l in file.latency_models {
            let id = l.id().to_string();
            if reg.latency_models.insert(id.clone(), l).is_some() {
                return Err(D::Error::custom(format!("duplicate latency model id {id:?}")));
            }
        }
        Ok(reg)
    }
}

impl ProfileRegistry {
    pub fn accuracy(&self, id: &str) -> Option<&AccuracyProfile> {
        self.accuracy_profiles.get(id)
    }

    pub fn latency(&self, id: &str) -> Option<&LatencyModel> {
        self.latency_models.get(id)
    }

    pub fn require_accuracy(&self, id: &str) -> Result<&AccuracyProfile, PerfError> {
        self.accuracy(id).ok_or_else(|| PerfError::UnknownId(id.to_string()))
    }

    pub fn require_latency(&self, id: &str) -> Result<&LatencyModel, PerfError> {
        self.latency(id).ok_or_else(|| PerfError::UnknownId(id.to_string()))
    }

    pub fn validate_all(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for p in self.accuracy_profiles.values() {
            out.extend(p.validate());
        }
        for l in self.latency_models.values() {
            out.extend(l.validate());
        }
        out
    }

    /// Parses and fully validates a registry from fixture-file JSON.
    /// Duplicate ids, parse failures, and monotonicity violations are all
    /// rejected with the offending id in the message.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, PerfError> {
        let reg: ProfileRegistry = serde_json::from_str(text)
            .map_err(|source| PerfError::Parse { path: origin.to_string(), source })?;
        let violations = reg.validate_all();
        if !violations.is_empty() {
            return Err(PerfError::Invalid(
                violations.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; "),
            ));
        }
        Ok(reg)
    }

    /// Writes the registry back out in the fixture file shape.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serialization cannot fail")
    }

    /// CSV export of every accuracy profile as `profile_id,z,accuracy` rows.
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("profile_id,z,accuracy\n");
        for p in self.accuracy_profiles.values() {
            for (z, a) in p.z_grid.iter().zip(&p.accuracy) {
                out.push_str(&format!("{},{},{}\n", p.profile_id, z, a));
            }
        }
        out
    }
}

/// Loads and validates a profile fixture file.
pub fn load_profiles(path: &Path) -> Result<ProfileRegistry, PerfError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PerfError::Io { path: path.display().to_string(), source })?;
    ProfileRegistry::from_json_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn demo_person() -> AccuracyProfile {
        fixtures::default_registry().accuracy("DEMO-Person").unwrap().clone()
    }

    #[test]
    fn accuracy_lookup_on_grid() {
        let p = demo_person();
        assert_eq!(p.eval(0.28).unwrap(), 0.50);
        assert_eq!(p.eval(1.0).unwrap(), 0.62);
    }

    #[test]
    fn accuracy_lookup_off_grid_is_error() {
        let p = demo_person();
        let err = p.eval(0.30).unwrap_err();
        assert!(err.to_string().contains("off-grid"));
    }

    #[test]
    fn flex_latency_matches_designed_boundaries() {
        let reg = fixtures::default_registry();
        let m = reg.latency("l-flex").unwrap();
        // The model is built so both (6,3) and (10,2) land on the 0.4 s
        // boundary (to four decimals) at z = 1 with a 1 Mb stream.
        let a = m.eval(1.0, &[6, 3], 10.0, 1.0);
        let b = m.eval(1.0, &[10, 2], 10.0, 1.0);
        assert!((a - 0.4).abs() < 5e-4, "got {a}");
        assert!((b - 0.4).abs() < 5e-4, "got {b}");
        assert!(a <= 0.4 && b <= 0.4);
        let half = m.eval(0.5, &[6, 3], 10.0, 1.0);
        assert!((half - 0.2889).abs() < 5e-4, "got {half}");
    }

    #[test]
    fn zero_required_resource_is_infeasible() {
        let reg = fixtures::default_registry();
        let m = reg.latency("l-flex").unwrap();
        assert!(m.eval(1.0, &[6, 0], 10.0, 1.0).is_infinite());
        assert!(m.eval(1.0, &[0, 3], 10.0, 1.0).is_infinite());
    }

    #[test]
    fn non_monotone_profile_is_rejected() {
        let p = AccuracyProfile {
            profile_id: "bad".into(),
            z_grid: vec![0.1, 0.5, 1.0],
            accuracy: vec![0.3, 0.2, 0.4],
        };
        let vs = p.validate();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("index 1"));
    }

    #[test]
    fn negative_network_coefficient_is_rejected() {
        let m = LatencyModel::Parametric(ParametricLatency {
            id: "bad".into(),
            network_coeff: -1.0,
            network_index: 0,
            compute_terms: vec![],
            fixed_seconds: 0.0,
            fps_factor: None,
        });
        let vs = m.validate();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("decreasing in z"));
    }

    #[test]
    fn tabulated_monotonicity_checked_over_grid() {
        let m = LatencyModel::Tabulated(TabulatedLatency {
            id: "tab".into(),
            required: vec![0],
            entries: vec![
                TabEntry { z: 0.5, slice: vec![2, 1], fps: 10.0, seconds: 0.30 },
                TabEntry { z: 0.5, slice: vec![3, 1], fps: 10.0, seconds: 0.40 },
            ],
        });
        let vs = m.validate();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("increasing in resource 0"));
    }

    #[test]
    fn tabulated_eval_exact_match_only() {
        let m = LatencyModel::Tabulated(TabulatedLatency {
            id: "tab".into(),
            required: vec![0],
            entries: vec![TabEntry { z: 0.5, slice: vec![2, 1], fps: 10.0, seconds: 0.30 }],
        });
        assert_eq!(m.eval(0.5, &[2, 1], 10.0, 1.0), 0.30);
        assert!(m.eval(0.5, &[2, 1], 20.0, 1.0).is_infinite());
        assert!(m.eval(0.5, &[2, 2], 10.0, 1.0).is_infinite());
    }

    #[test]
    fn bundled_fixture_has_expected_shape() {
        let reg = fixtures::default_registry();
        assert!(reg.accuracy_profiles.len() >= 10, "{} profiles", reg.accuracy_profiles.len());
        assert!(reg.latency_models.len() >= 2, "{} models", reg.latency_models.len());
        assert!(reg.validate_all().is_empty());
    }

    #[test]
    fn duplicate_profile_id_rejected_at_load() {
        let text = r#"{"accuracy_profiles": [
            {"profile_id": "p", "z_grid": [0.5, 1.0], "accuracy": [0.1, 0.2]},
            {"profile_id": "p", "z_grid": [0.5, 1.0], "accuracy": [0.1, 0.2]}
        ], "latency_models": []}"#;
        let err = ProfileRegistry::from_json_str(text, "inline").unwrap_err();
        assert!(err.to_string().contains("duplicate profile id \"p\""), "{err}");
    }

    #[test]
    fn non_monotone_fixture_rejected_at_load() {
        let text = r#"{"accuracy_profiles": [
            {"profile_id": "p", "z_grid": [0.5, 1.0], "accuracy": [0.3, 0.2]}
        ], "latency_models": []}"#;
        let err = ProfileRegistry::from_json_str(text, "inline").unwrap_err();
        assert!(err.to_string().contains("decreases"));
    }

    #[test]
    fn fps_table_interpolates_and_clamps() {
        let t = FpsTable { fps: vec![5.0, 10.0], factor: vec![2.0, 1.0] };
        assert_eq!(t.eval(1.0), 2.0);
        assert_eq!(t.eval(30.0), 1.0);
        assert_eq!(t.eval(7.5), 1.5);
    }

    proptest::proptest! {
        // Validated parametric models are monotone: never better with more
        // compression quality, never worse with more resources.
        #[test]
        fn parametric_models_are_monotone(
            s1 in 1u32..20, s2 in 1u32..20, zi in 0usize..6, bump in 0usize..2,
        ) {
            let reg = fixtures::default_registry();
            let m = reg.latency("l-det-2d").unwrap();
            let grid = [0.04, 0.08, 0.14, 0.18, 0.28, 0.47];
            let (z, z_next) = (grid[zi], grid[(zi + 1).min(5)]);
            let slice = [s1, s2];
            let base = m.eval(z, &slice, 10.0, 0.8);
            proptest::prop_assert!(m.eval(z_next, &slice, 10.0, 0.8) >= base);
            let mut bigger = slice;
            bigger[bump] += 1;
            proptest::prop_assert!(m.eval(z, &bigger, 10.0, 0.8) <= base);
        }
    }
}
