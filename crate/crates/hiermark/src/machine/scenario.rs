//! Scenario files: scripted validation outcomes, trace-origin strategy,
//! thresholds and per-methodology knobs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MachineError;
use crate::hierarchy::{Hierarchy, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub phase: String,
    pub index: u32,
    pub attempt: u32,
    #[serde(default)]
    pub failing: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOrigin {
    Fixed(u32),
    Scripted(BTreeMap<u32, u32>),
    DependencyMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub validation_script: Vec<ScriptEntry>,
    pub trace_origin: TraceOrigin,
    /// Nodes flagged as root causes for the dependency-min strategy.
    pub implicated: Vec<NodeId>,
    /// Per-level advance threshold; missing levels default to the level size.
    pub k: BTreeMap<u32, u32>,
    pub r_max: u32,
    pub seed: u64,
    /// Per-node failure probability for unscripted evaluations.
    pub failure_rate: f64,
    /// Optional per-level subsets restricting derived patterns.
    pub patterns: BTreeMap<u32, Vec<NodeId>>,
    /// Nodes whose first dependency check reports a missing dependency.
    pub missing_dependencies: Vec<NodeId>,
    /// Component partition into increments, in delivery order.
    pub increments: Vec<Vec<NodeId>>,
    pub test_failures: BTreeMap<NodeId, u32>,
    pub feedback_cycles: BTreeMap<NodeId, u32>,
    /// Refinement iterations of a component that do not complete.
    pub refine_failures: BTreeMap<NodeId, u32>,
    /// Per increment, the flawed component reported by each failed validation.
    pub validation_failures: BTreeMap<u32, Vec<NodeId>>,
    pub max_refinements: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            validation_script: Vec::new(),
            trace_origin: TraceOrigin::DependencyMin,
            implicated: Vec::new(),
            k: BTreeMap::new(),
            r_max: 3,
            seed: 0,
            failure_rate: 0.0,
            patterns: BTreeMap::new(),
            missing_dependencies: Vec::new(),
            increments: Vec::new(),
            test_failures: BTreeMap::new(),
            feedback_cycles: BTreeMap::new(),
            refine_failures: BTreeMap::new(),
            validation_failures: BTreeMap::new(),
            max_refinements: 3,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, MachineError> {
        serde_json::from_str(text).map_err(|e| MachineError::InvalidScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Adds a scripted failure set.
    pub fn fail(mut self, phase: &str, index: u32, attempt: u32, failing: &[NodeId]) -> Self {
        self.validation_script.push(ScriptEntry {
            phase: phase.to_string(),
            index,
            attempt,
            failing: failing.to_vec(),
        });
        self
    }

    /// Effective threshold for `level`.
    pub fn k_for(&self, h: &Hierarchy, level: u32) -> u32 {
        self.k
            .get(&level)
            .copied()
            .unwrap_or(h.level_idx(level).len() as u32)
    }

    pub fn validate(&self, h: &Hierarchy) -> Result<(), MachineError> {
        let bad = |m: String| Err(MachineError::InvalidScenario(m));
        if self.r_max == 0 {
            return bad("r_max must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return bad(format!("failure_rate {} outside [0, 1]", self.failure_rate));
        }
        for (&level, &k) in &self.k {
            let size = h.level_idx(level).len() as u32;
            if k == 0 || k > size {
                return bad(format!(
                    "K for level {level} is {k}, level has {size} nodes"
                ));
            }
        }
        match &self.trace_origin {
            TraceOrigin::Fixed(0) => return bad("fixed trace origin must be >= 1".into()),
            TraceOrigin::Scripted(map) => {
                for (&i, &j) in map {
                    if j == 0 || j > i {
                        return bad(format!(
                            "scripted trace origin {i} -> {j} violates 1 <= j <= i"
                        ));
                    }
                }
            }
            _ => {}
        }
        for e in &self.validation_script {
            if e.attempt == 0 {
                return bad(format!(
                    "script entry {}/{} has attempt 0",
                    e.phase, e.index
                ));
            }
        }
        Ok(())
    }
}

/// Refinement restart level for a failure at level `i`; `None` when a
/// scripted strategy has no entry for `i`.
pub fn trace_origin(
    strategy: &TraceOrigin,
    i: u32,
    failing: &[NodeId],
    implicated: &[NodeId],
    h: &Hierarchy,
) -> Option<u32> {
    let j = match strategy {
        TraceOrigin::Fixed(j0) => *j0,
        TraceOrigin::Scripted(map) => *map.get(&i)?,
        TraceOrigin::DependencyMin => {
            let flagged: BTreeSet<NodeId> = implicated.iter().copied().collect();
            failing
                .iter()
                .filter_map(|&n| h.idx(n))
                .flat_map(|n| {
                    let mut chain = h.ancestors_idx(n);
                    chain.push(n);
                    chain
                })
                .map(|n| h.at(n))
                .filter(|n| flagged.contains(&n.id))
                .map(|n| n.level)
                .min()
                .unwrap_or(i)
        }
    };
    Some(j.clamp(1, i.max(1)))
}

/// Decides which nodes of a work set fail one evaluation.
pub trait Validator {
    /// `None` means no outcome is scripted for this evaluation.
    fn evaluate(
        &mut self,
        phase: &str,
        index: u32,
        attempt: u32,
        work: &[NodeId],
    ) -> Option<Vec<NodeId>>;
}

/// Script lookups first; unscripted evaluations fall back to a seeded
/// per-node coin when `failure_rate > 0`.
pub struct ScenarioValidator {
    script: HashMap<(String, u32, u32), BTreeSet<NodeId>>,
    rate: f64,
    rng: ChaCha8Rng,
}

impl ScenarioValidator {
    pub fn new(sc: &Scenario) -> Self {
        let mut script: HashMap<(String, u32, u32), BTreeSet<NodeId>> = HashMap::new();
        for e in &sc.validation_script {
            script
                .entry((e.phase.clone(), e.index, e.attempt))
                .or_default()
                .extend(e.failing.iter().copied());
        }
        ScenarioValidator {
            script,
            rate: sc.failure_rate,
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
        }
    }
}

impl Validator for ScenarioValidator {
    fn evaluate(
        &mut self,
        phase: &str,
        index: u32,
        attempt: u32,
        work: &[NodeId],
    ) -> Option<Vec<NodeId>> {
        if let Some(set) = self.script.get(&(phase.to_string(), index, attempt)) {
            return Some(work.iter().copied().filter(|n| set.contains(n)).collect());
        }
        if self.rate > 0.0 {
            let rate = self.rate;
            return Some(
                work.iter()
                    .copied()
                    .filter(|_| self.rng.random_bool(rate))
                    .collect(),
            );
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_strategies() {
        let h = Hierarchy::perfect(2, 5).unwrap();
        assert_eq!(
            trace_origin(&TraceOrigin::Fixed(2), 4, &[], &[], &h),
            Some(2)
        );
        assert_eq!(
            trace_origin(&TraceOrigin::Fixed(5), 3, &[], &[], &h),
            Some(3)
        );
        let map = BTreeMap::from([(3, 1)]);
        assert_eq!(
            trace_origin(&TraceOrigin::Scripted(map.clone()), 3, &[], &[], &h),
            Some(1)
        );
        assert_eq!(
            trace_origin(&TraceOrigin::Scripted(map), 4, &[], &[], &h),
            None
        );
        // node 16 is at level 5; its ancestors are 8 (4), 4 (3), 2 (2), 1 (1)
        let j = trace_origin(&TraceOrigin::DependencyMin, 5, &[16], &[4], &h);
        assert_eq!(j, Some(3));
        let j = trace_origin(&TraceOrigin::DependencyMin, 5, &[16], &[], &h);
        assert_eq!(j, Some(5));
    }

    #[test]
    fn scenario_json_defaults() {
        let sc = Scenario::from_json(r#"{"trace_origin": {"fixed": 2}, "r_max": 60}"#).unwrap();
        assert_eq!(sc.trace_origin, TraceOrigin::Fixed(2));
        assert_eq!(sc.r_max, 60);
        assert_eq!(sc.max_refinements, 3);
        assert!(Scenario::from_json(r#"{"bogus": 1}"#).is_err());
        let sc = Scenario::from_json(r#"{"trace_origin": "dependency_min"}"#).unwrap();
        assert_eq!(sc.trace_origin, TraceOrigin::DependencyMin);
    }

    #[test]
    fn scripted_failures_are_clipped_to_work() {
        let sc = Scenario::default().fail("progress", 2, 1, &[4, 9]);
        let mut v = ScenarioValidator::new(&sc);
        assert_eq!(v.evaluate("progress", 2, 1, &[3, 4]), Some(vec![4]));
        assert_eq!(v.evaluate("progress", 2, 2, &[3, 4]), None);
    }
}
