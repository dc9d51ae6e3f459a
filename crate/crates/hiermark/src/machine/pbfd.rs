//! Pattern-wise breadth-first machine: whole-pattern finalization gates each
//! descent, failures backtrack to the trace origin and refine level by level
//! back down to the failing pattern.

use std::collections::{BTreeMap, BTreeSet};

use crate::hierarchy::{Hierarchy, NodeId, NodeStatus};
use crate::trace::{Measure, Methodology};

use super::hybrid::{drive, ev, Core, Fired, Stepper};
use super::{
    trace_length_cap, FailureReason, MachineError, Outcome, Phase, Run, Scenario,
    ScenarioValidator, Validator,
};

#[derive(Debug, Clone)]
pub struct PbfdEngine<'a> {
    core: Core<'a>,
    patterns: BTreeMap<u32, Vec<NodeId>>,
    /// Failures found while processing, reused when validation is unscripted.
    carried: Vec<NodeId>,
}

impl<'a> PbfdEngine<'a> {
    pub fn new(h: &'a Hierarchy, sc: &'a Scenario) -> Result<Self, MachineError> {
        Ok(PbfdEngine {
            core: Core::new(h, sc)?,
            patterns: BTreeMap::new(),
            carried: Vec::new(),
        })
    }

    pub fn patterns(&self) -> &BTreeMap<u32, Vec<NodeId>> {
        &self.patterns
    }

    fn pattern(&self, level: u32) -> Vec<NodeId> {
        self.patterns
            .get(&level)
            .cloned()
            .unwrap_or_else(|| self.core.h.level_ids(level))
    }

    /// Unfinalized children of the pattern, restricted to the scripted subset.
    fn next_pattern(&self, level: u32) -> Vec<NodeId> {
        let c = &self.core;
        let subset: Option<BTreeSet<NodeId>> =
            c.sc.patterns
                .get(&(level + 1))
                .map(|p| p.iter().copied().collect());
        let mut out: Vec<NodeId> = self
            .pattern(level)
            .iter()
            .flat_map(|&p| c.h.children_idx(c.h.idx(p).expect("known node")).to_vec())
            .filter(|&n| c.committed[n] != NodeStatus::Finalized)
            .map(|n| c.h.at(n).id)
            .filter(|id| subset.as_ref().is_none_or(|s| s.contains(id)))
            .collect();
        out.sort_unstable();
        out
    }

    fn measure_at(&self, phase: Phase) -> Measure {
        let c = &self.core;
        let l = c.levels as u64;
        let (k3, k4) = match phase {
            Phase::S0 => (3, c.h.level_idx(1).len() as u64),
            Phase::S1(i) => (3, self.pattern(i).len() as u64),
            Phase::S2(_) => (2, 0),
            Phase::S1R(j, _) => (3, self.pattern(j).len() as u64 + 1),
            Phase::S2R(..) => (2, 1),
            Phase::S3(i) => (1, l - i as u64),
            Phase::S3R(j, _) => (1, l - j as u64 + 1),
            Phase::S4(k) => (0, l - k as u64),
            Phase::S5 | Phase::T => (0, 0),
        };
        c.measure(k3, k4)
    }

    fn fire(&mut self, rule: &str, to: Phase, pre: Measure, f: Fired) {
        let post = self.measure_at(to);
        self.core.emit(rule, to, pre, post, f);
    }

    fn fail(&mut self, rule: &str, pre: Measure, reason: FailureReason, mut f: Fired) {
        f.reason = Some(reason.to_string());
        self.core.outcome = Some(Outcome::Error(reason));
        self.fire(rule, Phase::S5, pre, f);
    }

    fn step_inner(&mut self, v: &mut dyn Validator) {
        let phase = self.core.phase;
        let pre = self.measure_at(phase);
        let l = self.core.levels;
        let r_max = self.core.sc.r_max;
        match phase {
            Phase::S0 => {
                self.patterns.insert(1, self.core.h.level_ids(1));
                let f = Fired {
                    csp: vec![
                        "load_tree_actual".into(),
                        "initialize_refinement_attempts_actual".into(),
                    ],
                    ..Fired::default()
                };
                self.fire("PB1", Phase::S1(1), pre, f);
            }
            Phase::S1(i) => {
                let pattern = self.pattern(i);
                self.core.set(&pattern, NodeStatus::InProgress);
                let failing = self.core.eval(v, "process", i, &pattern);
                let mut f = Fired {
                    level: Some(i),
                    nodes: pattern,
                    csp: vec![ev("process_pattern_actual", &[i])],
                    ..Fired::default()
                };
                if failing.is_empty() {
                    f.csp.push(ev("cond_all_validated", &[i]));
                    self.fire("PB2a", Phase::S3(i), pre, f);
                } else {
                    f.csp.push(ev("cond_not_all_validated", &[i]));
                    self.carried = failing;
                    self.fire("PB2", Phase::S2(i), pre, f);
                }
            }
            Phase::S2(i) => {
                let pattern = self.pattern(i);
                let carried = std::mem::take(&mut self.carried);
                let failing = self
                    .core
                    .eval_raw(v, "validate", i, &pattern)
                    .unwrap_or(carried);
                let mut f = Fired {
                    level: Some(i),
                    csp: vec![ev("validate_pattern_actual", &[i])],
                    ..Fired::default()
                };
                if failing.is_empty() {
                    f.nodes = pattern;
                    f.csp.push(ev("cond_all_validated", &[i]));
                    return self.fire("PB4", Phase::S3(i), pre, f);
                }
                f.csp.push(ev("cond_not_all_validated", &[i]));
                let origin = self.core.origin(i, &failing);
                f.nodes = failing;
                let Some(j) = origin else {
                    f.csp.push(ev("cond_j_not_exists_for_i", &[i]));
                    f.csp.push("terminate_failure_actual".into());
                    return self.fail("PB3c", pre, FailureReason::NoRefinementPath { level: i }, f);
                };
                f.origin = Some(j);
                f.csp.push(ev("cond_j_exists_for_i", &[i, j]));
                if self.core.attempts(j) < r_max {
                    self.core.bump(j);
                    f.csp.push(ev("cond_ref_attempts_lt_Rmax", &[j]));
                    f.csp.push(ev("increment_refinement_attempts_actual", &[j]));
                    self.fire("PB3", Phase::S1R(j, i), pre, f);
                } else {
                    f.csp.push(ev("cond_ref_attempts_ge_Rmax", &[j]));
                    f.csp.push("terminate_failure_actual".into());
                    self.fail(
                        "PB3c",
                        pre,
                        FailureReason::RefinementExhausted { level: j },
                        f,
                    );
                }
            }
            Phase::S1R(j, i) => {
                let mut f = Fired {
                    level: Some(i),
                    origin: Some(j),
                    ..Fired::default()
                };
                if self.core.attempts(j) >= r_max {
                    f.csp = vec![
                        ev("cond_ref_attempts_ge_Rmax", &[j]),
                        "terminate_failure_actual".into(),
                    ];
                    return self.fail(
                        "PB9",
                        pre,
                        FailureReason::RefinementExhausted { level: j },
                        f,
                    );
                }
                let pattern = self.pattern(j);
                self.core.open_shadow(&pattern);
                let failing = self.core.eval(v, "refine_process", j, &pattern);
                f.csp.push(ev("process_refinement_pattern_actual", &[j]));
                if failing.is_empty() {
                    f.nodes = pattern;
                    f.csp.push(ev("cond_all_validated", &[j]));
                    self.fire("PB3b", Phase::S3R(j, i), pre, f);
                } else {
                    f.csp.push(ev("cond_not_all_validated", &[j]));
                    f.nodes = failing.clone();
                    self.carried = failing;
                    self.fire("PB3a", Phase::S2R(j, i), pre, f);
                }
            }
            Phase::S2R(j, i) => {
                let pattern = self.pattern(j);
                let carried = std::mem::take(&mut self.carried);
                let failing = self
                    .core
                    .eval_raw(v, "refine_validate", j, &pattern)
                    .unwrap_or(carried);
                let mut f = Fired {
                    level: Some(i),
                    origin: Some(j),
                    csp: vec![ev("validate_refinement_pattern_actual", &[j])],
                    ..Fired::default()
                };
                if failing.is_empty() {
                    f.nodes = pattern;
                    f.csp.push(ev("cond_all_validated", &[j]));
                    return self.fire("PB3a1", Phase::S3R(j, i), pre, f);
                }
                self.core.close_shadow();
                f.nodes = failing;
                f.csp.push(ev("cond_not_all_validated", &[j]));
                if self.core.attempts(j) < r_max {
                    self.core.bump(j);
                    f.csp.push(ev("cond_ref_attempts_lt_Rmax", &[j]));
                    f.csp.push(ev("increment_refinement_attempts_actual", &[j]));
                    self.fire("PB3a2", Phase::S1R(j, i), pre, f);
                } else {
                    f.csp.push(ev("cond_ref_attempts_ge_Rmax", &[j]));
                    f.csp.push("terminate_failure_actual".into());
                    self.fail(
                        "PB3a3",
                        pre,
                        FailureReason::RefinementExhausted { level: j },
                        f,
                    );
                }
            }
            Phase::S3R(j, i) => {
                self.core.close_shadow();
                let mut f = Fired {
                    level: Some(i),
                    origin: Some(j),
                    csp: vec![ev("resolve_refinement_depth_actual", &[j])],
                    ..Fired::default()
                };
                if j == i {
                    f.csp.push(ev("cond_j_eq_i", &[j, i]));
                    return self.fire("PB6", Phase::S3(i), pre, f);
                }
                f.csp.push(ev("cond_j_lt_i", &[j, i]));
                if self.core.attempts(j + 1) >= r_max {
                    f.csp.push(ev("cond_ref_attempts_ge_Rmax", &[j + 1]));
                    f.csp.push("terminate_failure_actual".into());
                    let reason = FailureReason::RefinementExhausted { level: j + 1 };
                    return self.fail("PB9", pre, reason, f);
                }
                // the counter moves, but the process algebra has no event for it here
                self.core.bump(j + 1);
                self.fire("PB5", Phase::S1R(j + 1, i), pre, f);
            }
            Phase::S3(i) => {
                let pattern = self.pattern(i);
                self.core.set(&pattern, NodeStatus::Finalized);
                let next = if self.core.frontier_open && i < l {
                    self.next_pattern(i)
                } else {
                    Vec::new()
                };
                let mut f = Fired {
                    level: Some(i),
                    nodes: pattern,
                    finalized_at_level: Some(self.core.finalized_count(i)),
                    csp: vec![ev("resolve_depth_actual", &[i])],
                    ..Fired::default()
                };
                if !next.is_empty() {
                    f.csp.push(ev("cond_i_lt_L", &[i]));
                    f.csp.push(ev("cond_pattern_next_nonempty", &[i]));
                    self.patterns.insert(i + 1, next);
                    self.fire("PB4a", Phase::S1(i + 1), pre, f);
                } else {
                    self.core.frontier_open = false;
                    let cond = if i == l {
                        "cond_i_eq_L"
                    } else {
                        "cond_pattern_next_empty"
                    };
                    f.csp.push(ev(cond, &[i]));
                    self.fire("PB4b", Phase::S4(1), pre, f);
                }
            }
            Phase::S4(i) => {
                let work = self.core.level_where(i, |s| s != NodeStatus::Finalized);
                if !work.is_empty() {
                    self.patterns.insert(i, work.clone());
                }
                let failing = self.core.eval(v, "complete", i, &work);
                let mut f = Fired {
                    level: Some(i),
                    csp: vec![ev("finalize_pattern_actual", &[i])],
                    ..Fired::default()
                };
                if failing.is_empty() {
                    self.core.set(&work, NodeStatus::Finalized);
                    f.nodes = work;
                    f.csp.push(ev("cond_all_processed", &[i]));
                    if i < l {
                        f.csp.push(ev("cond_i_lt_L", &[i]));
                        return self.fire("PB7", Phase::S4(i + 1), pre, f);
                    }
                    f.csp.push(ev("cond_i_eq_L", &[i]));
                    f.csp.push("terminate_success_actual".into());
                    self.core.outcome = Some(Outcome::Success);
                    return self.fire("PB8", Phase::T, pre, f);
                }
                f.csp.push(ev("cond_not_all_processed", &[i]));
                let origin = self.core.origin(i, &failing);
                f.nodes = failing;
                let Some(j) = origin else {
                    f.csp
                        .push(ev("cond_trace_origin_not_exists_for_unprocessed", &[i]));
                    f.csp.push("terminate_failure_actual".into());
                    return self.fail("PB7b", pre, FailureReason::NoRefinementPath { level: i }, f);
                };
                f.origin = Some(j);
                f.csp
                    .push(ev("cond_trace_origin_exists_for_unprocessed", &[i, j]));
                if self.core.attempts(j) < r_max {
                    self.core.bump(j);
                    f.csp.push(ev("cond_ref_attempts_lt_Rmax", &[j]));
                    f.csp.push(ev("increment_refinement_attempts_actual", &[j]));
                    self.fire("PB7a", Phase::S1R(j, i), pre, f);
                } else {
                    f.csp.push(ev("cond_ref_attempts_ge_Rmax", &[j]));
                    f.csp.push("terminate_failure_actual".into());
                    self.fail(
                        "PB7b",
                        pre,
                        FailureReason::RefinementExhausted { level: j },
                        f,
                    );
                }
            }
            Phase::S5 | Phase::T => {}
        }
    }
}

impl Stepper for PbfdEngine<'_> {
    fn phase(&self) -> Phase {
        self.core.phase
    }

    fn step(&mut self, v: &mut dyn Validator) -> Result<bool, MachineError> {
        if self.core.phase.is_terminal() {
            return Ok(false);
        }
        self.step_inner(v);
        Ok(!self.core.phase.is_terminal())
    }

    fn fired(&self) -> usize {
        self.core.trace.len()
    }

    fn state_key(&self) -> String {
        format!("{}|{:?}|{:?}", self.core.key(), self.patterns, self.carried)
    }

    fn into_run(self) -> Run {
        self.core.into_run(Methodology::Pbfd)
    }
}

pub fn run_pbfd_with(
    h: &Hierarchy,
    sc: &Scenario,
    v: &mut dyn Validator,
) -> Result<Run, MachineError> {
    let cap = trace_length_cap(h.len(), h.max_level(), sc.r_max);
    drive(PbfdEngine::new(h, sc)?, v, cap)
}

pub fn run_pbfd(h: &Hierarchy, sc: &Scenario) -> Result<Run, MachineError> {
    run_pbfd_with(h, sc, &mut ScenarioValidator::new(sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::TraceOrigin;
    use std::collections::BTreeMap;

    #[test]
    fn failure_free_descends_then_sweeps() {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let run = run_pbfd(&h, &Scenario::default()).unwrap();
        assert_eq!(
            run.rules(),
            ["PB1", "PB2a", "PB4a", "PB2a", "PB4a", "PB2a", "PB4b", "PB7", "PB7", "PB8"]
        );
        assert!(run.statuses.values().all(|&s| s == NodeStatus::Finalized));
    }

    #[test]
    fn scripted_backtrack_refines_each_level_once() {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let sc = Scenario {
            trace_origin: TraceOrigin::Scripted(BTreeMap::from([(3, 1)])),
            r_max: 50,
            ..Scenario::default()
        }
        .fail("process", 3, 1, &[4]);
        let run = run_pbfd(&h, &sc).unwrap();
        assert_eq!(run.outcome, Outcome::Success);
        assert_eq!(run.attempts, BTreeMap::from([(1, 1), (2, 1), (3, 1)]));
        let rules = run.rules();
        let at = rules.iter().position(|&r| r == "PB3").unwrap();
        assert_eq!(
            &rules[at..at + 7],
            ["PB3", "PB3b", "PB5", "PB3b", "PB5", "PB3b", "PB6"]
        );
    }

    #[test]
    fn rmax_one_stops_at_first_refinement() {
        let h = Hierarchy::perfect(2, 2).unwrap();
        let sc = Scenario {
            r_max: 1,
            ..Scenario::default()
        }
        .fail("process", 2, 1, &[2]);
        let run = run_pbfd(&h, &sc).unwrap();
        assert_eq!(run.rules(), ["PB1", "PB2a", "PB4a", "PB2", "PB3", "PB9"]);
        assert!(!run.outcome.is_success());
    }
}
