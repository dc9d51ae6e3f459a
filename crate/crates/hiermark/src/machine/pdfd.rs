//! Level-wise depth-first machine with threshold-gated advance, trace-origin
//! backtracking, bounded refinement and bottom-up / top-down finalization.

use crate::hierarchy::{Hierarchy, NodeId, NodeStatus};
use crate::trace::{Measure, Methodology};

use super::hybrid::{drive, ev, Core, Fired, Stepper};
use super::{
    trace_length_cap, FailureReason, MachineError, Outcome, Phase, Run, Scenario,
    ScenarioValidator, Validator,
};

#[derive(Debug, Clone)]
pub struct PdfdEngine<'a> {
    core: Core<'a>,
}

/// Where a failed validation came from; picks the entry and exit rules.
#[derive(Clone, Copy)]
enum FailSite {
    Progress,
    BottomUp,
    TopDown,
}

impl<'a> PdfdEngine<'a> {
    pub fn new(h: &'a Hierarchy, sc: &'a Scenario) -> Result<Self, MachineError> {
        Ok(PdfdEngine {
            core: Core::new(h, sc)?,
        })
    }

    /// Unfinalized level-`i` nodes whose parent is finalized.
    fn candidates(&self, level: u32) -> Vec<NodeId> {
        let c = &self.core;
        c.h.level_idx(level)
            .iter()
            .filter(|&&n| c.committed[n] != NodeStatus::Finalized)
            .filter(|&&n| {
                c.h.parent_idx(n)
                    .is_none_or(|p| c.committed[p] == NodeStatus::Finalized)
            })
            .map(|&n| c.h.at(n).id)
            .collect()
    }

    /// Threshold clamped to the nodes reachable under finalized parents.
    fn threshold(&self, level: u32) -> u32 {
        let c = &self.core;
        let reachable =
            c.h.level_idx(level)
                .iter()
                .filter(|&&n| {
                    c.h.parent_idx(n)
                        .is_none_or(|p| c.committed[p] == NodeStatus::Finalized)
                })
                .count() as u32;
        self.core.sc.k_for(c.h, level).min(reachable)
    }

    fn batch(&self, level: u32) -> Vec<NodeId> {
        let mut cand = self.candidates(level);
        cand.truncate(self.threshold(level) as usize);
        cand
    }

    fn measure_at(&self, phase: Phase) -> Measure {
        let c = &self.core;
        let l = c.levels as u64;
        let (k3, k4) = match phase {
            Phase::S0 => (3, c.h.level_idx(1).len() as u64),
            Phase::S1(i) => (3, self.batch(i).len() as u64),
            Phase::S2(_) => (2, 0),
            Phase::S1R(j, _) => (3, c.h.level_idx(j).len() as u64 + 1),
            Phase::S2R(..) => (2, 1),
            Phase::S3(i) => (1, i as u64),
            Phase::S4(k) => (0, l - k as u64),
            Phase::S3R(..) | Phase::S5 | Phase::T => (0, 0),
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

    /// Failed validation at level `i`: back off to the trace origin or stop.
    fn handle_failure(
        &mut self,
        site: FailSite,
        i: u32,
        failing: Vec<NodeId>,
        mut csp: Vec<String>,
        pre: Measure,
    ) {
        let (enter, stop) = match site {
            FailSite::Progress => ("PD2a", "PD8"),
            FailSite::BottomUp => ("PD4b", "PD8"),
            FailSite::TopDown => ("PD6a", "PD6b"),
        };
        let Some(j) = self.core.origin(i, &failing) else {
            csp.push(ev("no_refinement_path_available", &[i]));
            csp.push("terminate_with_error_actual".into());
            let f = Fired {
                level: Some(i),
                nodes: failing,
                csp,
                ..Fired::default()
            };
            return self.fail(stop, pre, FailureReason::NoRefinementPath { level: i }, f);
        };
        csp.push(ev("get_trace_origin_actual", &[i, j]));
        if self.core.attempts(j) < self.core.sc.r_max {
            self.core.bump(j);
            csp.push(ev("can_attempt_refinement", &[j]));
            csp.push(ev("increment_refinement_attempts_actual", &[j]));
            let f = Fired {
                level: Some(i),
                origin: Some(j),
                nodes: failing,
                csp,
                ..Fired::default()
            };
            self.fire(enter, Phase::S1R(j, i), pre, f);
        } else {
            csp.push(ev("has_exhausted_rmax_for_level", &[j]));
            csp.push("terminate_with_error_actual".into());
            let f = Fired {
                level: Some(i),
                origin: Some(j),
                nodes: failing,
                csp,
                ..Fired::default()
            };
            self.fail(
                stop,
                pre,
                FailureReason::RefinementExhausted { level: j },
                f,
            );
        }
    }

    fn step_inner(&mut self, v: &mut dyn Validator) {
        let phase = self.core.phase;
        let pre = self.measure_at(phase);
        let l = self.core.levels;
        match phase {
            Phase::S0 => {
                let f = Fired {
                    csp: vec![
                        "load_tree_actual".into(),
                        "initialize_refinement_attempts_actual".into(),
                    ],
                    ..Fired::default()
                };
                self.fire("PD1", Phase::S1(1), pre, f);
            }
            Phase::S1(i) => {
                let threshold = self.threshold(i);
                let batch = self.batch(i);
                self.core.set(&batch, NodeStatus::InProgress);
                let f = Fired {
                    level: Some(i),
                    nodes: batch,
                    threshold: Some(threshold),
                    csp: vec![
                        ev("determine_ki_actual", &[i]),
                        ev("process_level_actual", &[i]),
                    ],
                    ..Fired::default()
                };
                self.fire("PD2", Phase::S2(i), pre, f);
            }
            Phase::S2(i) => {
                let batch = self.core.level_where(i, |s| s == NodeStatus::InProgress);
                let failing = self.core.eval(v, "progress", i, &batch);
                if !failing.is_empty() {
                    let csp = vec![ev("is_level_validation_failed", &[i])];
                    return self.handle_failure(FailSite::Progress, i, failing, csp, pre);
                }
                self.core.set(&batch, NodeStatus::Finalized);
                let fin = self.core.finalized_count(i);
                let mut f = Fired {
                    level: Some(i),
                    nodes: batch,
                    finalized_at_level: Some(fin),
                    csp: vec![ev("level_validation_successful", &[i])],
                    ..Fired::default()
                };
                if self.core.frontier_open && i < l && !self.candidates(i + 1).is_empty() {
                    f.csp.push(ev("cond_threshold_met", &[i]));
                    f.threshold = Some(self.threshold(i));
                    self.fire("PD2b", Phase::S1(i + 1), pre, f);
                } else {
                    self.core.frontier_open = false;
                    let cond = if i == l {
                        "cond_threshold_met"
                    } else {
                        "cond_has_no_children"
                    };
                    f.csp.push(ev(cond, &[i]));
                    self.fire("PD4", Phase::S3(i), pre, f);
                }
            }
            Phase::S1R(j, i) => {
                if self.core.attempts(j) >= self.core.sc.r_max {
                    let f = Fired {
                        level: Some(i),
                        origin: Some(j),
                        csp: vec![
                            ev("has_exhausted_rmax_for_level", &[j]),
                            "terminate_with_error_actual".into(),
                        ],
                        ..Fired::default()
                    };
                    return self.fail(
                        "PD8",
                        pre,
                        FailureReason::RefinementExhausted { level: j },
                        f,
                    );
                }
                let level = self.core.h.level_ids(j);
                let nodes = self.core.open_shadow(&level);
                let f = Fired {
                    level: Some(i),
                    origin: Some(j),
                    nodes,
                    csp: vec![
                        ev("determine_ki_actual", &[j]),
                        ev("process_level_actual", &[j]),
                    ],
                    ..Fired::default()
                };
                self.fire("PD3", Phase::S2R(j, i), pre, f);
            }
            Phase::S2R(j, i) => {
                let work: Vec<NodeId> = {
                    let c = &self.core;
                    let shadow = c.shadow.as_ref().expect("refinement attempt open");
                    c.h.level_idx(j)
                        .iter()
                        .filter(|&&n| shadow[n] == NodeStatus::InProgress)
                        .map(|&n| c.h.at(n).id)
                        .collect()
                };
                let failing = self.core.eval(v, "refine", j, &work);
                self.core.close_shadow();
                let mut f = Fired {
                    level: Some(i),
                    origin: Some(j),
                    ..Fired::default()
                };
                if !failing.is_empty() {
                    // the entry check in S1R guarantees headroom here
                    self.core.bump(j);
                    f.nodes = failing;
                    f.csp = vec![
                        ev("refinement_failed_no_retry", &[j, i]),
                        ev("can_attempt_refinement", &[j]),
                        ev("increment_refinement_attempts_actual", &[j]),
                    ];
                    return self.fire("PD3c", Phase::S1R(j, i), pre, f);
                }
                f.nodes = work;
                f.csp.push(ev("is_refactor_validation_successful", &[j, i]));
                if j == i {
                    return self.fire("PD3b", Phase::S2(i), pre, f);
                }
                if self.core.attempts(j + 1) >= self.core.sc.r_max {
                    f.csp.push(ev("has_exhausted_rmax_for_level", &[j + 1]));
                    f.csp.push("terminate_with_error_actual".into());
                    let reason = FailureReason::RefinementExhausted { level: j + 1 };
                    return self.fail("PD8", pre, reason, f);
                }
                // the counter moves, but the process algebra has no event for it here
                self.core.bump(j + 1);
                self.fire("PD3a", Phase::S1R(j + 1, i), pre, f);
            }
            Phase::S3(i) => {
                let work = self.unfinalized_below(i);
                let failing = self.core.eval(v, "bottom_up", i, &work);
                let mut csp = vec![ev("finalize_subtrees_actual", &[i])];
                if !failing.is_empty() {
                    csp.push(ev("is_bottom_up_validation_failed", &[i]));
                    return self.handle_failure(FailSite::BottomUp, i, failing, csp, pre);
                }
                self.core.set(&work, NodeStatus::Finalized);
                csp.push(ev("bottom_up_validation_successful", &[i]));
                csp.push(ev("cond_all_descendants_validated", &[i]));
                let f = Fired {
                    level: Some(i),
                    nodes: work,
                    csp,
                    ..Fired::default()
                };
                if i > 2 {
                    self.fire("PD4a", Phase::S3(i - 1), pre, f);
                } else {
                    self.fire("PD5", Phase::S4(1), pre, f);
                }
            }
            Phase::S4(k) => {
                let work = self.core.level_where(k, |s| s != NodeStatus::Finalized);
                let failing = self.core.eval(v, "top_down", k, &work);
                let mut csp = vec![ev("finalize_unprocessed_nodes_actual", &[k])];
                if !failing.is_empty() {
                    csp.push(ev("is_top_down_validation_failed", &[k]));
                    return self.handle_failure(FailSite::TopDown, k, failing, csp, pre);
                }
                self.core.set(&work, NodeStatus::Finalized);
                csp.push(ev("top_down_validation_successful", &[k]));
                let mut f = Fired {
                    level: Some(k),
                    nodes: work,
                    ..Fired::default()
                };
                if k < l {
                    f.csp = csp;
                    self.fire("PD6", Phase::S4(k + 1), pre, f);
                } else {
                    csp.push(ev("top_down_reaches_L5", &[k]));
                    csp.push("terminate_successfully_actual".into());
                    f.csp = csp;
                    self.core.outcome = Some(Outcome::Success);
                    self.fire("PD7", Phase::T, pre, f);
                }
            }
            Phase::S3R(..) | Phase::S5 | Phase::T => {}
        }
    }

    /// Unfinalized strict descendants of finalized level-`i` nodes.
    fn unfinalized_below(&self, level: u32) -> Vec<NodeId> {
        let c = &self.core;
        let mut out: Vec<NodeId> =
            c.h.level_idx(level)
                .iter()
                .filter(|&&n| c.committed[n] == NodeStatus::Finalized)
                .flat_map(|&n| c.h.descendants_idx(n))
                .filter(|&d| c.committed[d] != NodeStatus::Finalized)
                .map(|d| c.h.at(d).id)
                .collect();
        out.sort_unstable();
        out
    }
}

impl Stepper for PdfdEngine<'_> {
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
        self.core.key()
    }

    fn into_run(self) -> Run {
        self.core.into_run(Methodology::Pdfd)
    }
}

pub fn run_pdfd_with(
    h: &Hierarchy,
    sc: &Scenario,
    v: &mut dyn Validator,
) -> Result<Run, MachineError> {
    let cap = trace_length_cap(h.len(), h.max_level(), sc.r_max);
    drive(PdfdEngine::new(h, sc)?, v, cap)
}

pub fn run_pdfd(h: &Hierarchy, sc: &Scenario) -> Result<Run, MachineError> {
    run_pdfd_with(h, sc, &mut ScenarioValidator::new(sc))
}
