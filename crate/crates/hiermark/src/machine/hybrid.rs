//! State shared by the two hybrid engines: committed and working statuses,
//! refinement counters, evaluation counters and trace emission.

use std::collections::BTreeMap;

use crate::hierarchy::{Hierarchy, NodeId, NodeStatus};
use crate::trace::{Measure, Methodology, Payload, TraceLog};

use super::{trace_origin, MachineError, Outcome, Phase, Run, Scenario, Validator};

/// One steppable hybrid machine.
pub trait Stepper {
    fn phase(&self) -> Phase;
    /// Fires one rule. Returns `false` once a terminal state is reached.
    fn step(&mut self, v: &mut dyn Validator) -> Result<bool, MachineError>;
    fn into_run(self) -> Run;
    /// Number of rules fired so far.
    fn fired(&self) -> usize;
    /// Everything that influences future behaviour, rendered for dedup.
    fn state_key(&self) -> String;
}

/// Steps `engine` to a terminal state, enforcing the trace-length cap.
pub fn drive<S: Stepper>(
    mut engine: S,
    v: &mut dyn Validator,
    cap: usize,
) -> Result<Run, MachineError> {
    let mut fired = 0usize;
    while engine.step(v)? {
        fired += 1;
        if fired > cap {
            return Err(MachineError::CapExceeded(cap));
        }
    }
    Ok(engine.into_run())
}

#[derive(Debug, Clone)]
pub(crate) struct Core<'a> {
    pub h: &'a Hierarchy,
    pub sc: &'a Scenario,
    pub levels: u32,
    pub phase: Phase,
    pub committed: Vec<NodeStatus>,
    pub shadow: Option<Vec<NodeStatus>>,
    pub attempts: BTreeMap<u32, u32>,
    evals: BTreeMap<(&'static str, u32), u32>,
    /// Cleared once progression stops descending; never reopened.
    pub frontier_open: bool,
    pub trace: TraceLog,
    pub outcome: Option<Outcome>,
}

/// What a rule contributes beyond the state snapshot.
#[derive(Debug, Default)]
pub(crate) struct Fired {
    pub level: Option<u32>,
    pub origin: Option<u32>,
    pub nodes: Vec<NodeId>,
    pub threshold: Option<u32>,
    pub finalized_at_level: Option<u32>,
    pub reason: Option<String>,
    pub csp: Vec<String>,
}

impl<'a> Core<'a> {
    pub fn new(h: &'a Hierarchy, sc: &'a Scenario) -> Result<Self, MachineError> {
        sc.validate(h)?;
        let levels = h.max_level();
        Ok(Core {
            h,
            sc,
            levels,
            phase: Phase::S0,
            committed: vec![NodeStatus::Unprocessed; h.len()],
            shadow: None,
            attempts: (1..=levels).map(|l| (l, 0)).collect(),
            evals: BTreeMap::new(),
            frontier_open: true,
            trace: TraceLog::new(),
            outcome: None,
        })
    }

    pub fn set(&mut self, ids: &[NodeId], st: NodeStatus) {
        for &id in ids {
            let i = self.h.idx(id).expect("known node");
            self.committed[i] = st;
        }
    }

    pub fn level_where(&self, level: u32, pred: impl Fn(NodeStatus) -> bool) -> Vec<NodeId> {
        self.h
            .level_idx(level)
            .iter()
            .filter(|&&i| pred(self.committed[i]))
            .map(|&i| self.h.at(i).id)
            .collect()
    }

    pub fn finalized_count(&self, level: u32) -> u32 {
        self.level_where(level, |s| s == NodeStatus::Finalized)
            .len() as u32
    }

    pub fn attempts(&self, level: u32) -> u32 {
        self.attempts.get(&level).copied().unwrap_or(0)
    }

    pub fn bump(&mut self, level: u32) {
        *self.attempts.entry(level).or_insert(0) += 1;
    }

    /// Opens a working copy where the given committed-finalized nodes are
    /// back in progress.
    pub fn open_shadow(&mut self, ids: &[NodeId]) -> Vec<NodeId> {
        let mut work = self.committed.clone();
        let mut touched = Vec::new();
        for &id in ids {
            let i = self.h.idx(id).expect("known node");
            if work[i] != NodeStatus::Unprocessed {
                work[i] = NodeStatus::InProgress;
                touched.push(id);
            }
        }
        self.shadow = Some(work);
        touched
    }

    /// Drops the working copy. A successful attempt re-finalizes exactly what
    /// was finalized before, so the committed vector already holds the result.
    pub fn close_shadow(&mut self) {
        self.shadow = None;
    }

    /// Runs one evaluation; unscripted evaluations yield `None`.
    pub fn eval_raw(
        &mut self,
        v: &mut dyn Validator,
        phase: &'static str,
        index: u32,
        work: &[NodeId],
    ) -> Option<Vec<NodeId>> {
        let n = self.evals.entry((phase, index)).or_insert(0);
        *n += 1;
        let attempt = *n;
        v.evaluate(phase, index, attempt, work).map(|mut f| {
            f.retain(|x| work.contains(x));
            f.sort_unstable();
            f.dedup();
            f
        })
    }

    pub fn eval(
        &mut self,
        v: &mut dyn Validator,
        phase: &'static str,
        index: u32,
        work: &[NodeId],
    ) -> Vec<NodeId> {
        self.eval_raw(v, phase, index, work).unwrap_or_default()
    }

    pub fn origin(&self, i: u32, failing: &[NodeId]) -> Option<u32> {
        trace_origin(
            &self.sc.trace_origin,
            i,
            failing,
            &self.sc.implicated,
            self.h,
        )
    }

    pub fn k1(&self) -> u64 {
        self.committed
            .iter()
            .filter(|&&s| s != NodeStatus::Finalized)
            .count() as u64
    }

    pub fn k2(&self) -> u64 {
        (1..=self.levels)
            .map(|l| self.sc.r_max.saturating_sub(self.attempts(l)) as u64)
            .sum()
    }

    pub fn measure(&self, k3: u64, k4: u64) -> Measure {
        Measure {
            k1: self.k1(),
            k2: self.k2(),
            k3,
            k4,
        }
    }

    pub fn committed_map(&self) -> BTreeMap<NodeId, NodeStatus> {
        self.h
            .nodes()
            .iter()
            .zip(&self.committed)
            .map(|(n, &s)| (n.id, s))
            .collect()
    }

    pub fn emit(&mut self, rule: &str, to: Phase, pre: Measure, post: Measure, f: Fired) {
        let from = self.phase;
        let payload = Payload {
            level: f.level,
            origin: f.origin,
            nodes: f.nodes,
            attempts: self.attempts.clone(),
            committed: self.committed_map(),
            threshold: f.threshold,
            finalized_at_level: f.finalized_at_level,
            reason: f.reason,
            csp: f.csp,
        };
        let e = self.trace.push(rule, from, to, payload);
        e.measure_pre = Some(pre);
        e.measure_post = Some(post);
        self.phase = to;
    }

    pub fn key(&self) -> String {
        format!(
            "{}|{:?}|{:?}|{:?}|{}",
            self.phase, self.committed, self.shadow, self.attempts, self.frontier_open
        )
    }

    pub fn into_run(self, methodology: Methodology) -> Run {
        let statuses = self.committed_map();
        Run {
            methodology,
            trace: self.trace.into_events(),
            outcome: self.outcome.unwrap_or(Outcome::Success),
            attempts: self.attempts,
            statuses,
        }
    }
}

/// Formats `name.a.b` process-algebra events.
pub(crate) fn ev(name: &str, args: &[u32]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push('.');
        s.push_str(&a.to_string());
    }
    s
}
