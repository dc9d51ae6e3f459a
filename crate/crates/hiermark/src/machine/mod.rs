//! Development-methodology state machines and their shared plumbing.

pub mod basic;
pub mod hybrid;
pub mod pbfd;
pub mod pdfd;
pub mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{NodeId, NodeStatus};
use crate::trace::{Methodology, TraceEvent};

pub use basic::{run_bfd, run_bfd_ordered, run_cdd, run_dad, run_dad_extended, run_dfd, Dag};
pub use hybrid::{drive, Stepper};
pub use pbfd::{run_pbfd, run_pbfd_with, PbfdEngine};
pub use pdfd::{run_pdfd, run_pdfd_with, PdfdEngine};
pub use scenario::{
    trace_origin, Scenario, ScenarioValidator, ScriptEntry, TraceOrigin, Validator,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid input graph: {0}")]
    InvalidGraph(String),
    #[error("graph extension at node {0} would create a cycle")]
    AcyclicityViolation(NodeId),
    #[error("trace exceeded the length cap of {0} events")]
    CapExceeded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    RefinementExhausted { level: u32 },
    NoRefinementPath { level: u32 },
    LoopUnbounded { component: NodeId },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::RefinementExhausted { level } => {
                write!(f, "refinement_exhausted at level {level}")
            }
            FailureReason::NoRefinementPath { level } => {
                write!(f, "no_refinement_path at level {level}")
            }
            FailureReason::LoopUnbounded { component } => {
                write!(f, "loop_unbounded({component})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Error(FailureReason),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }
}

/// Completed run of one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub methodology: Methodology,
    pub trace: Vec<TraceEvent>,
    pub outcome: Outcome,
    /// Per-level refinement counters (hybrid machines), every level present.
    pub attempts: BTreeMap<u32, u32>,
    pub statuses: BTreeMap<NodeId, NodeStatus>,
}

impl Run {
    pub fn rules(&self) -> Vec<&str> {
        self.trace.iter().map(|e| e.rule.as_str()).collect()
    }

    pub fn max_attempts(&self) -> u32 {
        self.attempts.values().copied().max().unwrap_or(0)
    }
}

/// Hybrid-machine control state. `S1R`/`S2R`/`S3R` carry `(j, i)`: the level
/// being refined and the level whose failure started the refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    S0,
    S1(u32),
    S2(u32),
    S1R(u32, u32),
    S2R(u32, u32),
    S3(u32),
    S3R(u32, u32),
    S4(u32),
    S5,
    T,
}

impl Phase {
    pub fn family(&self) -> &'static str {
        match self {
            Phase::S0 => "S0",
            Phase::S1(_) => "S1",
            Phase::S2(_) => "S2",
            Phase::S1R(..) => "S1R",
            Phase::S2R(..) => "S2R",
            Phase::S3(_) => "S3",
            Phase::S3R(..) => "S3R",
            Phase::S4(_) => "S4",
            Phase::S5 => "S5",
            Phase::T => "T",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::S5 | Phase::T)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::S0 | Phase::S5 | Phase::T => f.write_str(self.family()),
            Phase::S1(i) | Phase::S2(i) | Phase::S3(i) | Phase::S4(i) => {
                write!(f, "{}({i})", self.family())
            }
            Phase::S1R(j, i) | Phase::S2R(j, i) | Phase::S3R(j, i) => {
                write!(f, "{}({j},{i})", self.family())
            }
        }
    }
}

/// State family of a rendered state id such as `"S1R(2,3)"`.
pub fn family_of(state: &str) -> &str {
    state.split('(').next().unwrap_or(state)
}

/// Upper bound on hybrid trace length implied by the ranking tuple: the first
/// two components never increase, so between their changes the last two
/// strictly descend through at most `4 * (kmax + 1)` values.
pub fn trace_length_cap(nodes: usize, levels: u32, r_max: u32) -> usize {
    let kmax = nodes.max(levels as usize) + 1;
    (nodes + levels as usize * r_max as usize + 1) * 4 * (kmax + 1) + 2
}
