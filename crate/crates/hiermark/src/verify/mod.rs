//! Post-hoc checkers over recorded traces. Every checker is a pure function
//! of its inputs and returns a [`Verdict`].

pub mod csp;
pub mod deadlock;
pub mod measure;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::hierarchy::{NodeId, NodeStatus};
use crate::machine::family_of;
use crate::trace::{Methodology, TraceEvent};

pub use csp::{check_csp_conformance, recognize, CspConfig, CspReject};
pub use deadlock::{check_deadlock_freeness, explore, skeleton_sinks, ExploreStats};
pub use measure::{check_measure_descent, rule_kind, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    /// Index of the first offending trace event, when there is one.
    pub first_violation: Option<usize>,
    pub detail: String,
}

impl Verdict {
    pub fn pass(check: &str, detail: impl Into<String>) -> Self {
        Verdict {
            check: check.to_string(),
            passed: true,
            first_violation: None,
            detail: detail.into(),
        }
    }

    pub fn fail(check: &str, at: Option<usize>, detail: impl Into<String>) -> Self {
        Verdict {
            check: check.to_string(),
            passed: false,
            first_violation: at,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{:<14} {status}", self.check)?;
        if let Some(i) = self.first_violation {
            write!(f, " at event {i}")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

/// One line per verdict.
pub fn report(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

/// Counters never exceed `r_max`, never decrease, and their final total stays
/// within `levels * r_max`.
pub fn check_bounded_refinement(trace: &[TraceEvent], r_max: u32, levels: u32) -> Verdict {
    const NAME: &str = "bounds";
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        for (&l, &a) in &e.payload.attempts {
            if a > r_max {
                return Verdict::fail(
                    NAME,
                    Some(i),
                    format!("level {l} at {a} exceeds cap {r_max}"),
                );
            }
            if a < last.get(&l).copied().unwrap_or(0) {
                return Verdict::fail(NAME, Some(i), format!("level {l} counter went backwards"));
            }
            last.insert(l, a);
        }
    }
    let total: u64 = last.values().map(|&a| a as u64).sum();
    let bound = levels as u64 * r_max as u64;
    if total > bound {
        return Verdict::fail(NAME, None, format!("total {total} exceeds {bound}"));
    }
    let max = last.values().copied().max().unwrap_or(0);
    Verdict::pass(
        NAME,
        format!("max attempts {max} <= {r_max}, total {total} <= {bound}"),
    )
}

/// Once committed as finalized, a node stays finalized.
pub fn check_finalization(trace: &[TraceEvent]) -> Verdict {
    const NAME: &str = "finalization";
    let mut finalized: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        for (&n, &s) in &e.payload.committed {
            if s == NodeStatus::Finalized {
                finalized.entry(n).or_insert(i);
            } else if let Some(at) = finalized.get(&n) {
                return Verdict::fail(
                    NAME,
                    Some(i),
                    format!("node {n} finalized at event {at} is now {s:?}"),
                );
            }
        }
    }
    Verdict::pass(
        NAME,
        format!("{} nodes finalized, none regressed", finalized.len()),
    )
}

/// `(rule, source families, target family)` for every rule of a methodology.
pub fn rule_table(
    m: Methodology,
) -> &'static [(&'static str, &'static [&'static str], &'static str)] {
    match m {
        Methodology::Pdfd => &[
            ("PD1", &["S0"], "S1"),
            ("PD2", &["S1"], "S2"),
            ("PD2a", &["S2"], "S1R"),
            ("PD2b", &["S2"], "S1"),
            ("PD3", &["S1R"], "S2R"),
            ("PD3a", &["S2R"], "S1R"),
            ("PD3b", &["S2R"], "S2"),
            ("PD3c", &["S2R"], "S1R"),
            ("PD4", &["S2"], "S3"),
            ("PD4a", &["S3"], "S3"),
            ("PD4b", &["S3"], "S1R"),
            ("PD5", &["S3"], "S4"),
            ("PD6", &["S4"], "S4"),
            ("PD6a", &["S4"], "S1R"),
            ("PD6b", &["S4"], "S5"),
            ("PD7", &["S4"], "T"),
            ("PD8", &["S1R", "S2", "S2R", "S3"], "S5"),
        ],
        Methodology::Pbfd => &[
            ("PB1", &["S0"], "S1"),
            ("PB2", &["S1"], "S2"),
            ("PB2a", &["S1"], "S3"),
            ("PB3", &["S2"], "S1R"),
            ("PB3a", &["S1R"], "S2R"),
            ("PB3a1", &["S2R"], "S3R"),
            ("PB3a2", &["S2R"], "S1R"),
            ("PB3a3", &["S2R"], "S5"),
            ("PB3b", &["S1R"], "S3R"),
            ("PB3c", &["S2"], "S5"),
            ("PB4", &["S2"], "S3"),
            ("PB4a", &["S3"], "S1"),
            ("PB4b", &["S3"], "S4"),
            ("PB5", &["S3R"], "S1R"),
            ("PB6", &["S3R"], "S3"),
            ("PB7", &["S4"], "S4"),
            ("PB7a", &["S4"], "S1R"),
            ("PB7b", &["S4"], "S5"),
            ("PB8", &["S4"], "T"),
            ("PB9", &["S1R", "S3R"], "S5"),
        ],
        Methodology::Dad => &[
            ("DA1", &["S0"], "S1"),
            ("DA2", &["S1"], "S2"),
            ("DA3", &["S2"], "S1"),
            ("DA4", &["S2"], "S3"),
            ("DA5", &["S3"], "S1"),
            ("DA6", &["S1"], "T"),
        ],
        Methodology::Dfd => &[
            ("DF1", &["S0"], "S1"),
            ("DF2", &["S1"], "S1"),
            ("DF3", &["S1"], "S2"),
            ("DF4", &["S2"], "S1"),
            ("DF5", &["S2"], "S3"),
            ("DF6", &["S3"], "S2"),
            ("DF7", &["S3"], "T"),
        ],
        Methodology::Bfd => &[
            ("BF1", &["S0"], "S1"),
            ("BF2", &["S1"], "S1"),
            ("BF3", &["S1"], "S2"),
            ("BF4", &["S2"], "S1"),
            ("BF5", &["S2"], "T"),
        ],
        Methodology::Cdd => &[
            ("CD1", &["S0"], "S1"),
            ("CD2", &["S1"], "S1"),
            ("CD3a", &["S1"], "S2"),
            ("CD3b", &["S1"], "S2"),
            ("CD4", &["S2"], "S1"),
            ("CD4a", &["S2"], "S2"),
            ("CD4b", &["S2"], "S5"),
            ("CD5", &["S1"], "S3"),
            ("CD6", &["S3"], "S2"),
            ("CD7", &["S3"], "T"),
            ("CD8", &["S3"], "S1"),
        ],
        Methodology::Tle => &[
            ("TLE1", &["[*]"], "S0"),
            ("TLE2", &["S0"], "S1"),
            ("TLE3", &["S1"], "S2"),
            ("TLE4", &["S2"], "S3"),
            ("TLE5", &["S3"], "S4"),
            ("TLE6", &["S4"], "S5"),
            ("TLE7", &["S5"], "S0"),
            ("TLE8", &["S5", "S0"], "S6"),
            ("TLE9", &["S6"], "[*]"),
        ],
    }
}

/// Families in which a run may legitimately stop.
pub fn terminal_families(m: Methodology) -> &'static [&'static str] {
    match m {
        Methodology::Tle => &["[*]"],
        _ => &["T", "S5"],
    }
}

fn initial_family(m: Methodology) -> &'static str {
    match m {
        Methodology::Tle => "[*]",
        _ => "S0",
    }
}

/// Every event names a rule of the methodology, matches that rule's source
/// and target families, and chains onto the previous event.
pub fn check_rule_legality(trace: &[TraceEvent], m: Methodology) -> Verdict {
    const NAME: &str = "rules";
    let table = rule_table(m);
    let terminal = terminal_families(m);
    let mut prev: Option<&str> = None;
    for (i, e) in trace.iter().enumerate() {
        let Some((_, from, to)) = table.iter().find(|r| r.0 == e.rule) else {
            return Verdict::fail(NAME, Some(i), format!("{} is not a {m} rule", e.rule));
        };
        let src = family_of(&e.from);
        if !from.contains(&src) || family_of(&e.to) != *to {
            return Verdict::fail(
                NAME,
                Some(i),
                format!("{} cannot fire {} -> {}", e.rule, e.from, e.to),
            );
        }
        match prev {
            None if src != initial_family(m) => {
                return Verdict::fail(NAME, Some(i), format!("trace starts in {}", e.from));
            }
            Some(p) if p != e.from => {
                return Verdict::fail(
                    NAME,
                    Some(i),
                    format!("{} does not continue from {p}", e.from),
                );
            }
            Some(p) if terminal.contains(&family_of(p)) => {
                return Verdict::fail(NAME, Some(i), "event after a terminal state");
            }
            _ => {}
        }
        prev = Some(&e.to);
    }
    Verdict::pass(NAME, format!("{} events", trace.len()))
}

/// Advancing a level requires the finalized count to reach the clamped threshold.
pub fn check_pd2b_gating(trace: &[TraceEvent]) -> Verdict {
    const NAME: &str = "gating";
    for (i, e) in trace.iter().enumerate().filter(|(_, e)| e.rule == "PD2b") {
        match (e.payload.finalized_at_level, e.payload.threshold) {
            (Some(fin), Some(k)) if fin >= k => {}
            (fin, k) => {
                return Verdict::fail(
                    NAME,
                    Some(i),
                    format!("advance with finalized {fin:?} below threshold {k:?}"),
                );
            }
        }
    }
    Verdict::pass(NAME, "")
}

/// Ends in a terminal family within `cap` events.
pub fn check_termination(trace: &[TraceEvent], m: Methodology, cap: usize) -> Verdict {
    const NAME: &str = "termination";
    if trace.len() > cap {
        return Verdict::fail(
            NAME,
            Some(cap),
            format!("{} events exceed cap {cap}", trace.len()),
        );
    }
    match trace.last() {
        Some(e) if terminal_families(m).contains(&family_of(&e.to)) => {
            Verdict::pass(NAME, format!("{} after {} events", e.to, trace.len()))
        }
        Some(e) => Verdict::fail(NAME, Some(trace.len() - 1), format!("stopped in {}", e.to)),
        None => Verdict::fail(NAME, None, "empty trace"),
    }
}

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Measure,
    Bounds,
    Finalization,
    Deadlock,
    Csp,
    All,
}

impl std::str::FromStr for Check {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "measure" => Ok(Check::Measure),
            "bounds" => Ok(Check::Bounds),
            "finalization" => Ok(Check::Finalization),
            "deadlock" => Ok(Check::Deadlock),
            "csp" => Ok(Check::Csp),
            "all" => Ok(Check::All),
            other => Err(format!("unknown check {other:?}")),
        }
    }
}

/// Trace-level suite used by the command line and the fuzz harness.
pub fn verify_trace(
    trace: &[TraceEvent],
    m: Methodology,
    r_max: u32,
    levels: u32,
    check: Check,
) -> Vec<Verdict> {
    let all = check == Check::All;
    let mut out = Vec::new();
    if all {
        out.push(check_rule_legality(trace, m));
    }
    if all || check == Check::Measure {
        out.push(check_measure_descent(trace, m));
    }
    if all || check == Check::Bounds {
        out.push(check_bounded_refinement(trace, r_max, levels));
    }
    if all || check == Check::Finalization {
        out.push(check_finalization(trace));
    }
    if all && m == Methodology::Pdfd {
        out.push(check_pd2b_gating(trace));
    }
    if all || check == Check::Deadlock {
        out.push(check_deadlock_freeness(m, trace));
    }
    if all || check == Check::Csp {
        let cfg = CspConfig {
            levels,
            r_max: Some(r_max),
        };
        out.push(check_csp_conformance(trace, m, &cfg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Hierarchy;
    use crate::machine::{run_pdfd, Scenario, TraceOrigin};

    fn refining_run() -> Vec<TraceEvent> {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let sc = Scenario {
            trace_origin: TraceOrigin::Fixed(2),
            ..Scenario::default()
        }
        .fail("progress", 3, 1, &[4])
        .fail("refine", 2, 1, &[2]);
        run_pdfd(&h, &sc).unwrap().trace
    }

    #[test]
    fn rework_run_keeps_finalized_nodes() {
        let trace = refining_run();
        assert!(trace.iter().any(|e| e.rule == "PD3c"));
        assert!(check_finalization(&trace).passed);
        assert!(check_rule_legality(&trace, Methodology::Pdfd).passed);
        assert!(check_pd2b_gating(&trace).passed);
    }

    #[test]
    fn demoted_node_is_flagged() {
        let mut trace = refining_run();
        let last = trace.len() - 1;
        trace[last]
            .payload
            .committed
            .insert(1, NodeStatus::InProgress);
        let v = check_finalization(&trace);
        assert!(!v.passed);
        assert_eq!(v.first_violation, Some(last));
    }

    #[test]
    fn counter_over_cap_is_flagged() {
        let mut trace = refining_run();
        trace[3].payload.attempts.insert(2, 4);
        assert!(!check_bounded_refinement(&trace, 3, 3).passed);
        assert!(check_bounded_refinement(&refining_run(), 3, 3).passed);
    }

    #[test]
    fn broken_chain_is_flagged() {
        let mut trace = refining_run();
        trace.swap(1, 2);
        let v = check_rule_legality(&trace, Methodology::Pdfd);
        assert_eq!(v.first_violation, Some(1));
    }
}
