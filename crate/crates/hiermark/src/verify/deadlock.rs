//! Deadlock freedom: a static check over the rule tables, and a bounded
//! exhaustive walk over every validation outcome the hybrid engines can see.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::hierarchy::{Hierarchy, NodeId};
use crate::machine::{
    family_of, MachineError, PbfdEngine, PdfdEngine, Scenario, Stepper, TraceOrigin, Validator,
};
use crate::trace::{Methodology, TraceEvent};

use super::{rule_table, terminal_families, Verdict};

/// State families without an outgoing rule.
pub fn skeleton_sinks(m: Methodology) -> BTreeSet<&'static str> {
    let table = rule_table(m);
    let mut families: BTreeSet<&'static str> = BTreeSet::new();
    for (_, from, to) in table {
        families.extend(from.iter().copied());
        families.insert(to);
    }
    families
        .into_iter()
        .filter(|f| !table.iter().any(|(_, from, _)| from.contains(f)))
        .collect()
}

/// Static skeleton check, plus every non-terminal state reached in `trace`
/// has an outgoing rule.
pub fn check_deadlock_freeness(m: Methodology, trace: &[TraceEvent]) -> Verdict {
    const NAME: &str = "deadlock";
    let terminal = terminal_families(m);
    let sinks = skeleton_sinks(m);
    if let Some(s) = sinks.iter().find(|s| !terminal.contains(s)) {
        return Verdict::fail(NAME, None, format!("{s} has no outgoing rule"));
    }
    let table = rule_table(m);
    for (i, e) in trace.iter().enumerate() {
        let fam = family_of(&e.to);
        if terminal.contains(&fam) {
            continue;
        }
        if !table.iter().any(|(_, from, _)| from.contains(&fam)) {
            return Verdict::fail(
                NAME,
                Some(i),
                format!("reached {} with no enabled rule", e.to),
            );
        }
    }
    let sinks: Vec<&str> = sinks.into_iter().collect();
    Verdict::pass(NAME, format!("sinks {sinks:?}"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub states: usize,
    pub transitions: usize,
    pub reached_t: usize,
    pub reached_s5: usize,
    /// Non-terminal states where no outcome lets a rule fire.
    pub stuck: Vec<String>,
    pub families: BTreeSet<&'static str>,
}

/// One answer per evaluation call within a step; `None` leaves it unscripted.
#[derive(Debug, Clone)]
enum Choice {
    Unscripted,
    Mask(u64),
}

struct Probe {
    calls: Vec<usize>,
}

impl Validator for Probe {
    fn evaluate(&mut self, _: &str, _: u32, _: u32, work: &[NodeId]) -> Option<Vec<NodeId>> {
        self.calls.push(work.len());
        None
    }
}

struct Fixed {
    answers: VecDeque<Choice>,
}

impl Validator for Fixed {
    fn evaluate(&mut self, _: &str, _: u32, _: u32, work: &[NodeId]) -> Option<Vec<NodeId>> {
        match self.answers.pop_front()? {
            Choice::Unscripted => None,
            Choice::Mask(m) => Some(
                work.iter()
                    .enumerate()
                    .filter(|(i, _)| m >> i & 1 == 1)
                    .map(|(_, &n)| n)
                    .collect(),
            ),
        }
    }
}

/// Every combination of answers for the evaluation calls one step makes.
fn outcomes(calls: &[usize]) -> Vec<Vec<Choice>> {
    let mut all: Vec<Vec<Choice>> = vec![Vec::new()];
    for &n in calls {
        assert!(n < 16, "work set of {n} nodes is too large to enumerate");
        let mut grown = Vec::new();
        for prefix in &all {
            let mut with = |c: Choice| {
                let mut p = prefix.clone();
                p.push(c);
                grown.push(p);
            };
            with(Choice::Unscripted);
            for m in 0..(1u64 << n) {
                with(Choice::Mask(m));
            }
        }
        all = grown;
    }
    all
}

/// Breadth-first walk over engine states, branching on every validation
/// outcome. Fails with the engine's error if a step errors.
pub fn explore<S: Stepper + Clone>(
    init: S,
    max_states: usize,
) -> Result<ExploreStats, MachineError> {
    let mut stats = ExploreStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<S> = VecDeque::new();
    seen.insert(init.state_key());
    queue.push_back(init);
    while let Some(engine) = queue.pop_front() {
        stats.states += 1;
        let phase = engine.phase();
        stats.families.insert(phase.family());
        if phase.is_terminal() {
            match phase.family() {
                "T" => stats.reached_t += 1,
                _ => stats.reached_s5 += 1,
            }
            continue;
        }
        let mut probe = Probe { calls: Vec::new() };
        engine.clone().step(&mut probe)?;
        let mut moved = false;
        for answers in outcomes(&probe.calls) {
            let mut next = engine.clone();
            let before = next.fired();
            next.step(&mut Fixed {
                answers: answers.into(),
            })?;
            if next.fired() == before {
                continue;
            }
            moved = true;
            stats.transitions += 1;
            if seen.insert(next.state_key()) {
                if seen.len() > max_states {
                    return Err(MachineError::CapExceeded(max_states));
                }
                queue.push_back(next);
            }
        }
        if !moved {
            stats.stuck.push(engine.state_key());
        }
    }
    Ok(stats)
}

/// Root plus two nodes on each of levels 2 and 3.
pub fn skeleton_hierarchy() -> Hierarchy {
    let node = |id: u64, parent: Option<u64>, index: u32, level: u32| {
        serde_json::json!({
            "id": id, "name": format!("n{id}"), "width_class": "int32",
            "parent_id": parent, "child_index": index, "level": level
        })
    };
    let doc = serde_json::Value::Array(vec![
        node(1, None, 0, 1),
        node(2, Some(1), 0, 2),
        node(3, Some(1), 1, 2),
        node(4, Some(2), 0, 3),
        node(5, Some(3), 0, 3),
    ]);
    Hierarchy::from_json(&doc.to_string()).expect("skeleton hierarchy is valid")
}

/// Scenario variants the skeleton walk covers: both origin strategies and
/// every admissible threshold.
pub fn skeleton_scenarios(h: &Hierarchy, r_max: u32) -> Vec<Scenario> {
    let mut out = Vec::new();
    for origin in [TraceOrigin::DependencyMin, TraceOrigin::Fixed(1)] {
        for k2 in 1..=h.level_idx(2).len() as u32 {
            for k3 in 1..=h.level_idx(3).len() as u32 {
                out.push(Scenario {
                    trace_origin: origin.clone(),
                    r_max,
                    k: [(2, k2), (3, k3)].into(),
                    ..Scenario::default()
                });
            }
        }
    }
    out
}

/// Exhaustive walk of one hybrid machine over the skeleton at `r_max`.
pub fn explore_skeleton(m: Methodology, r_max: u32) -> Result<ExploreStats, MachineError> {
    let h = skeleton_hierarchy();
    let mut total = ExploreStats::default();
    for sc in skeleton_scenarios(&h, r_max) {
        let s = match m {
            Methodology::Pdfd => explore(PdfdEngine::new(&h, &sc)?, 200_000)?,
            Methodology::Pbfd => explore(PbfdEngine::new(&h, &sc)?, 200_000)?,
            other => {
                return Err(MachineError::InvalidScenario(format!(
                    "{other} has no steppable engine"
                )))
            }
        };
        total.states += s.states;
        total.transitions += s.transitions;
        total.reached_t += s.reached_t;
        total.reached_s5 += s.reached_s5;
        total.stuck.extend(s.stuck);
        total.families.extend(s.families);
    }
    Ok(total)
}
