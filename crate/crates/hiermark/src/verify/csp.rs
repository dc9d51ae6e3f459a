//! Hand-encoded recognizers for the process-algebra definitions of each
//! methodology. Acceptance is prefix-closed: a trace is accepted when every
//! event is enabled in turn, whether or not it reaches STOP.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::trace::{csp_events, Methodology, TraceEvent};

use super::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CspConfig {
    /// Size of the level domain; the appendix definitions stop at five.
    pub levels: u32,
    /// When set, counter guards (`can_attempt`, `..._ge_Rmax`) are checked
    /// against the attempts implied by the events seen so far.
    pub r_max: Option<u32>,
}

impl Default for CspConfig {
    fn default() -> Self {
        CspConfig {
            levels: 5,
            r_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspReject {
    pub index: usize,
    pub event: String,
    pub reason: String,
}

impl fmt::Display for CspReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {} {:?}: {}", self.index, self.event, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arity {
    Plain,
    One,
    Two,
    Set,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Ev<'a> {
    name: &'a str,
    args: Vec<u64>,
    set: Option<Vec<u64>>,
}

fn parse(text: &str) -> Option<Ev<'_>> {
    let Some((name, rest)) = text.split_once('.') else {
        return Some(Ev {
            name: text,
            args: Vec::new(),
            set: None,
        });
    };
    if let Some(body) = rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
        let set = if body.is_empty() {
            Vec::new()
        } else {
            body.split(',')
                .map(|x| x.trim().parse().ok())
                .collect::<Option<_>>()?
        };
        return Some(Ev {
            name,
            args: Vec::new(),
            set: Some(set),
        });
    }
    let args = rest
        .split('.')
        .map(|x| x.parse().ok())
        .collect::<Option<_>>()?;
    Some(Ev {
        name,
        args,
        set: None,
    })
}

impl Ev<'_> {
    fn arity(&self) -> Arity {
        match (self.set.is_some(), self.args.len()) {
            (true, _) => Arity::Set,
            (false, 0) => Arity::Plain,
            (false, 1) => Arity::One,
            (false, 2) => Arity::Two,
            _ => Arity::Set, // never in any alphabet
        }
    }

    fn is(&self, name: &str) -> bool {
        self.name == name
    }

    fn a(&self) -> u32 {
        self.args[0] as u32
    }

    fn b(&self) -> u32 {
        self.args[1] as u32
    }
}

/// Channel declarations per methodology.
fn alphabet(m: Methodology) -> &'static [(&'static str, Arity)] {
    use Arity::*;
    match m {
        Methodology::Pdfd => &[
            ("load_tree_actual", Plain),
            ("initialize_refinement_attempts_actual", Plain),
            ("determine_ki_actual", One),
            ("process_level_actual", One),
            ("get_trace_origin_actual", Two),
            ("increment_refinement_attempts_actual", One),
            ("finalize_subtrees_actual", One),
            ("finalize_unprocessed_nodes_actual", One),
            ("is_level_validation_failed", One),
            ("level_validation_successful", One),
            ("is_refactor_validation_successful", Two),
            ("is_bottom_up_validation_failed", One),
            ("bottom_up_validation_successful", One),
            ("is_top_down_validation_failed", One),
            ("top_down_validation_successful", One),
            ("has_exhausted_rmax_for_level", One),
            ("can_attempt_refinement", One),
            ("cond_threshold_met", One),
            ("cond_has_no_children", One),
            ("cond_all_descendants_validated", One),
            ("top_down_reaches_L5", One),
            ("refinement_failed_no_retry", Two),
            ("no_refinement_path_available", One),
            ("terminate_with_error_actual", Plain),
            ("terminate_successfully_actual", Plain),
        ],
        Methodology::Pbfd => &[
            ("load_tree_actual", Plain),
            ("initialize_refinement_attempts_actual", Plain),
            ("process_pattern_actual", One),
            ("validate_pattern_actual", One),
            ("resolve_depth_actual", One),
            ("process_refinement_pattern_actual", One),
            ("validate_refinement_pattern_actual", One),
            ("resolve_refinement_depth_actual", One),
            ("finalize_pattern_actual", One),
            ("increment_refinement_attempts_actual", One),
            ("terminate_success_actual", Plain),
            ("terminate_failure_actual", Plain),
            ("cond_all_validated", One),
            ("cond_not_all_validated", One),
            ("cond_i_lt_L", One),
            ("cond_i_eq_L", One),
            ("cond_pattern_next_empty", One),
            ("cond_pattern_next_nonempty", One),
            ("cond_ref_attempts_lt_Rmax", One),
            ("cond_ref_attempts_ge_Rmax", One),
            ("cond_j_exists_for_i", Two),
            ("cond_j_not_exists_for_i", One),
            ("cond_j_lt_i", Two),
            ("cond_j_eq_i", Two),
            ("cond_all_processed", One),
            ("cond_not_all_processed", One),
            ("cond_trace_origin_exists_for_unprocessed", Two),
            ("cond_trace_origin_not_exists_for_unprocessed", One),
        ],
        Methodology::Dad => &[
            ("load_dag_actual", Plain),
            ("initialize_queue_actual", Set),
            ("queue_not_empty", Plain),
            ("dequeue_actual", One),
            ("process_actual", One),
            ("validate_dependencies_actual", One),
            ("all_dependencies_processed", One),
            ("generate_children_actual", One),
            ("enqueue_nodes_actual", Set),
            ("missing_dependency", One),
            ("extend_graph_actual", Two),
            ("all_nodes_processed", Plain),
            ("perform_final_validation_actual", Plain),
            ("terminate_successfully_actual", Plain),
        ],
        Methodology::Dfd => &[
            ("load_tree_actual", Plain),
            ("initialize_stack_actual", One),
            ("stack_not_empty", One),
            ("stack_is_empty", Plain),
            ("dequeue_actual", One),
            ("process_actual", One),
            ("is_non_leaf", One),
            ("is_leaf", One),
            ("process_child_actual", One),
            ("push_children_actual", One),
            ("set_backtrack_point_actual", One),
            ("has_unprocessed_sibling", One),
            ("no_unprocessed_sibling", One),
            ("get_unprocessed_sibling_actual", One),
            ("push_sibling_actual", One),
            ("validate_subtree_actual", One),
            ("subtree_validated", One),
            ("backtrack_to_actual", Two),
            ("no_more_backtrack_points_above", One),
            ("terminate_successfully_actual", Plain),
        ],
        Methodology::Bfd => &[
            ("load_project_actual", Plain),
            ("initialize_queue_actual", One),
            ("dequeue_actual", One),
            ("develop_actual", One),
            ("enqueue_children_actual", One),
            ("current_level_processed_actual", Plain),
            ("validate_level_actual", One),
            ("not_last_level_actual", One),
            ("advance_level_actual", One),
            ("last_level_actual", One),
            ("terminate_successfully_actual", Plain),
        ],
        Methodology::Cdd => &[
            ("load_graph_actual", Plain),
            ("initialize_dependencies_actual", Plain),
            ("process_node_actual", One),
            ("test_failed", One),
            ("feedback_cycle_detected", One),
            ("trigger_revision_actual", One),
            ("refine_component_actual", One),
            ("refactor_complete_actual", One),
            ("all_components_written_actual", One),
            ("validate_increment_actual", One),
            ("feedback_received_actual", Plain),
            ("validation_failed_actual", Plain),
            ("identify_flaw_actual", Plain),
            ("flaw_identified_actual", One),
            ("advance_increment_actual", One),
            ("all_increments_validated_actual", Plain),
            ("final_deployment_actual", Plain),
            ("terminate_successfully_actual", Plain),
            ("terminate_with_error_actual", Plain),
        ],
        Methodology::Tle => &[
            ("start_actual", Plain),
            ("load_page_actual", Plain),
            ("parent_nodes_received_actual", Plain),
            ("resolve_grandparent_actual", Plain),
            ("load_grandparent_table_actual", Plain),
            ("resolve_child_actual", Plain),
            ("preset_child_status_actual", Plain),
            ("update_bitmask_actual", Plain),
            ("more_pages_exist_actual", Plain),
            ("no_more_pages_exist_actual", Plain),
            ("finalize_process_actual", Plain),
        ],
    }
}

/// Checks the channel name, its arity and (for the hybrid machines) that
/// every argument lies in the level domain.
fn in_alphabet(m: Methodology, e: &Ev<'_>, cfg: &CspConfig) -> Result<(), String> {
    let Some(&(_, arity)) = alphabet(m).iter().find(|c| c.0 == e.name) else {
        return Err(format!("{} is not in the {m} alphabet", e.name));
    };
    if arity != e.arity() {
        return Err(format!("{} used with the wrong arity", e.name));
    }
    if matches!(m, Methodology::Pdfd | Methodology::Pbfd)
        && e.args.iter().any(|&a| a == 0 || a > cfg.levels as u64)
    {
        return Err(format!(
            "{} argument outside levels 1..={}",
            e.name, cfg.levels
        ));
    }
    Ok(())
}

/// One process definition: consumes a free choice and names the events that
/// must follow it in fixed order.
trait Process {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>>;
}

fn ev(name: &str, args: &[u64]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push('.');
        s.push_str(&a.to_string());
    }
    s
}

/// Refinement counters as the recognizer sees them.
#[derive(Debug, Default)]
struct Counters {
    r_max: Option<u32>,
    attempts: BTreeMap<u32, u32>,
}

impl Counters {
    fn get(&self, l: u32) -> u32 {
        self.attempts.get(&l).copied().unwrap_or(0)
    }

    fn below(&self, l: u32) -> bool {
        self.r_max.is_none_or(|r| self.get(l) < r)
    }

    fn exhausted(&self, l: u32) -> bool {
        self.r_max.is_none_or(|r| self.get(l) >= r)
    }

    fn bump(&mut self, l: u32) {
        *self.attempts.entry(l).or_insert(0) += 1;
    }

    /// The silent increment on entering the next refinement level.
    fn bump_if_room(&mut self, l: u32) {
        if self.below(l) {
            self.bump(l);
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pd {
    Start,
    S1(u32),
    S2(u32),
    S2Ok(u32),
    Origin(u32),
    Attempt(u32, u32),
    S1R(u32, u32),
    S2R(u32, u32),
    S3(u32),
    S3Done(u32),
    S4(u32),
    S4Done(u32),
    Error,
    Stop,
}

struct PdfdProc {
    st: Pd,
    l: u32,
    c: Counters,
}

impl Process for PdfdProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let l = self.l;
        let one = |n: &str, a: u32| vec![ev(n, &[a as u64])];
        let (next, chain) = match self.st {
            Pd::Start if e.is("load_tree_actual") => (
                Pd::S1(1),
                vec!["initialize_refinement_attempts_actual".into()],
            ),
            Pd::S1(i) if e.is("determine_ki_actual") && e.a() == i => {
                (Pd::S2(i), one("process_level_actual", i))
            }
            Pd::S2(i) if e.is("is_level_validation_failed") && e.a() == i => {
                (Pd::Origin(i), vec![])
            }
            Pd::S2(i) if e.is("level_validation_successful") && e.a() == i => (Pd::S2Ok(i), vec![]),
            Pd::S2Ok(i) if e.is("cond_threshold_met") && e.a() == i => {
                (if i < l { Pd::S1(i + 1) } else { Pd::S3(i) }, vec![])
            }
            Pd::S2Ok(i) if e.is("cond_has_no_children") && e.a() == i => (Pd::S3(i), vec![]),
            Pd::S2Ok(i) | Pd::Origin(i) | Pd::Attempt(_, i)
                if e.is("no_refinement_path_available") && e.a() == i =>
            {
                (Pd::Error, vec![])
            }
            Pd::Origin(i) if e.is("get_trace_origin_actual") && e.a() == i && e.b() <= i => {
                (Pd::Attempt(e.b(), i), vec![])
            }
            Pd::Attempt(j, _) | Pd::S1R(j, _)
                if e.is("has_exhausted_rmax_for_level") && e.a() == j && self.c.exhausted(j) =>
            {
                (Pd::Error, vec![])
            }
            Pd::Attempt(j, i)
                if e.is("can_attempt_refinement") && e.a() == j && self.c.below(j) =>
            {
                self.c.bump(j);
                (
                    Pd::S1R(j, i),
                    one("increment_refinement_attempts_actual", j),
                )
            }
            Pd::S1R(j, i) if e.is("determine_ki_actual") && e.a() == j && self.c.below(j) => {
                (Pd::S2R(j, i), one("process_level_actual", j))
            }
            Pd::S2R(j, i)
                if e.is("is_refactor_validation_successful") && e.a() == j && e.b() == i =>
            {
                if j < i {
                    self.c.bump_if_room(j + 1);
                    (Pd::S1R(j + 1, i), vec![])
                } else {
                    (Pd::S2(i), vec![])
                }
            }
            Pd::S2R(j, i) if e.is("refinement_failed_no_retry") && e.a() == j && e.b() == i => {
                (Pd::Attempt(j, i), vec![])
            }
            Pd::S3(j) if e.is("finalize_subtrees_actual") && e.a() == j => (Pd::S3Done(j), vec![]),
            Pd::S3Done(j) if e.is("is_bottom_up_validation_failed") && e.a() == j => {
                (Pd::Origin(j), vec![])
            }
            Pd::S3Done(j) if e.is("bottom_up_validation_successful") && e.a() == j => {
                let next = if j <= 2 { Pd::S4(1) } else { Pd::S3(j - 1) };
                (next, one("cond_all_descendants_validated", j))
            }
            Pd::S4(k) if e.is("finalize_unprocessed_nodes_actual") && e.a() == k => {
                (Pd::S4Done(k), vec![])
            }
            Pd::S4Done(k) if e.is("is_top_down_validation_failed") && e.a() == k => {
                (Pd::Origin(k), vec![])
            }
            Pd::S4Done(k) if e.is("top_down_validation_successful") && e.a() == k => {
                if k == l {
                    let mut chain = one("top_down_reaches_L5", k);
                    chain.push("terminate_successfully_actual".into());
                    (Pd::Stop, chain)
                } else {
                    (Pd::S4(k + 1), vec![])
                }
            }
            Pd::Error if e.is("terminate_with_error_actual") => (Pd::Stop, vec![]),
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone, Copy)]
enum Pb {
    Start,
    S1(u32),
    S1Done(u32),
    S2(u32),
    S2Done(u32),
    /// Looking for a trace origin; `true` during the completion pass.
    Find(u32, bool),
    Retry(u32, u32),
    S1R(u32, u32),
    S1RDone(u32, u32),
    S2R(u32, u32),
    S2RDone(u32, u32),
    S3R(u32, u32),
    S3RDone(u32, u32),
    S3(u32),
    S3Done(u32),
    S4(u32),
    S4Done(u32),
    S4Ok(u32),
    Fail,
    Stop,
}

struct PbfdProc {
    st: Pb,
    l: u32,
    c: Counters,
}

impl Process for PbfdProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let l = self.l;
        let at = |n: &str, x: u32| e.is(n) && e.a() == x;
        let (next, chain) = match self.st {
            Pb::Start if e.is("load_tree_actual") => (
                Pb::S1(1),
                vec!["initialize_refinement_attempts_actual".into()],
            ),
            Pb::S1(i) if at("process_pattern_actual", i) => (Pb::S1Done(i), vec![]),
            Pb::S1Done(i) | Pb::S2Done(i) if at("cond_all_validated", i) => (Pb::S3(i), vec![]),
            Pb::S1Done(i) if at("cond_not_all_validated", i) => (Pb::S2(i), vec![]),
            Pb::S2(i) if at("validate_pattern_actual", i) => (Pb::S2Done(i), vec![]),
            Pb::S2Done(i) if at("cond_not_all_validated", i) => (Pb::Find(i, false), vec![]),
            Pb::Find(i, false) if at("cond_j_exists_for_i", i) && e.b() <= i => {
                (Pb::Retry(e.b(), i), vec![])
            }
            Pb::Find(i, false) if at("cond_j_not_exists_for_i", i) => (Pb::Fail, vec![]),
            Pb::Find(i, true)
                if at("cond_trace_origin_exists_for_unprocessed", i) && e.b() <= i =>
            {
                (Pb::Retry(e.b(), i), vec![])
            }
            Pb::Find(i, true) if at("cond_trace_origin_not_exists_for_unprocessed", i) => {
                (Pb::Fail, vec![])
            }
            Pb::Retry(j, i) if at("cond_ref_attempts_lt_Rmax", j) && self.c.below(j) => {
                self.c.bump(j);
                (
                    Pb::S1R(j, i),
                    vec![ev("increment_refinement_attempts_actual", &[j as u64])],
                )
            }
            Pb::Retry(j, _) | Pb::S1R(j, _)
                if at("cond_ref_attempts_ge_Rmax", j) && self.c.exhausted(j) =>
            {
                (Pb::Fail, vec![])
            }
            Pb::S1R(j, i) if at("process_refinement_pattern_actual", j) && self.c.below(j) => {
                (Pb::S1RDone(j, i), vec![])
            }
            Pb::S1RDone(j, i) | Pb::S2RDone(j, i) if at("cond_all_validated", j) => {
                (Pb::S3R(j, i), vec![])
            }
            Pb::S1RDone(j, i) if at("cond_not_all_validated", j) => (Pb::S2R(j, i), vec![]),
            Pb::S2R(j, i) if at("validate_refinement_pattern_actual", j) => {
                (Pb::S2RDone(j, i), vec![])
            }
            Pb::S2RDone(j, i) if at("cond_not_all_validated", j) => (Pb::Retry(j, i), vec![]),
            Pb::S3R(j, i) if at("resolve_refinement_depth_actual", j) => {
                (Pb::S3RDone(j, i), vec![])
            }
            Pb::S3RDone(j, i) if at("cond_j_lt_i", j) && e.b() == i && j < i => {
                self.c.bump_if_room(j + 1);
                (Pb::S1R(j + 1, i), vec![])
            }
            Pb::S3RDone(j, i) if at("cond_j_eq_i", j) && e.b() == i && j == i => {
                (Pb::S3(i), vec![])
            }
            Pb::S3(i) if at("resolve_depth_actual", i) => (Pb::S3Done(i), vec![]),
            Pb::S3Done(i) if at("cond_i_lt_L", i) && i < l => (
                Pb::S1(i + 1),
                vec![ev("cond_pattern_next_nonempty", &[i as u64])],
            ),
            Pb::S3Done(i)
                if (at("cond_i_eq_L", i) && i == l) || at("cond_pattern_next_empty", i) =>
            {
                (Pb::S4(1), vec![])
            }
            Pb::S4(i) if at("finalize_pattern_actual", i) => (Pb::S4Done(i), vec![]),
            Pb::S4Done(i) if at("cond_all_processed", i) => (Pb::S4Ok(i), vec![]),
            Pb::S4Done(i) if at("cond_not_all_processed", i) => (Pb::Find(i, true), vec![]),
            Pb::S4Ok(i) if at("cond_i_lt_L", i) && i < l => (Pb::S4(i + 1), vec![]),
            Pb::S4Ok(i) if at("cond_i_eq_L", i) && i == l => {
                (Pb::Stop, vec!["terminate_success_actual".into()])
            }
            Pb::Fail if e.is("terminate_failure_actual") => (Pb::Stop, vec![]),
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone)]
enum Da {
    Start,
    Init,
    S1,
    Dequeue,
    S2(u64),
    Extend(u64),
    /// Waiting for the enqueue; `Some` pins the set to the fresh node.
    Enqueue(Option<u64>),
    Stop,
}

struct DadProc {
    st: Da,
    queue: VecDeque<u64>,
}

impl Process for DadProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let (next, chain) = match self.st.clone() {
            Da::Start if e.is("load_dag_actual") => (Da::Init, vec![]),
            Da::Init if e.is("initialize_queue_actual") => {
                self.queue = e.set.clone()?.into();
                (Da::S1, vec![])
            }
            Da::S1 if e.is("queue_not_empty") && !self.queue.is_empty() => (Da::Dequeue, vec![]),
            Da::S1 if e.is("all_nodes_processed") && self.queue.is_empty() => (
                Da::Stop,
                vec![
                    "perform_final_validation_actual".into(),
                    "terminate_successfully_actual".into(),
                ],
            ),
            Da::Dequeue if e.is("dequeue_actual") && self.queue.front() == Some(&e.args[0]) => {
                let n = self.queue.pop_front()?;
                (
                    Da::S2(n),
                    vec![
                        ev("process_actual", &[n]),
                        ev("validate_dependencies_actual", &[n]),
                    ],
                )
            }
            Da::S2(n) if e.is("all_dependencies_processed") && e.args[0] == n => (
                Da::Enqueue(None),
                vec![ev("generate_children_actual", &[n])],
            ),
            Da::S2(n) if e.is("missing_dependency") && e.args[0] == n => (Da::Extend(n), vec![]),
            Da::Extend(n) if e.is("extend_graph_actual") && e.args[0] == n => {
                (Da::Enqueue(Some(e.args[1])), vec![])
            }
            Da::Enqueue(pin) if e.is("enqueue_nodes_actual") => {
                let set = e.set.clone()?;
                if pin.is_some_and(|p| set != [p]) {
                    return None;
                }
                self.queue.extend(set);
                (Da::S1, vec![])
            }
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone, Copy)]
enum Df {
    Start,
    Init,
    S1,
    Kind(u64),
    /// Backtrack state; the point is unbound right after a leaf.
    S2(Option<u64>),
    S3(u64),
    Backtrack(u64),
    Stop,
}

struct DfdProc {
    st: Df,
}

impl Process for DfdProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let arg = |n: &str| e.is(n).then(|| e.args[0]);
        let (next, chain) = match self.st {
            Df::Start if e.is("load_tree_actual") => (Df::Init, vec![]),
            Df::Init if e.is("initialize_stack_actual") => (Df::S1, vec![]),
            Df::S1 if e.is("stack_is_empty") => {
                (Df::Stop, vec!["terminate_successfully_actual".into()])
            }
            Df::S1 if e.is("stack_not_empty") => {
                let c = e.args[0];
                (
                    Df::Kind(c),
                    vec![ev("dequeue_actual", &[c]), ev("process_actual", &[c])],
                )
            }
            Df::Kind(c) if arg("is_non_leaf") == Some(c) => (
                Df::S1,
                vec![
                    ev("process_child_actual", &[c]),
                    ev("push_children_actual", &[c]),
                ],
            ),
            Df::Kind(c) if arg("is_leaf") == Some(c) => {
                (Df::S2(None), vec![ev("set_backtrack_point_actual", &[c])])
            }
            Df::S2(b) if e.is("has_unprocessed_sibling") && b.is_none_or(|b| b == e.args[0]) => {
                let b = e.args[0];
                (
                    Df::S1,
                    vec![
                        ev("get_unprocessed_sibling_actual", &[b]),
                        ev("push_sibling_actual", &[b]),
                    ],
                )
            }
            Df::S2(b) if e.is("no_unprocessed_sibling") && b.is_none_or(|b| b == e.args[0]) => {
                let b = e.args[0];
                (Df::S3(b), vec![ev("validate_subtree_actual", &[b])])
            }
            Df::S3(b) if arg("no_more_backtrack_points_above") == Some(b) => {
                (Df::Stop, vec!["terminate_successfully_actual".into()])
            }
            Df::S3(b) if arg("subtree_validated") == Some(b) => (Df::Backtrack(b), vec![]),
            Df::Backtrack(b) if arg("backtrack_to_actual") == Some(b) => {
                (Df::S2(Some(e.args[1])), vec![])
            }
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone, Copy)]
enum Bf {
    Start,
    Init,
    S1(u64),
    S2(u64),
    Stop,
}

struct BfdProc {
    st: Bf,
}

impl Process for BfdProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let (next, chain) = match self.st {
            Bf::Start if e.is("load_project_actual") => (Bf::Init, vec![]),
            Bf::Init if e.is("initialize_queue_actual") => (Bf::S1(1), vec![]),
            Bf::S1(k) if e.is("dequeue_actual") => {
                let c = e.args[0];
                (
                    Bf::S1(k),
                    vec![
                        ev("develop_actual", &[c]),
                        ev("enqueue_children_actual", &[c]),
                    ],
                )
            }
            Bf::S1(k) if e.is("current_level_processed_actual") => {
                (Bf::S2(k), vec![ev("validate_level_actual", &[k])])
            }
            Bf::S2(k) if e.is("not_last_level_actual") && e.args[0] == k => {
                (Bf::S1(k + 1), vec![ev("advance_level_actual", &[k])])
            }
            Bf::S2(k) if e.is("last_level_actual") && e.args[0] == k => {
                (Bf::Stop, vec!["terminate_successfully_actual".into()])
            }
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone, Copy)]
enum Cd {
    Start,
    S1(u64),
    S2(u64, u64),
    S3(u64),
    Flaw(u64),
    Stop,
}

struct CddProc {
    st: Cd,
}

impl Process for CddProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let (next, chain) = match self.st {
            Cd::Start if e.is("load_graph_actual") => {
                (Cd::S1(1), vec!["initialize_dependencies_actual".into()])
            }
            Cd::S1(k) if e.is("process_node_actual") => (Cd::S1(k), vec![]),
            Cd::S1(k) if e.is("test_failed") => (Cd::S2(e.args[0], k), vec![]),
            Cd::S1(k) if e.is("feedback_cycle_detected") => {
                let c = e.args[0];
                (Cd::S2(c, k), vec![ev("trigger_revision_actual", &[c])])
            }
            Cd::S1(k) if e.is("all_components_written_actual") && e.args[0] == k => {
                (Cd::S3(k), vec![ev("validate_increment_actual", &[k])])
            }
            Cd::S2(c, k) if e.is("refine_component_actual") && e.args[0] == c => {
                (Cd::S2(c, k), vec![])
            }
            Cd::S2(c, k) if e.is("refactor_complete_actual") && e.args[0] == c => {
                (Cd::S1(k), vec![])
            }
            Cd::S2(..) if e.is("terminate_with_error_actual") => (Cd::Stop, vec![]),
            Cd::S3(k) if e.is("feedback_received_actual") || e.is("validation_failed_actual") => {
                (Cd::Flaw(k), vec!["identify_flaw_actual".into()])
            }
            Cd::Flaw(k) if e.is("flaw_identified_actual") => (Cd::S2(e.args[0], k), vec![]),
            Cd::S3(_) if e.is("all_increments_validated_actual") => (
                Cd::Stop,
                vec![
                    "final_deployment_actual".into(),
                    "terminate_successfully_actual".into(),
                ],
            ),
            Cd::S3(k) if e.is("advance_increment_actual") && e.args[0] == k => {
                (Cd::S1(k + 1), vec![])
            }
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

#[derive(Debug, Clone, Copy)]
enum Tl {
    Start,
    S0,
    S5,
    S6,
    Stop,
}

struct TleProc {
    st: Tl,
}

impl Process for TleProc {
    fn accept(&mut self, e: &Ev<'_>) -> Option<Vec<String>> {
        let (next, chain) = match self.st {
            Tl::Start if e.is("start_actual") => (Tl::S0, vec![]),
            Tl::S0 if e.is("load_page_actual") => (
                Tl::S5,
                [
                    "parent_nodes_received_actual",
                    "resolve_grandparent_actual",
                    "load_grandparent_table_actual",
                    "resolve_child_actual",
                    "preset_child_status_actual",
                    "update_bitmask_actual",
                ]
                .map(String::from)
                .to_vec(),
            ),
            Tl::S5 if e.is("more_pages_exist_actual") => (Tl::S0, vec![]),
            Tl::S0 | Tl::S5 if e.is("no_more_pages_exist_actual") => (Tl::S6, vec![]),
            Tl::S6 if e.is("finalize_process_actual") => (Tl::Stop, vec![]),
            _ => return None,
        };
        self.st = next;
        Some(chain)
    }
}

fn process_for(m: Methodology, cfg: &CspConfig) -> Box<dyn Process> {
    let counters = || Counters {
        r_max: cfg.r_max,
        attempts: BTreeMap::new(),
    };
    match m {
        Methodology::Pdfd => Box::new(PdfdProc {
            st: Pd::Start,
            l: cfg.levels,
            c: counters(),
        }),
        Methodology::Pbfd => Box::new(PbfdProc {
            st: Pb::Start,
            l: cfg.levels,
            c: counters(),
        }),
        Methodology::Dad => Box::new(DadProc {
            st: Da::Start,
            queue: VecDeque::new(),
        }),
        Methodology::Dfd => Box::new(DfdProc { st: Df::Start }),
        Methodology::Bfd => Box::new(BfdProc { st: Bf::Start }),
        Methodology::Cdd => Box::new(CddProc { st: Cd::Start }),
        Methodology::Tle => Box::new(TleProc { st: Tl::Start }),
    }
}

/// Runs the recognizer over an event sequence.
pub fn recognize<S: AsRef<str>>(
    m: Methodology,
    events: &[S],
    cfg: &CspConfig,
) -> Result<(), CspReject> {
    let mut proc_ = process_for(m, cfg);
    let mut pending: VecDeque<String> = VecDeque::new();
    for (index, raw) in events.iter().enumerate() {
        let raw = raw.as_ref();
        let reject = |reason: String| CspReject {
            index,
            event: raw.to_string(),
            reason,
        };
        let e = parse(raw).ok_or_else(|| reject("malformed event".into()))?;
        in_alphabet(m, &e, cfg).map_err(reject)?;
        if let Some(want) = pending.pop_front() {
            if want != raw {
                return Err(reject(format!("expected {want}")));
            }
            continue;
        }
        let chain = proc_
            .accept(&e)
            .ok_or_else(|| reject("not enabled in the current state".into()))?;
        pending.extend(chain);
    }
    Ok(())
}

/// Alphabet and sequence conformance of a recorded trace.
pub fn check_csp_conformance(trace: &[TraceEvent], m: Methodology, cfg: &CspConfig) -> Verdict {
    const NAME: &str = "csp";
    let events = csp_events(trace);
    match recognize(m, &events, cfg) {
        Ok(()) => Verdict::pass(NAME, format!("{} events accepted", events.len())),
        Err(r) => {
            // map the event position back to the transition that emitted it
            let mut seen = 0;
            let at = trace.iter().position(|t| {
                seen += t.payload.csp.len();
                seen > r.index
            });
            Verdict::fail(NAME, at, r.to_string())
        }
    }
}
