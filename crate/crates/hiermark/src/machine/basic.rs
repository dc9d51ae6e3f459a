//! The four basic methodologies: dependency-driven DAG processing, stack-based
//! depth-first, level-synchronized breadth-first, and incremental cyclic
//! development with bounded refinement.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::hierarchy::{Hierarchy, NodeId, NodeStatus};
use crate::trace::{Methodology, Payload, TraceLog};

use super::{FailureReason, MachineError, Outcome, Run, Scenario};

fn ev(name: &str, args: &[NodeId]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push('.');
        s.push_str(&a.to_string());
    }
    s
}

fn ev_set(name: &str, ids: &[NodeId]) -> String {
    let body: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    format!("{name}.{{{}}}", body.join(","))
}

fn payload(nodes: Vec<NodeId>, level: Option<u32>, csp: Vec<String>) -> Payload {
    Payload {
        level,
        nodes,
        csp,
        ..Payload::default()
    }
}

fn finish(
    methodology: Methodology,
    log: TraceLog,
    outcome: Outcome,
    done: impl IntoIterator<Item = NodeId>,
) -> Run {
    Run {
        methodology,
        trace: log.into_events(),
        outcome,
        attempts: BTreeMap::new(),
        statuses: done
            .into_iter()
            .map(|n| (n, NodeStatus::Finalized))
            .collect(),
    }
}

/// Directed graph where an edge `(u, v)` makes `u` a dependency of `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    pub nodes: Vec<NodeId>,
    #[serde(default)]
    pub edges: Vec<(NodeId, NodeId)>,
}

impl Dag {
    pub fn from_hierarchy(h: &Hierarchy) -> Self {
        Dag {
            nodes: h.nodes().iter().map(|n| n.id).collect(),
            edges: h
                .nodes()
                .iter()
                .filter_map(|n| n.parent_id.map(|p| (p, n.id)))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MachineError> {
        let mut g: Dag =
            serde_json::from_str(text).map_err(|e| MachineError::InvalidGraph(e.to_string()))?;
        g.nodes.sort_unstable();
        let before = g.nodes.len();
        g.nodes.dedup();
        if g.nodes.len() != before {
            return Err(MachineError::InvalidGraph("duplicate node id".into()));
        }
        for &(u, v) in &g.edges {
            if g.nodes.binary_search(&u).is_err() || g.nodes.binary_search(&v).is_err() {
                return Err(MachineError::InvalidGraph(format!(
                    "edge {u}->{v} names an unknown node"
                )));
            }
        }
        Ok(g)
    }

    pub fn deps(&self, n: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.1 == n)
            .map(|e| e.0)
            .collect()
    }

    pub fn children(&self, n: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|e| e.0 == n)
            .map(|e| e.1)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_cycle(&self) -> bool {
        let mut indeg: BTreeMap<NodeId, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for &(_, v) in &self.edges {
            *indeg.entry(v).or_insert(0) += 1;
        }
        let mut ready: Vec<NodeId> = indeg.iter().filter(|e| *e.1 == 0).map(|e| *e.0).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for c in self.children(n) {
                let d = indeg.get_mut(&c).expect("edge endpoints are nodes");
                *d -= 1;
                if *d == 0 {
                    ready.push(c);
                }
            }
        }
        seen != indeg.len()
    }
}

/// Runs the dependency-driven machine and returns the (possibly extended) graph.
pub fn run_dad_extended(g: &Dag, sc: &Scenario) -> Result<(Run, Dag), MachineError> {
    if g.nodes.is_empty() {
        return Err(MachineError::InvalidGraph("empty graph".into()));
    }
    if g.has_cycle() {
        return Err(MachineError::InvalidGraph("dependency cycle".into()));
    }
    let mut g = g.clone();
    let mut log = TraceLog::new();
    let mut missing: BTreeSet<NodeId> = sc.missing_dependencies.iter().copied().collect();
    let mut done: BTreeSet<NodeId> = BTreeSet::new();
    let mut queued: BTreeSet<NodeId> = BTreeSet::new();

    let sources: Vec<NodeId> = g
        .nodes
        .iter()
        .copied()
        .filter(|&n| g.deps(n).is_empty())
        .collect();
    let mut queue: VecDeque<NodeId> = sources.iter().copied().collect();
    queued.extend(&sources);
    log.push(
        "DA1",
        "S0",
        "S1",
        payload(
            sources.clone(),
            None,
            vec![
                "load_dag_actual".into(),
                ev_set("initialize_queue_actual", &sources),
            ],
        ),
    );

    while let Some(n) = queue.pop_front() {
        let csp = vec![
            "queue_not_empty".to_string(),
            ev("dequeue_actual", &[n]),
            ev("process_actual", &[n]),
            ev("validate_dependencies_actual", &[n]),
        ];
        log.push("DA2", "S1", format!("S2({n})"), payload(vec![n], None, csp));

        if missing.remove(&n) {
            let fresh = g.nodes.iter().max().copied().unwrap_or(0) + 1;
            g.nodes.push(fresh);
            g.edges.push((fresh, n));
            if g.has_cycle() {
                return Err(MachineError::AcyclicityViolation(n));
            }
            queued.remove(&n);
            log.push(
                "DA4",
                format!("S2({n})"),
                format!("S3({fresh})"),
                payload(
                    vec![n, fresh],
                    None,
                    vec![
                        ev("missing_dependency", &[n]),
                        ev("extend_graph_actual", &[n, fresh]),
                    ],
                ),
            );
            queue.push_back(fresh);
            queued.insert(fresh);
            log.push(
                "DA5",
                format!("S3({fresh})"),
                "S1",
                payload(
                    vec![fresh],
                    None,
                    vec![ev_set("enqueue_nodes_actual", &[fresh])],
                ),
            );
            continue;
        }

        done.insert(n);
        let ready: Vec<NodeId> = g
            .children(n)
            .into_iter()
            .filter(|c| !queued.contains(c) && !done.contains(c))
            .filter(|&c| g.deps(c).iter().all(|d| done.contains(d)))
            .collect();
        queue.extend(&ready);
        queued.extend(&ready);
        log.push(
            "DA3",
            format!("S2({n})"),
            "S1",
            payload(
                ready.clone(),
                None,
                vec![
                    ev("all_dependencies_processed", &[n]),
                    ev("generate_children_actual", &[n]),
                    ev_set("enqueue_nodes_actual", &ready),
                ],
            ),
        );
    }

    log.push(
        "DA6",
        "S1",
        "T",
        payload(
            Vec::new(),
            None,
            vec![
                "all_nodes_processed".into(),
                "perform_final_validation_actual".into(),
                "terminate_successfully_actual".into(),
            ],
        ),
    );
    let run = finish(Methodology::Dad, log, Outcome::Success, done);
    Ok((run, g))
}

pub fn run_dad(g: &Dag, sc: &Scenario) -> Result<Run, MachineError> {
    run_dad_extended(g, sc).map(|(run, _)| run)
}

/// Pops and processes stack entries until a leaf; returns the backtrack point
/// the leaf sets (its parent, or itself when the root is a leaf).
fn dfd_descend(
    h: &Hierarchy,
    stack: &mut Vec<usize>,
    done: &mut Vec<NodeId>,
    log: &mut TraceLog,
) -> usize {
    loop {
        let c = stack.pop().expect("S1 is entered with a non-empty stack");
        let cid = h.at(c).id;
        done.push(cid);
        let mut csp = vec![
            ev("stack_not_empty", &[cid]),
            ev("dequeue_actual", &[cid]),
            ev("process_actual", &[cid]),
        ];
        if h.is_leaf_idx(c) {
            let b = h.parent_idx(c).unwrap_or(c);
            csp.push(ev("is_leaf", &[cid]));
            csp.push(ev("set_backtrack_point_actual", &[cid]));
            log.push(
                "DF3",
                "S1",
                format!("S2({})", h.at(b).id),
                payload(vec![cid], None, csp),
            );
            return b;
        }
        stack.extend(h.children_idx(c).iter().rev());
        csp.push(ev("is_non_leaf", &[cid]));
        csp.push(ev("process_child_actual", &[cid]));
        csp.push(ev("push_children_actual", &[cid]));
        log.push("DF2", "S1", "S1", payload(vec![cid], None, csp));
    }
}

/// Stack-driven depth-first traversal with explicit backtrack points.
pub fn run_dfd(h: &Hierarchy) -> Run {
    let mut log = TraceLog::new();
    let id = |i: usize| h.at(i).id;
    let root = h.root_idx();
    let mut stack = vec![root];
    let mut done = Vec::new();
    log.push(
        "DF1",
        "S0",
        "S1",
        payload(
            vec![id(root)],
            None,
            vec![
                "load_tree_actual".into(),
                ev("initialize_stack_actual", &[id(root)]),
            ],
        ),
    );
    let mut b = dfd_descend(h, &mut stack, &mut done, &mut log);
    loop {
        if let Some(s) = stack
            .last()
            .copied()
            .filter(|&t| h.parent_idx(t) == Some(b))
        {
            log.push(
                "DF4",
                format!("S2({})", id(b)),
                "S1",
                payload(
                    vec![id(s)],
                    None,
                    vec![
                        ev("has_unprocessed_sibling", &[id(b)]),
                        ev("get_unprocessed_sibling_actual", &[id(b)]),
                        ev("push_sibling_actual", &[id(b)]),
                    ],
                ),
            );
            b = dfd_descend(h, &mut stack, &mut done, &mut log);
            continue;
        }
        log.push(
            "DF5",
            format!("S2({})", id(b)),
            format!("S3({})", id(b)),
            payload(
                vec![id(b)],
                None,
                vec![
                    ev("no_unprocessed_sibling", &[id(b)]),
                    ev("validate_subtree_actual", &[id(b)]),
                ],
            ),
        );
        let Some(p) = h.parent_idx(b) else {
            log.push(
                "DF7",
                format!("S3({})", id(b)),
                "T",
                payload(
                    vec![id(b)],
                    None,
                    vec![
                        ev("no_more_backtrack_points_above", &[id(b)]),
                        "terminate_successfully_actual".into(),
                    ],
                ),
            );
            break;
        };
        log.push(
            "DF6",
            format!("S3({})", id(b)),
            format!("S2({})", id(p)),
            payload(
                vec![id(b), id(p)],
                None,
                vec![
                    ev("subtree_validated", &[id(b)]),
                    ev("backtrack_to_actual", &[id(b), id(p)]),
                ],
            ),
        );
        b = p;
    }
    finish(Methodology::Dfd, log, Outcome::Success, done)
}

/// Level-synchronized breadth-first traversal. `reverse` flips the order
/// in which each level's nodes are developed.
pub fn run_bfd_ordered(h: &Hierarchy, reverse: bool) -> Run {
    let mut log = TraceLog::new();
    let root = h.at(h.root_idx()).id;
    let l = h.max_level();
    let mut done = Vec::new();
    log.push(
        "BF1",
        "S0",
        "S1(1)",
        payload(
            vec![root],
            Some(1),
            vec![
                "load_project_actual".into(),
                ev("initialize_queue_actual", &[root]),
            ],
        ),
    );
    let mut level: Vec<usize> = vec![h.root_idx()];
    for k in 1..=l {
        if reverse {
            level.reverse();
        }
        let mut next = Vec::new();
        for &c in &level {
            let cid = h.at(c).id;
            done.push(cid);
            next.extend(h.children_idx(c));
            log.push(
                "BF2",
                format!("S1({k})"),
                format!("S1({k})"),
                payload(
                    vec![cid],
                    Some(k),
                    vec![
                        ev("dequeue_actual", &[cid]),
                        ev("develop_actual", &[cid]),
                        ev("enqueue_children_actual", &[cid]),
                    ],
                ),
            );
        }
        log.push(
            "BF3",
            format!("S1({k})"),
            format!("S2({k})"),
            payload(
                Vec::new(),
                Some(k),
                vec![
                    "current_level_processed_actual".into(),
                    ev("validate_level_actual", &[k as u64]),
                ],
            ),
        );
        if k < l {
            log.push(
                "BF4",
                format!("S2({k})"),
                format!("S1({})", k + 1),
                payload(
                    Vec::new(),
                    Some(k),
                    vec![
                        ev("not_last_level_actual", &[k as u64]),
                        ev("advance_level_actual", &[k as u64]),
                    ],
                ),
            );
        } else {
            log.push(
                "BF5",
                format!("S2({k})"),
                "T",
                payload(
                    Vec::new(),
                    Some(k),
                    vec![
                        ev("last_level_actual", &[k as u64]),
                        "terminate_successfully_actual".into(),
                    ],
                ),
            );
        }
        if reverse {
            next.sort_by_key(|&n| {
                let node = h.at(n);
                (node.parent_id, node.child_index)
            });
        }
        level = next;
    }
    finish(Methodology::Bfd, log, Outcome::Success, done)
}

pub fn run_bfd(h: &Hierarchy) -> Run {
    run_bfd_ordered(h, false)
}

/// Incremental development over component increments with per-component
/// refinement capped at `max_refinements` iterations.
pub fn run_cdd(components: &[NodeId], sc: &Scenario) -> Result<Run, MachineError> {
    if sc.max_refinements == 0 {
        return Err(MachineError::InvalidScenario(
            "max_refinements must be positive".into(),
        ));
    }
    let increments: Vec<Vec<NodeId>> = if sc.increments.is_empty() {
        vec![components.to_vec()]
    } else {
        sc.increments.clone()
    };
    let known: BTreeSet<NodeId> = components.iter().copied().collect();
    for c in increments.iter().flatten() {
        if !known.contains(c) {
            return Err(MachineError::InvalidScenario(format!(
                "increment names unknown component {c}"
            )));
        }
    }

    let m = sc.max_refinements;
    let mut test_left = sc.test_failures.clone();
    let mut cycle_left = sc.feedback_cycles.clone();
    let mut refine_left = sc.refine_failures.clone();
    let mut iterations: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut log = TraceLog::new();
    let mut written: BTreeSet<NodeId> = BTreeSet::new();

    log.push(
        "CD1",
        "S0",
        "S1(1)",
        payload(
            Vec::new(),
            None,
            vec![
                "load_graph_actual".into(),
                "initialize_dependencies_actual".into(),
            ],
        ),
    );

    // One refinement iteration; true when it completes the rework.
    let mut refine = |c: NodeId, iterations: &mut BTreeMap<NodeId, u32>| -> bool {
        *iterations.entry(c).or_insert(0) += 1;
        match refine_left.get_mut(&c) {
            Some(n) if *n > 0 => {
                *n -= 1;
                false
            }
            _ => true,
        }
    };

    for (ki, inc) in increments.iter().enumerate() {
        let k = ki as u64 + 1;
        let s1 = format!("S1({k})");
        let mut flaws: VecDeque<NodeId> = sc
            .validation_failures
            .get(&(k as u32))
            .cloned()
            .unwrap_or_default()
            .into();
        // Components awaiting refinement: (component, result of the last iteration).
        let mut rework: Option<(NodeId, Option<bool>)> = None;
        loop {
            if let Some((c, last)) = rework {
                let s2 = format!("S2({c},{k})");
                match last {
                    Some(true) => {
                        log.push(
                            "CD4",
                            &s2,
                            &s1,
                            payload(vec![c], None, vec![ev("refactor_complete_actual", &[c])]),
                        );
                        rework = None;
                        continue;
                    }
                    _ if iterations.get(&c).copied().unwrap_or(0) >= m => {
                        log.push(
                            "CD4b",
                            &s2,
                            "S5",
                            Payload {
                                reason: Some(
                                    FailureReason::LoopUnbounded { component: c }.to_string(),
                                ),
                                ..payload(vec![c], None, vec!["terminate_with_error_actual".into()])
                            },
                        );
                        let outcome = Outcome::Error(FailureReason::LoopUnbounded { component: c });
                        return Ok(finish(Methodology::Cdd, log, outcome, written));
                    }
                    _ => {
                        let ok = refine(c, &mut iterations);
                        log.push(
                            "CD4a",
                            &s2,
                            &s2,
                            payload(vec![c], None, vec![ev("refine_component_actual", &[c])]),
                        );
                        rework = Some((c, Some(ok)));
                        continue;
                    }
                }
            }
            if let Some(&c) = inc.iter().find(|c| !written.contains(c)) {
                log.push(
                    "CD2",
                    &s1,
                    &s1,
                    payload(vec![c], None, vec![ev("process_node_actual", &[c])]),
                );
                let s2 = format!("S2({c},{k})");
                if take(&mut test_left, c) {
                    if iterations.get(&c).copied().unwrap_or(0) >= m {
                        rework = Some((c, None));
                        log.push(
                            "CD3a",
                            &s1,
                            &s2,
                            payload(vec![c], None, vec![ev("test_failed", &[c])]),
                        );
                        continue;
                    }
                    let ok = refine(c, &mut iterations);
                    log.push(
                        "CD3a",
                        &s1,
                        &s2,
                        payload(
                            vec![c],
                            None,
                            vec![ev("test_failed", &[c]), ev("refine_component_actual", &[c])],
                        ),
                    );
                    rework = Some((c, Some(ok)));
                    continue;
                }
                if take(&mut cycle_left, c) {
                    let ok = if iterations.get(&c).copied().unwrap_or(0) >= m {
                        None
                    } else {
                        Some(refine(c, &mut iterations))
                    };
                    log.push(
                        "CD3b",
                        &s1,
                        &s2,
                        payload(
                            vec![c],
                            None,
                            vec![
                                ev("feedback_cycle_detected", &[c]),
                                ev("trigger_revision_actual", &[c]),
                            ],
                        ),
                    );
                    rework = Some((c, ok));
                    continue;
                }
                written.insert(c);
                continue;
            }
            let s3 = format!("S3({k})");
            log.push(
                "CD5",
                &s1,
                &s3,
                payload(
                    inc.clone(),
                    None,
                    vec![
                        ev("all_components_written_actual", &[k]),
                        ev("validate_increment_actual", &[k]),
                    ],
                ),
            );
            if let Some(c) = flaws.pop_front() {
                let channel = if flaws.len().is_multiple_of(2) {
                    "validation_failed_actual"
                } else {
                    "feedback_received_actual"
                };
                log.push(
                    "CD6",
                    &s3,
                    format!("S2({c},{k})"),
                    payload(
                        vec![c],
                        None,
                        vec![
                            channel.into(),
                            "identify_flaw_actual".into(),
                            ev("flaw_identified_actual", &[c]),
                        ],
                    ),
                );
                rework = Some((c, None));
                continue;
            }
            if ki + 1 == increments.len() {
                log.push(
                    "CD7",
                    &s3,
                    "T",
                    payload(
                        Vec::new(),
                        None,
                        vec![
                            "all_increments_validated_actual".into(),
                            "final_deployment_actual".into(),
                            "terminate_successfully_actual".into(),
                        ],
                    ),
                );
            } else {
                log.push(
                    "CD8",
                    &s3,
                    format!("S1({})", k + 1),
                    payload(Vec::new(), None, vec![ev("advance_increment_actual", &[k])]),
                );
            }
            break;
        }
    }
    Ok(finish(Methodology::Cdd, log, Outcome::Success, written))
}

fn take(budget: &mut BTreeMap<NodeId, u32>, c: NodeId) -> bool {
    match budget.get_mut(&c) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> Hierarchy {
        Hierarchy::from_json(r#"[{"id":0,"name":"root","width_class":"int32","parent_id":null,"child_index":0,"level":1}]"#)
            .unwrap()
    }

    #[test]
    fn single_node_traces() {
        let h = single();
        let dad = run_dad(&Dag::from_hierarchy(&h), &Scenario::default()).unwrap();
        assert_eq!(dad.rules(), ["DA1", "DA2", "DA3", "DA6"]);
        assert_eq!(run_dfd(&h).rules(), ["DF1", "DF3", "DF5", "DF7"]);
        assert_eq!(run_bfd(&h).rules(), ["BF1", "BF2", "BF3", "BF5"]);
    }

    #[test]
    fn dad_extension_precedes_dependent() {
        let g = Dag::from_json(r#"{"nodes":[1,2,3],"edges":[[1,2],[2,3]]}"#).unwrap();
        let sc = Scenario {
            missing_dependencies: vec![2],
            ..Scenario::default()
        };
        let (run, ext) = run_dad_extended(&g, &sc).unwrap();
        assert_eq!(ext.nodes, [1, 2, 3, 4]);
        assert!(ext.edges.contains(&(4, 2)));
        assert_eq!(
            run.rules(),
            [
                "DA1", "DA2", "DA3", "DA2", "DA4", "DA5", "DA2", "DA3", "DA2", "DA3", "DA2", "DA3",
                "DA6"
            ]
        );
    }

    #[test]
    fn dad_rejects_cycles() {
        let g = Dag::from_json(r#"{"nodes":[1,2],"edges":[[1,2],[2,1]]}"#).unwrap();
        assert!(run_dad(&g, &Scenario::default()).is_err());
    }

    #[test]
    fn cdd_straight_line() {
        let run = run_cdd(&[1, 2, 3], &Scenario::default()).unwrap();
        assert_eq!(run.rules(), ["CD1", "CD2", "CD2", "CD2", "CD5", "CD7"]);
    }

    #[test]
    fn cdd_single_rework() {
        let sc = Scenario {
            test_failures: BTreeMap::from([(2, 1)]),
            ..Scenario::default()
        };
        let run = run_cdd(&[1, 2], &sc).unwrap();
        assert_eq!(
            run.rules(),
            ["CD1", "CD2", "CD2", "CD3a", "CD4", "CD2", "CD5", "CD7"]
        );
    }

    #[test]
    fn cdd_loop_unbounded_after_m_refinements() {
        let sc = Scenario {
            test_failures: BTreeMap::from([(1, 1)]),
            refine_failures: BTreeMap::from([(1, 4)]),
            max_refinements: 3,
            ..Scenario::default()
        };
        let run = run_cdd(&[1], &sc).unwrap();
        let refines = crate::trace::csp_events(&run.trace)
            .iter()
            .filter(|e| e.starts_with("refine_component_actual"))
            .count();
        assert_eq!(refines, 3);
        assert_eq!(
            run.outcome,
            Outcome::Error(FailureReason::LoopUnbounded { component: 1 })
        );
    }
}
