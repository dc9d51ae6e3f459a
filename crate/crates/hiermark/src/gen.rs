//! Seeded generators for trees, DAGs and scenarios used by fuzzing and benches.

use std::collections::BTreeMap;

use rand::Rng;

use crate::hierarchy::{Hierarchy, HierarchyNode, NodeId, WidthClass};
use crate::machine::{Dag, Scenario, TraceOrigin};

/// Random rooted tree with `1..=max_nodes` nodes and at most `max_levels` levels.
/// Ids are 1..=n in creation order.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, max_levels: u32) -> Hierarchy {
    let n = rng.random_range(1..=max_nodes.max(1));
    let mut nodes = vec![HierarchyNode {
        id: 1,
        name: "n1".into(),
        name_type_id: None,
        width_class: WidthClass::W32,
        parent_id: None,
        child_index: 0,
        level: 1,
    }];
    let mut fanout: Vec<u32> = vec![0];
    for id in 2..=n as NodeId {
        let open: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].level < max_levels && fanout[i] < 32)
            .collect();
        let Some(&p) = open.get(rng.random_range(0..open.len().max(1))) else {
            break;
        };
        nodes.push(HierarchyNode {
            id,
            name: format!("n{id}"),
            name_type_id: None,
            width_class: WidthClass::W32,
            parent_id: Some(nodes[p].id),
            child_index: fanout[p],
            level: nodes[p].level + 1,
        });
        fanout[p] += 1;
        fanout.push(0);
    }
    Hierarchy::from_nodes(nodes).expect("generated tree is valid")
}

fn plain(id: NodeId, parent: Option<NodeId>, child_index: u32, level: u32) -> HierarchyNode {
    HierarchyNode {
        id,
        name: format!("n{id}"),
        name_type_id: None,
        width_class: WidthClass::W32,
        parent_id: parent,
        child_index,
        level,
    }
}

/// Exactly `n` nodes filled breadth-first, `fanout` children per node.
pub fn fanout_tree(n: usize, fanout: u32) -> Hierarchy {
    assert!((1..=32).contains(&fanout), "fanout must fit a 32-bit mask");
    let f = fanout as NodeId;
    let mut nodes = vec![plain(1, None, 0, 1)];
    for id in 2..=n as NodeId {
        let parent = (id - 2) / f + 1;
        let level = nodes[parent as usize - 1].level + 1;
        nodes.push(plain(id, Some(parent), ((id - 2) % f) as u32, level));
    }
    Hierarchy::from_nodes(nodes).expect("fanout tree is valid")
}

/// Root, one structural child, `c` parents each holding `c` leaves.
pub fn uniform_tree(c: u32) -> Hierarchy {
    let mut nodes = vec![plain(1, None, 0, 1), plain(2, Some(1), 0, 2)];
    let mut next = 3;
    for p in 0..c {
        let pid = next;
        nodes.push(plain(pid, Some(2), p, 3));
        next += 1;
        for k in 0..c {
            nodes.push(plain(next, Some(pid), k, 4));
            next += 1;
        }
    }
    Hierarchy::from_nodes(nodes).expect("uniform tree is valid")
}

/// Random DAG over ids `1..=n`; edges only run from lower to higher ids.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, edge_p: f64) -> Dag {
    let nodes: Vec<NodeId> = (1..=n as NodeId).collect();
    let mut edges = Vec::new();
    for u in 1..=n as NodeId {
        for v in u + 1..=n as NodeId {
            if rng.random_bool(edge_p) {
                edges.push((u, v));
            }
        }
    }
    Dag { nodes, edges }
}

/// Random hybrid-machine scenario valid for `h`.
pub fn random_scenario<R: Rng>(rng: &mut R, h: &Hierarchy, r_max: u32) -> Scenario {
    let l = h.max_level();
    let trace_origin = match rng.random_range(0..3) {
        0 => TraceOrigin::DependencyMin,
        1 => TraceOrigin::Fixed(rng.random_range(1..=l)),
        _ => {
            let mut map = BTreeMap::new();
            for i in 1..=l {
                if rng.random_bool(0.8) {
                    map.insert(i, rng.random_range(1..=i));
                }
            }
            TraceOrigin::Scripted(map)
        }
    };
    let implicated: Vec<NodeId> = h
        .nodes()
        .iter()
        .map(|n| n.id)
        .filter(|_| rng.random_bool(0.1))
        .collect();
    let mut k = BTreeMap::new();
    for lv in 1..=l {
        if rng.random_bool(0.5) {
            k.insert(lv, rng.random_range(1..=h.level_idx(lv).len() as u32));
        }
    }
    Scenario {
        trace_origin,
        implicated,
        k,
        r_max,
        seed: rng.random(),
        failure_rate: rng.random_range(0.0..0.4),
        ..Scenario::default()
    }
}
