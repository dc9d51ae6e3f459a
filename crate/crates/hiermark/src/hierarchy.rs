//! Hierarchy metadata: flat node records, tree validation and level indexing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

/// Bitmask capacity reserved for a node's children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WidthClass {
    W32,
    W64,
    Var(u32),
}

impl WidthClass {
    pub fn capacity(self) -> u32 {
        match self {
            WidthClass::W32 => 32,
            WidthClass::W64 => 64,
            WidthClass::Var(n) => n,
        }
    }

    /// Smallest class able to hold `children` bit positions.
    pub fn for_children(children: u32) -> Self {
        if children <= 32 {
            WidthClass::W32
        } else if children <= 64 {
            WidthClass::W64
        } else {
            WidthClass::Var(children)
        }
    }
}

impl fmt::Display for WidthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WidthClass::W32 => f.write_str("int32"),
            WidthClass::W64 => f.write_str("int64"),
            WidthClass::Var(n) => write!(f, "var:{n}"),
        }
    }
}

impl FromStr for WidthClass {
    type Err = HierarchyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int32" => Ok(WidthClass::W32),
            "int64" => Ok(WidthClass::W64),
            other => other
                .strip_prefix("var:")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n > 0)
                .map(WidthClass::Var)
                .ok_or_else(|| HierarchyError::BadWidth(s.to_string())),
        }
    }
}

impl TryFrom<String> for WidthClass {
    type Error = HierarchyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WidthClass> for String {
    fn from(w: WidthClass) -> String {
        w.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default)]
    pub name_type_id: Option<i64>,
    pub width_class: WidthClass,
    pub parent_id: Option<NodeId>,
    pub child_index: u32,
    pub level: u32,
}

/// Processing status of a node: 0 unprocessed, 1 in progress, 2 finalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeStatus {
    Unprocessed = 0,
    InProgress = 1,
    Finalized = 2,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("hierarchy document does not parse: {0}")]
    Parse(String),
    #[error("hierarchy has no nodes")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node {node} references missing parent {parent}")]
    DanglingParent { node: NodeId, parent: NodeId },
    #[error("nodes {first} and {second} share child_index {index} under parent {parent}")]
    ChildIndexCollision {
        parent: NodeId,
        first: NodeId,
        second: NodeId,
        index: u32,
    },
    #[error("node {node} has child_index {index}, parent capacity is {capacity}")]
    ChildIndexOutOfRange {
        node: NodeId,
        index: u32,
        capacity: u32,
    },
    #[error("node {node} has level {level}, expected {expected}")]
    LevelMismatch {
        node: NodeId,
        level: u32,
        expected: u32,
    },
    #[error("multiple roots: {0} and {1}")]
    MultipleRoots(NodeId, NodeId),
    #[error("cycle detected through node {0}")]
    Cycle(NodeId),
    #[error("invalid width class {0:?}")]
    BadWidth(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Document {
    Flat(Vec<HierarchyNode>),
    Wrapped { nodes: Vec<HierarchyNode> },
}

/// A validated rooted tree. Nodes are stored in ascending id order, so node
/// positions ("idx") double as the ascending-id tie-break everywhere.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    nodes: Vec<HierarchyNode>,
    index: HashMap<NodeId, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    levels: Vec<Vec<usize>>,
    root: usize,
}

impl Hierarchy {
    pub fn from_json(doc: &str) -> Result<Self, HierarchyError> {
        let parsed: Document =
            serde_json::from_str(doc).map_err(|e| HierarchyError::Parse(e.to_string()))?;
        match parsed {
            Document::Flat(nodes) | Document::Wrapped { nodes } => Self::from_nodes(nodes),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.nodes).expect("nodes serialize")
    }

    pub fn from_nodes(mut nodes: Vec<HierarchyNode>) -> Result<Self, HierarchyError> {
        if nodes.is_empty() {
            return Err(HierarchyError::Empty);
        }
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(HierarchyError::DuplicateId(n.id));
            }
        }

        let mut parent = vec![None; nodes.len()];
        let mut root = None;
        for (i, n) in nodes.iter().enumerate() {
            match n.parent_id {
                Some(p) => {
                    let pi = *index.get(&p).ok_or(HierarchyError::DanglingParent {
                        node: n.id,
                        parent: p,
                    })?;
                    parent[i] = Some(pi);
                }
                None => match root {
                    None => root = Some(i),
                    Some(r) => {
                        return Err(HierarchyError::MultipleRoots(nodes[r].id, n.id));
                    }
                },
            }
        }

        // Every node must reach the root by parent links; anything else loops.
        let mut settled = vec![false; nodes.len()];
        if let Some(r) = root {
            settled[r] = true;
        }
        for start in 0..nodes.len() {
            let mut path = Vec::new();
            let mut seen = HashSet::new();
            let mut cur = start;
            while !settled[cur] {
                if !seen.insert(cur) {
                    return Err(HierarchyError::Cycle(nodes[cur].id));
                }
                path.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            for p in path {
                settled[p] = true;
            }
        }
        let root = root.ok_or(HierarchyError::Cycle(nodes[0].id))?;

        // Levels are checked top-down so the parent's level is already trusted.
        let mut order = vec![root];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        if nodes[root].level != 1 {
            return Err(HierarchyError::LevelMismatch {
                node: nodes[root].id,
                level: nodes[root].level,
                expected: 1,
            });
        }
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            let cap = nodes[cur].width_class.capacity();
            let mut by_index: HashMap<u32, usize> = HashMap::new();
            for &c in &children[cur] {
                let node = &nodes[c];
                if node.level != nodes[cur].level + 1 {
                    return Err(HierarchyError::LevelMismatch {
                        node: node.id,
                        level: node.level,
                        expected: nodes[cur].level + 1,
                    });
                }
                if let Some(prev) = by_index.insert(node.child_index, c) {
                    return Err(HierarchyError::ChildIndexCollision {
                        parent: nodes[cur].id,
                        first: nodes[prev].id,
                        second: node.id,
                        index: node.child_index,
                    });
                }
                if node.child_index >= cap {
                    return Err(HierarchyError::ChildIndexOutOfRange {
                        node: node.id,
                        index: node.child_index,
                        capacity: cap,
                    });
                }
                order.push(c);
            }
        }

        for list in children.iter_mut() {
            list.sort_by_key(|&c| nodes[c].child_index);
        }
        let max_level = nodes.iter().map(|n| n.level).max().unwrap_or(1);
        let mut levels = vec![Vec::new(); max_level as usize];
        for (i, n) in nodes.iter().enumerate() {
            levels[n.level as usize - 1].push(i);
        }

        Ok(Hierarchy {
            nodes,
            index,
            parent,
            children,
            levels,
            root,
        })
    }

    /// Perfect tree with `branching` children per internal node and `depth`
    /// levels. Ids are assigned breadth-first starting at 1.
    pub fn perfect(branching: u32, depth: u32) -> Result<Self, HierarchyError> {
        let width = WidthClass::for_children(branching);
        let mut nodes = vec![HierarchyNode {
            id: 1,
            name: "n1".into(),
            name_type_id: None,
            width_class: width,
            parent_id: None,
            child_index: 0,
            level: 1,
        }];
        let mut frontier = vec![1u64];
        let mut next = 2u64;
        for level in 2..=depth {
            let mut grown = Vec::with_capacity(frontier.len() * branching as usize);
            for &p in &frontier {
                for c in 0..branching {
                    nodes.push(HierarchyNode {
                        id: next,
                        name: format!("n{next}"),
                        name_type_id: None,
                        width_class: width,
                        parent_id: Some(p),
                        child_index: c,
                        level,
                    });
                    grown.push(next);
                    next += 1;
                }
            }
            frontier = grown;
        }
        Self::from_nodes(nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&HierarchyNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn idx(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn at(&self, idx: usize) -> &HierarchyNode {
        &self.nodes[idx]
    }

    pub fn root_idx(&self) -> usize {
        self.root
    }

    pub fn parent_idx(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    /// Children in ascending child_index order.
    pub fn children_idx(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    /// Nodes at 1-based `level`, ascending id. Out-of-range levels are empty.
    pub fn level_idx(&self, level: u32) -> &[usize] {
        if level == 0 {
            return &[];
        }
        self.levels
            .get(level as usize - 1)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn level_ids(&self, level: u32) -> Vec<NodeId> {
        self.level_idx(level)
            .iter()
            .map(|&i| self.nodes[i].id)
            .collect()
    }

    pub fn children_of(&self, id: NodeId) -> Vec<&HierarchyNode> {
        self.idx(id)
            .map(|i| self.children[i].iter().map(|&c| &self.nodes[c]).collect())
            .unwrap_or_default()
    }

    pub fn parent_of(&self, id: NodeId) -> Option<&HierarchyNode> {
        self.idx(id)
            .and_then(|i| self.parent[i])
            .map(|p| &self.nodes[p])
    }

    /// Strict ancestors from parent up to the root.
    pub fn ancestors_idx(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.parent[idx];
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent[p];
        }
        out
    }

    /// Strict descendants in pre-order.
    pub fn descendants_idx(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.children[idx].iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    pub fn is_leaf_idx(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    /// Root-to-node names joined by " > ".
    pub fn path_name(&self, idx: usize) -> String {
        let mut chain = self.ancestors_idx(idx);
        chain.reverse();
        chain.push(idx);
        chain
            .iter()
            .map(|&i| self.nodes[i].name.as_str())
            .collect::<Vec<_>>()
            .join(" > ")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PruneError {
    #[error("branching factor must be at least 2, got {0}")]
    Branching(u64),
    #[error("height must be at least 2, got {0}")]
    Height(u32),
    #[error("node count for branching {n} and height {h} overflows u64")]
    Overflow { n: u64, h: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneCount {
    pub total: u64,
    pub remaining: u64,
    pub fraction: f64,
}

/// Node count of a perfect `n`-ary tree of height `h` (root at height 0) and
/// how many survive once the two deepest levels are folded into bitmasks.
pub fn remaining_after_prune(n: u64, h: u32) -> Result<PruneCount, PruneError> {
    if n < 2 {
        return Err(PruneError::Branching(n));
    }
    if h < 2 {
        return Err(PruneError::Height(h));
    }
    let overflow = PruneError::Overflow { n, h };
    let top = n.checked_pow(h + 1).ok_or(overflow.clone())?;
    let total = (top - 1) / (n - 1);
    let deepest = n.checked_pow(h).ok_or(overflow.clone())?;
    let second = n.checked_pow(h - 1).ok_or(overflow.clone())?;
    let pruned = deepest.checked_add(second).ok_or(overflow)?;
    let remaining = total - pruned;
    Ok(PruneCount {
        total,
        remaining,
        fraction: remaining as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: NodeId, parent: Option<NodeId>, ci: u32, level: u32) -> HierarchyNode {
        HierarchyNode {
            id,
            name: format!("n{id}"),
            name_type_id: None,
            width_class: WidthClass::W32,
            parent_id: parent,
            child_index: ci,
            level,
        }
    }

    #[test]
    fn width_class_round_trips_text() {
        for w in [WidthClass::W32, WidthClass::W64, WidthClass::Var(120)] {
            assert_eq!(w.to_string().parse::<WidthClass>().unwrap(), w);
        }
        assert!("var:0".parse::<WidthClass>().is_err());
        assert!("int16".parse::<WidthClass>().is_err());
    }

    #[test]
    fn root_only_document() {
        let h = Hierarchy::from_json(
            r#"[{"id":0,"name":"r","width_class":"int32","parent_id":null,"child_index":0,"level":1}]"#,
        )
        .unwrap();
        assert_eq!(h.max_level(), 1);
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn rejects_each_malformed_shape() {
        let dup = vec![row(1, None, 0, 1), row(1, None, 0, 1)];
        assert_eq!(
            Hierarchy::from_nodes(dup).unwrap_err(),
            HierarchyError::DuplicateId(1)
        );
        let dangling = vec![row(1, None, 0, 1), row(2, Some(9), 0, 2)];
        assert!(matches!(
            Hierarchy::from_nodes(dangling).unwrap_err(),
            HierarchyError::DanglingParent { .. }
        ));
        let collide = vec![
            row(1, None, 0, 1),
            row(2, Some(1), 3, 2),
            row(3, Some(1), 3, 2),
        ];
        assert!(matches!(
            Hierarchy::from_nodes(collide).unwrap_err(),
            HierarchyError::ChildIndexCollision { .. }
        ));
        let wide = vec![row(1, None, 0, 1), row(2, Some(1), 32, 2)];
        assert!(matches!(
            Hierarchy::from_nodes(wide).unwrap_err(),
            HierarchyError::ChildIndexOutOfRange { capacity: 32, .. }
        ));
        let level = vec![row(1, None, 0, 1), row(2, Some(1), 0, 3)];
        assert!(matches!(
            Hierarchy::from_nodes(level).unwrap_err(),
            HierarchyError::LevelMismatch { expected: 2, .. }
        ));
        let roots = vec![row(1, None, 0, 1), row(2, None, 0, 1)];
        assert_eq!(
            Hierarchy::from_nodes(roots).unwrap_err(),
            HierarchyError::MultipleRoots(1, 2)
        );
        let cycle = vec![
            row(1, None, 0, 1),
            row(2, Some(3), 0, 2),
            row(3, Some(2), 0, 2),
        ];
        assert!(matches!(
            Hierarchy::from_nodes(cycle).unwrap_err(),
            HierarchyError::Cycle(_)
        ));
    }

    #[test]
    fn perfect_tree_indexes_levels() {
        let h = Hierarchy::perfect(3, 4).unwrap();
        assert_eq!(h.len(), 1 + 3 + 9 + 27);
        assert_eq!(h.level_idx(3).len(), 9);
        let first = h.level_idx(2)[0];
        assert_eq!(h.children_idx(first).len(), 3);
        assert_eq!(h.descendants_idx(h.root_idx()).len(), h.len() - 1);
    }

    #[test]
    fn prune_worked_values() {
        let p = remaining_after_prune(3, 6).unwrap();
        assert_eq!((p.total, p.remaining), (1093, 121));
        assert!((p.fraction - 121.0 / 1093.0).abs() < 1e-12);
        let p = remaining_after_prune(2, 2).unwrap();
        assert_eq!((p.total, p.remaining), (7, 1));
        assert!(matches!(
            remaining_after_prune(2, 64),
            Err(PruneError::Overflow { .. })
        ));
        assert!(remaining_after_prune(1, 3).is_err());
        assert!(remaining_after_prune(3, 1).is_err());
    }
}
