//! Row-per-selection reference store with surrogate keys and soft deletes.
//! Intentionally naive: every query is a linear scan.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{Hierarchy, NodeId};
use crate::tle::SubjectId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is above the selectable levels")]
    NotSelectable(NodeId),
    #[error("orphan selection: parent of node {node} has no live row for subject {subject}")]
    OrphanSelection { subject: SubjectId, node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub row_id: u64,
    pub parent_selection_row_id: Option<u64>,
    pub subject_id: SubjectId,
    pub node_id: NodeId,
    pub is_deleted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleOp {
    Select(SubjectId, NodeId),
    Deselect(SubjectId, NodeId),
    ResetSubtree(SubjectId, NodeId),
}

#[derive(Debug, Clone)]
pub struct BaselineOracle {
    hierarchy: Arc<Hierarchy>,
    top_level: u32,
    rows: Vec<SelectionRow>,
}

impl BaselineOracle {
    /// `top_level` is the shallowest selectable level; its rows carry no
    /// parent link.
    pub fn new(hierarchy: Arc<Hierarchy>, top_level: u32) -> Self {
        BaselineOracle {
            hierarchy,
            top_level: top_level.max(1),
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[SelectionRow] {
        &self.rows
    }

    fn level_of(&self, node: NodeId) -> Result<u32, OracleError> {
        let n = self
            .hierarchy
            .node(node)
            .ok_or(OracleError::UnknownNode(node))?;
        if n.level < self.top_level {
            return Err(OracleError::NotSelectable(node));
        }
        Ok(n.level)
    }

    fn row_of(&self, subject: SubjectId, node: NodeId) -> Option<usize> {
        self.rows
            .iter()
            .position(|r| r.subject_id == subject && r.node_id == node)
    }

    fn live_row(&self, subject: SubjectId, node: NodeId) -> Option<u64> {
        self.row_of(subject, node)
            .filter(|&i| !self.rows[i].is_deleted)
            .map(|i| self.rows[i].row_id)
    }

    pub fn select(&mut self, subject: SubjectId, node: NodeId) -> Result<(), OracleError> {
        let level = self.level_of(node)?;
        let parent_row = if level == self.top_level {
            None
        } else {
            let parent = self
                .hierarchy
                .parent_of(node)
                .expect("non-top levels have parents")
                .id;
            Some(
                self.live_row(subject, parent)
                    .ok_or(OracleError::OrphanSelection { subject, node })?,
            )
        };
        match self.row_of(subject, node) {
            Some(i) => {
                let row = &mut self.rows[i];
                row.is_deleted = false;
                row.parent_selection_row_id = parent_row;
            }
            None => {
                let row_id = self.rows.len() as u64 + 1;
                self.rows.push(SelectionRow {
                    row_id,
                    parent_selection_row_id: parent_row,
                    subject_id: subject,
                    node_id: node,
                    is_deleted: false,
                });
            }
        }
        Ok(())
    }

    pub fn deselect(&mut self, subject: SubjectId, node: NodeId) -> Result<(), OracleError> {
        self.level_of(node)?;
        if let Some(i) = self.row_of(subject, node) {
            self.rows[i].is_deleted = true;
        }
        Ok(())
    }

    pub fn reset_subtree(&mut self, subject: SubjectId, node: NodeId) -> Result<(), OracleError> {
        let idx = self
            .hierarchy
            .idx(node)
            .ok_or(OracleError::UnknownNode(node))?;
        let mut doomed: BTreeSet<NodeId> = self
            .hierarchy
            .descendants_idx(idx)
            .into_iter()
            .map(|d| self.hierarchy.at(d).id)
            .collect();
        doomed.insert(node);
        for r in &mut self.rows {
            if r.subject_id == subject && doomed.contains(&r.node_id) {
                r.is_deleted = true;
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, op: OracleOp) -> Result<(), OracleError> {
        match op {
            OracleOp::Select(s, n) => self.select(s, n),
            OracleOp::Deselect(s, n) => self.deselect(s, n),
            OracleOp::ResetSubtree(s, n) => self.reset_subtree(s, n),
        }
    }

    /// Nodes of live rows whose whole parent chain is live.
    pub fn selection_set(&self, subject: SubjectId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        'rows: for r in &self.rows {
            if r.subject_id != subject || r.is_deleted {
                continue;
            }
            let mut link = r.parent_selection_row_id;
            while let Some(pid) = link {
                let parent = &self.rows[pid as usize - 1];
                if parent.is_deleted {
                    continue 'rows;
                }
                link = parent.parent_selection_row_id;
            }
            out.insert(r.node_id);
        }
        out
    }

    pub fn is_selected(&self, subject: SubjectId, node: NodeId) -> bool {
        self.selection_set(subject).contains(&node)
    }

    pub fn live_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_deleted).count()
    }

    /// One `key_bits` foreign key per live row.
    pub fn storage_bits(&self, key_bits: u64) -> u64 {
        self.live_rows() as u64 * key_bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ops_select_nothing() {
        let o = BaselineOracle::new(Arc::new(Hierarchy::perfect(2, 3).unwrap()), 2);
        assert!(o.selection_set(1).is_empty());
        assert_eq!(o.storage_bits(32), 0);
    }

    #[test]
    fn orphan_and_undelete() {
        let mut o = BaselineOracle::new(Arc::new(Hierarchy::perfect(2, 3).unwrap()), 2);
        assert_eq!(
            o.select(1, 4),
            Err(OracleError::OrphanSelection {
                subject: 1,
                node: 4
            })
        );
        o.select(1, 2).unwrap();
        o.select(1, 4).unwrap();
        o.deselect(1, 2).unwrap();
        assert!(o.selection_set(1).is_empty());
        o.select(1, 2).unwrap();
        assert_eq!(o.rows().len(), 2);
        assert_eq!(
            o.selection_set(1).into_iter().collect::<Vec<_>>(),
            vec![2, 4]
        );
        assert_eq!(o.select(1, 1), Err(OracleError::NotSelectable(1)));
    }
}
