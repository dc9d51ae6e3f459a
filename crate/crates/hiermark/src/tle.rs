//! Three-level encapsulation store.
//!
//! Each unit is keyed by a grandparent node. Its columns are the
//! grandparent's children and each column cell is a bitmask over that
//! child's own children. Nodes at level three and below are therefore
//! addressed as `(unit of grandparent, column of parent, bit child_index)`.
//! The two deepest levels never get units of their own.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Num;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmask::{Bitmask, BitmaskError};
use crate::hierarchy::{Hierarchy, HierarchyError, HierarchyNode, NodeId, WidthClass};
use crate::trace::{Payload, TraceEvent, TraceLog};

pub type SubjectId = u64;

/// Elementary steps charged to one lookup: address, record, cell, bit.
pub const LOOKUP_STEP_BUDGET: u64 = 4;
/// Elementary steps charged to one update: address, record, cell, bit.
pub const UPDATE_STEP_BUDGET: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TleError {
    #[error("hierarchy has {0} levels; at least 3 are needed for a unit")]
    TooShallow(u32),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} sits above the addressable levels (level < 3)")]
    NotAddressable(NodeId),
    #[error("page references unknown parent {0}")]
    UnknownPageParent(NodeId),
    #[error("page parent {0} has no addressable children")]
    PageParentTooHigh(NodeId),
    #[error("input child {child} is not under any parent of page {page}")]
    ChildNotInPage { child: NodeId, page: usize },
    #[error("{pages} pages but {inputs} selection inputs")]
    InputCountMismatch { pages: usize, inputs: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Bitmask(#[from] BitmaskError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TleUnit {
    pub grandparent: NodeId,
    pub columns: Vec<NodeId>,
    pub widths: Vec<WidthClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Address {
    unit: usize,
    column: usize,
    bit: u32,
}

#[derive(Debug, Clone)]
pub struct TleSchema {
    pub units: Vec<TleUnit>,
    pub embedded_levels: [u32; 2],
    unit_of: HashMap<NodeId, usize>,
    // where a node's selection bit lives
    bit_addr: HashMap<NodeId, Address>,
    // where a node's own cell (over its children) lives
    cell_addr: HashMap<NodeId, (usize, usize)>,
}

impl TleSchema {
    pub fn unit_index(&self, grandparent: NodeId) -> Option<usize> {
        self.unit_of.get(&grandparent).copied()
    }

    pub fn max_columns(&self) -> usize {
        self.units
            .iter()
            .map(|u| u.columns.len())
            .max()
            .unwrap_or(0)
    }
}

/// One unit per node at levels `1..=L-2` that has grandchildren, with columns
/// in child_index order.
pub fn generate_schema(h: &Hierarchy) -> Result<TleSchema, TleError> {
    let l = h.max_level();
    if l < 3 {
        return Err(TleError::TooShallow(l));
    }
    let mut units = Vec::new();
    let mut unit_of = HashMap::new();
    let mut bit_addr = HashMap::new();
    let mut cell_addr = HashMap::new();
    for level in 1..=l - 2 {
        for &g in h.level_idx(level) {
            let kids = h.children_idx(g);
            if kids.iter().all(|&c| h.is_leaf_idx(c)) {
                continue;
            }
            let unit = units.len();
            let gid = h.at(g).id;
            unit_of.insert(gid, unit);
            for (column, &p) in kids.iter().enumerate() {
                cell_addr.insert(h.at(p).id, (unit, column));
                for &c in h.children_idx(p) {
                    let child = h.at(c);
                    bit_addr.insert(
                        child.id,
                        Address {
                            unit,
                            column,
                            bit: child.child_index,
                        },
                    );
                }
            }
            units.push(TleUnit {
                grandparent: gid,
                columns: kids.iter().map(|&p| h.at(p).id).collect(),
                widths: kids.iter().map(|&p| h.at(p).width_class).collect(),
            });
        }
    }
    Ok(TleSchema {
        units,
        embedded_levels: [l - 1, l],
        unit_of,
        bit_addr,
        cell_addr,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchMatch {
    pub subject: SubjectId,
    pub unit: NodeId,
    pub column: NodeId,
    pub mask: Bitmask,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageReport {
    pub tle_bits: u64,
    pub traditional_bits: u64,
    pub selected_children: u64,
    pub stored_cells: u64,
    pub ratio: f64,
}

#[derive(Debug)]
pub struct TleStore {
    hierarchy: Arc<Hierarchy>,
    schema: TleSchema,
    records: HashMap<(SubjectId, usize), Vec<Bitmask>>,
    subjects: BTreeSet<SubjectId>,
    steps: AtomicU64,
}

impl Clone for TleStore {
    fn clone(&self) -> Self {
        TleStore {
            hierarchy: self.hierarchy.clone(),
            schema: self.schema.clone(),
            records: self.records.clone(),
            subjects: self.subjects.clone(),
            steps: AtomicU64::new(self.steps.load(Ordering::Relaxed)),
        }
    }
}

impl TleStore {
    pub fn new(hierarchy: Arc<Hierarchy>) -> Result<Self, TleError> {
        let schema = generate_schema(&hierarchy)?;
        Ok(TleStore {
            hierarchy,
            schema,
            records: HashMap::new(),
            subjects: BTreeSet::new(),
            steps: AtomicU64::new(0),
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn schema(&self) -> &TleSchema {
        &self.schema
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn subjects(&self) -> impl Iterator<Item = SubjectId> + '_ {
        self.subjects.iter().copied()
    }

    /// Total elementary steps charged since construction or the last reset.
    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }

    pub fn reset_steps(&self) {
        self.steps.store(0, Ordering::Relaxed);
    }

    fn charge(&self, n: u64) {
        self.steps.fetch_add(n, Ordering::Relaxed);
    }

    fn address(&self, child: NodeId) -> Result<Address, TleError> {
        match self.schema.bit_addr.get(&child) {
            Some(a) => Ok(*a),
            None if self.hierarchy.node(child).is_some() => Err(TleError::NotAddressable(child)),
            None => Err(TleError::UnknownNode(child)),
        }
    }

    fn blank_record(&self, unit: usize) -> Vec<Bitmask> {
        self.schema.units[unit]
            .widths
            .iter()
            .map(|&w| Bitmask::empty(w))
            .collect()
    }

    /// Selection bit of `child` for `subject`. Absent records read as unselected.
    pub fn lookup(&self, subject: SubjectId, child: NodeId) -> Result<bool, TleError> {
        let addr = self.address(child)?;
        let Some(cells) = self.records.get(&(subject, addr.unit)) else {
            self.charge(2);
            return Ok(false);
        };
        let cell = &cells[addr.column];
        let on = cell.test(addr.bit)?;
        self.charge(LOOKUP_STEP_BUDGET);
        Ok(on)
    }

    /// Single-bit write. Deselecting does not touch descendants.
    pub fn update(
        &mut self,
        subject: SubjectId,
        child: NodeId,
        selected: bool,
    ) -> Result<(), TleError> {
        let addr = self.address(child)?;
        if !self.records.contains_key(&(subject, addr.unit)) {
            let blank = self.blank_record(addr.unit);
            self.records.insert((subject, addr.unit), blank);
            self.subjects.insert(subject);
        }
        let cells = self
            .records
            .get_mut(&(subject, addr.unit))
            .expect("record ensured above");
        cells[addr.column].assign(addr.bit, selected)?;
        self.charge(UPDATE_STEP_BUDGET);
        Ok(())
    }

    /// Clear `node`'s bit and zero every cell owned by it or its descendants.
    pub fn reset_subtree(&mut self, subject: SubjectId, node: NodeId) -> Result<(), TleError> {
        let idx = self
            .hierarchy
            .idx(node)
            .ok_or(TleError::UnknownNode(node))?;
        if let Some(addr) = self.schema.bit_addr.get(&node).copied() {
            if let Some(cells) = self.records.get_mut(&(subject, addr.unit)) {
                cells[addr.column].assign(addr.bit, false)?;
            }
        }
        let mut owners = vec![idx];
        owners.extend(self.hierarchy.descendants_idx(idx));
        for o in owners {
            let id = self.hierarchy.at(o).id;
            if let Some(&(unit, column)) = self.schema.cell_addr.get(&id) {
                if let Some(cells) = self.records.get_mut(&(subject, unit)) {
                    cells[column].clear_all();
                }
            }
        }
        Ok(())
    }

    /// Visit every stored record once and every cell once.
    pub fn batch_query<F>(&self, mut predicate: F) -> Vec<BatchMatch>
    where
        F: FnMut(NodeId, NodeId, &Bitmask) -> bool,
    {
        let mut out = Vec::new();
        let mut steps = 0u64;
        for (&(subject, unit), cells) in &self.records {
            steps += 1;
            let u = &self.schema.units[unit];
            for (column, cell) in cells.iter().enumerate() {
                steps += 1;
                if predicate(u.grandparent, u.columns[column], cell) {
                    out.push(BatchMatch {
                        subject,
                        unit: u.grandparent,
                        column: u.columns[column],
                        mask: cell.clone(),
                    });
                }
            }
        }
        self.charge(steps);
        out.sort_by_key(|m| (m.subject, m.unit, m.column));
        out
    }

    /// Bits of every stored cell against one foreign key per selected child.
    pub fn storage_report(&self, key_bits: u64) -> StorageReport {
        let mut tle_bits = 0u64;
        let mut selected = 0u64;
        let mut cells_n = 0u64;
        for cells in self.records.values() {
            for c in cells {
                tle_bits += c.capacity() as u64;
                selected += c.count_ones();
                cells_n += 1;
            }
        }
        let traditional_bits = selected * key_bits;
        let ratio = if traditional_bits == 0 {
            0.0
        } else {
            tle_bits as f64 / traditional_bits as f64
        };
        StorageReport {
            tle_bits,
            traditional_bits,
            selected_children: selected,
            stored_cells: cells_n,
            ratio,
        }
    }

    fn cell(&self, subject: SubjectId, owner: NodeId) -> Option<&Bitmask> {
        let &(unit, column) = self.schema.cell_addr.get(&owner)?;
        self.records
            .get(&(subject, unit))
            .map(|cells| &cells[column])
    }

    /// Selected nodes reachable from the root through set bits. The root and
    /// level-two nodes are structural and never reported here.
    pub fn decode_all(&self, subject: SubjectId) -> BTreeSet<NodeId> {
        let h = &*self.hierarchy;
        let mut out = BTreeSet::new();
        let mut frontier: Vec<usize> = h.level_idx(2).to_vec();
        while let Some(p) = frontier.pop() {
            let pid = h.at(p).id;
            let Some(cell) = self.cell(subject, pid) else {
                continue;
            };
            if cell.is_zero() {
                continue;
            }
            for &c in h.children_idx(p) {
                let child = h.at(c);
                if cell.test(child.child_index).unwrap_or(false) {
                    out.insert(child.id);
                    frontier.push(c);
                }
            }
        }
        out
    }

    /// Root-to-leaf name paths over the reachable selection, sorted.
    pub fn report_paths(&self, subject: SubjectId) -> Vec<String> {
        let h = &*self.hierarchy;
        let selected = self.decode_all(subject);
        let mut paths: Vec<String> = selected
            .iter()
            .filter(|&&id| h.children_of(id).iter().all(|c| !selected.contains(&c.id)))
            .map(|&id| h.path_name(h.idx(id).expect("decoded ids exist")))
            .collect();
        paths.sort();
        paths
    }

    /// Selected nodes whose addressable parent is not selected.
    pub fn consistency_violations(&self, subject: SubjectId) -> Vec<NodeId> {
        let h = &*self.hierarchy;
        let mut out = Vec::new();
        for n in h.nodes() {
            if n.level < 4 {
                continue;
            }
            let on = self.lookup_quiet(subject, n.id);
            let parent = n.parent_id.expect("level >= 4 has a parent");
            if on && !self.lookup_quiet(subject, parent) {
                out.push(n.id);
            }
        }
        out
    }

    fn lookup_quiet(&self, subject: SubjectId, child: NodeId) -> bool {
        let Some(addr) = self.schema.bit_addr.get(&child) else {
            return false;
        };
        self.records
            .get(&(subject, addr.unit))
            .map(|cells| cells[addr.column].test(addr.bit).unwrap_or(false))
            .unwrap_or(false)
    }

    /// Raw cell for the column owned by `owner`, if its record exists.
    pub fn cell_of(&self, subject: SubjectId, owner: NodeId) -> Option<&Bitmask> {
        self.cell(subject, owner)
    }

    /// Paged traversal: per page resolve units, preset children from stored
    /// bits, apply the page's input through `update`, commit.
    pub fn traverse(
        &mut self,
        subject: SubjectId,
        pages: &[Vec<NodeId>],
        inputs: &[Vec<(NodeId, bool)>],
    ) -> Result<Vec<TraceEvent>, TleError> {
        if pages.len() != inputs.len() {
            return Err(TleError::InputCountMismatch {
                pages: pages.len(),
                inputs: inputs.len(),
            });
        }
        let h = self.hierarchy.clone();
        for (pi, page) in pages.iter().enumerate() {
            for &p in page {
                let node = h.node(p).ok_or(TleError::UnknownPageParent(p))?;
                if node.level < 2 {
                    return Err(TleError::PageParentTooHigh(p));
                }
            }
            for &(child, _) in &inputs[pi] {
                let under = h
                    .parent_of(child)
                    .map(|par| page.contains(&par.id))
                    .unwrap_or(false);
                if !under {
                    return Err(TleError::ChildNotInPage { child, page: pi });
                }
            }
        }

        let mut log = TraceLog::new();
        let ev = |names: &[&str]| Payload {
            csp: names.iter().map(|s| s.to_string()).collect(),
            ..Payload::default()
        };
        log.push("TLE1", "[*]", "S0", ev(&["start_actual"]));
        if pages.is_empty() {
            log.push("TLE8", "S0", "S6", ev(&["no_more_pages_exist_actual"]));
        }
        for (pi, page) in pages.iter().enumerate() {
            let mut p = ev(&["load_page_actual", "parent_nodes_received_actual"]);
            p.nodes = page.clone();
            log.push("TLE2", "S0", "S1", p);

            let mut grand: Vec<NodeId> = page
                .iter()
                .filter_map(|&id| h.parent_of(id).map(|g| g.id))
                .collect();
            grand.sort_unstable();
            grand.dedup();
            let mut p = ev(&["resolve_grandparent_actual"]);
            p.nodes = grand.clone();
            log.push("TLE3", "S1", "S2", p);

            let mut p = ev(&["load_grandparent_table_actual"]);
            p.nodes = grand;
            log.push("TLE4", "S2", "S3", p);

            let mut preset = Vec::new();
            for &parent in page {
                for c in h.children_of(parent) {
                    if self.lookup(subject, c.id)? {
                        preset.push(c.id);
                    }
                }
            }
            let mut p = ev(&["resolve_child_actual", "preset_child_status_actual"]);
            p.nodes = preset;
            log.push("TLE5", "S3", "S4", p);

            for &(child, on) in &inputs[pi] {
                self.update(subject, child, on)?;
            }
            let mut p = ev(&["update_bitmask_actual"]);
            p.nodes = inputs[pi].iter().map(|(c, _)| *c).collect();
            log.push("TLE6", "S4", "S5", p);

            if pi + 1 < pages.len() {
                log.push("TLE7", "S5", "S0", ev(&["more_pages_exist_actual"]));
            } else {
                log.push("TLE8", "S5", "S6", ev(&["no_more_pages_exist_actual"]));
            }
        }
        log.push("TLE9", "S6", "[*]", ev(&["finalize_process_actual"]));
        Ok(log.into_events())
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut keys: Vec<_> = self.records.keys().copied().collect();
        keys.sort_unstable();
        let records = keys
            .into_iter()
            .map(|(subject, unit)| {
                let u = &self.schema.units[unit];
                let cells = self.records[&(subject, unit)]
                    .iter()
                    .zip(&u.columns)
                    .map(|(m, &col)| (col, m.to_string()))
                    .collect();
                RecordDump {
                    subject,
                    unit: u.grandparent,
                    cells,
                }
            })
            .collect();
        Snapshot {
            hierarchy: self.hierarchy.nodes().to_vec(),
            units: self.schema.units.clone(),
            records,
        }
    }

    /// Rebuild from a snapshot. The schema is regenerated from the embedded
    /// hierarchy and every cell is re-encoded at the current column width.
    pub fn from_snapshot(snap: &Snapshot) -> Result<Self, TleError> {
        let h = Arc::new(Hierarchy::from_nodes(snap.hierarchy.clone())?);
        let mut store = TleStore::new(h)?;
        for r in &snap.records {
            let unit = store
                .schema
                .unit_index(r.unit)
                .ok_or_else(|| TleError::Snapshot(format!("no unit for node {}", r.unit)))?;
            let mut cells = store.blank_record(unit);
            for (&col, text) in &r.cells {
                let pos = store.schema.units[unit]
                    .columns
                    .iter()
                    .position(|&c| c == col)
                    .ok_or_else(|| {
                        TleError::Snapshot(format!("unit {} has no column {col}", r.unit))
                    })?;
                let width = store.schema.units[unit].widths[pos];
                cells[pos] = Bitmask::from_positions(width, positions_of(text)?)?;
            }
            store.records.insert((r.subject, unit), cells);
            store.subjects.insert(r.subject);
        }
        Ok(store)
    }
}

fn positions_of(text: &str) -> Result<Vec<u32>, TleError> {
    let value = match text.strip_prefix("0x") {
        Some(hex) => BigUint::from_str_radix(hex, 16),
        None => BigUint::from_str_radix(text, 10),
    }
    .map_err(|_| TleError::Snapshot(format!("bad mask {text:?}")))?;
    Ok((0..value.bits())
        .filter(|&p| value.bit(p))
        .map(|p| p as u32)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDump {
    pub subject: SubjectId,
    pub unit: NodeId,
    pub cells: BTreeMap<NodeId, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub hierarchy: Vec<HierarchyNode>,
    pub units: Vec<TleUnit>,
    pub records: Vec<RecordDump>,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TleError> {
        serde_json::from_str(text).map_err(|e| TleError::Snapshot(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(branching: u32, depth: u32) -> TleStore {
        TleStore::new(Arc::new(Hierarchy::perfect(branching, depth).unwrap())).unwrap()
    }

    #[test]
    fn shallow_hierarchy_has_no_units() {
        let h = Hierarchy::perfect(2, 2).unwrap();
        assert_eq!(generate_schema(&h).unwrap_err(), TleError::TooShallow(2));
    }

    #[test]
    fn three_levels_give_one_root_unit() {
        let s = store(2, 3);
        assert_eq!(s.schema().units.len(), 1);
        assert_eq!(s.schema().units[0].grandparent, 1);
        assert_eq!(s.schema().embedded_levels, [2, 3]);
    }

    #[test]
    fn update_then_clear_restores_cell() {
        let mut s = store(2, 3);
        s.update(7, 4, true).unwrap();
        assert!(s.lookup(7, 4).unwrap());
        s.update(7, 4, false).unwrap();
        assert!(!s.lookup(7, 4).unwrap());
        assert!(s.cell_of(7, 2).unwrap().is_zero());
        assert_eq!(s.lookup(7, 2), Err(TleError::NotAddressable(2)));
        assert_eq!(s.lookup(7, 99), Err(TleError::UnknownNode(99)));
    }

    #[test]
    fn traversal_with_no_pages() {
        let mut s = store(2, 3);
        let t = s.traverse(1, &[], &[]).unwrap();
        let rules: Vec<_> = t.iter().map(|e| e.rule.as_str()).collect();
        assert_eq!(rules, ["TLE1", "TLE8", "TLE9"]);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut s = store(3, 4);
        for c in [5, 14, 15, 20] {
            s.update(1, c, true).unwrap();
        }
        let text = s.snapshot().to_json();
        let back = TleStore::from_snapshot(&Snapshot::from_json(&text).unwrap()).unwrap();
        assert_eq!(back.decode_all(1), s.decode_all(1));
        assert_eq!(back.snapshot(), s.snapshot());
    }
}
