//! Python bindings: hierarchies, the bitmask store, the row oracle, the
//! development machines and the trace checks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ::hiermark as core;
use core::machine::{run_bfd, run_cdd, run_dad, run_dfd, run_pbfd, run_pdfd, Dag};
use core::tle::Snapshot;
use core::verify::{verify_trace, Check};
use core::{Methodology, NodeId};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen)]
struct Hierarchy {
    inner: Arc<core::Hierarchy>,
}

#[pymethods]
impl Hierarchy {
    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(Hierarchy {
            inner: Arc::new(core::Hierarchy::from_json(doc).map_err(err)?),
        })
    }

    /// The bundled seven-level geographic tree.
    #[staticmethod]
    fn geographic() -> Self {
        Hierarchy {
            inner: Arc::new(core::fixtures::geo_hierarchy()),
        }
    }

    #[staticmethod]
    fn perfect(branching: u32, depth: u32) -> PyResult<Self> {
        Ok(Hierarchy {
            inner: Arc::new(core::Hierarchy::perfect(branching, depth).map_err(err)?),
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn max_level(&self) -> u32 {
        self.inner.max_level()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn children(&self, node: NodeId) -> Vec<NodeId> {
        self.inner.children_of(node).iter().map(|n| n.id).collect()
    }

    fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.inner.parent_of(node).map(|n| n.id)
    }

    fn name(&self, node: NodeId) -> PyResult<String> {
        self.inner
            .node(node)
            .map(|n| n.name.clone())
            .ok_or_else(|| err(format!("unknown node {node}")))
    }
}

#[pyclass]
struct TleStore {
    inner: core::TleStore,
}

#[pymethods]
impl TleStore {
    #[new]
    fn new(h: &Hierarchy) -> PyResult<Self> {
        Ok(TleStore {
            inner: core::TleStore::new(h.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_snapshot(doc: &str) -> PyResult<Self> {
        let snap = Snapshot::from_json(doc).map_err(err)?;
        Ok(TleStore {
            inner: core::TleStore::from_snapshot(&snap).map_err(err)?,
        })
    }

    fn snapshot(&self) -> String {
        self.inner.snapshot().to_json()
    }

    fn lookup(&self, subject: u64, node: NodeId) -> PyResult<bool> {
        self.inner.lookup(subject, node).map_err(err)
    }

    fn update(&mut self, subject: u64, node: NodeId, selected: bool) -> PyResult<()> {
        self.inner.update(subject, node, selected).map_err(err)
    }

    fn reset_subtree(&mut self, subject: u64, node: NodeId) -> PyResult<()> {
        self.inner.reset_subtree(subject, node).map_err(err)
    }

    fn selection(&self, subject: u64) -> BTreeSet<NodeId> {
        self.inner.decode_all(subject)
    }

    fn report(&self, subject: u64) -> Vec<String> {
        self.inner.report_paths(subject)
    }

    /// Decimal or hex text of the cell owned by `node`, if stored.
    fn cell(&self, subject: u64, node: NodeId) -> Option<String> {
        self.inner.cell_of(subject, node).map(|c| c.to_string())
    }

    fn record_count(&self) -> usize {
        self.inner.record_count()
    }

    /// (tle_bits, traditional_bits, ratio)
    fn storage(&self, key_bits: u64) -> (u64, u64, f64) {
        let r = self.inner.storage_report(key_bits);
        (r.tle_bits, r.traditional_bits, r.ratio)
    }
}

#[pyclass]
struct BaselineOracle {
    inner: core::BaselineOracle,
}

#[pymethods]
impl BaselineOracle {
    #[new]
    #[pyo3(signature = (h, top_level = 2))]
    fn new(h: &Hierarchy, top_level: u32) -> Self {
        BaselineOracle {
            inner: core::BaselineOracle::new(h.inner.clone(), top_level),
        }
    }

    fn select(&mut self, subject: u64, node: NodeId) -> PyResult<()> {
        self.inner.select(subject, node).map_err(err)
    }

    fn deselect(&mut self, subject: u64, node: NodeId) -> PyResult<()> {
        self.inner.deselect(subject, node).map_err(err)
    }

    fn reset_subtree(&mut self, subject: u64, node: NodeId) -> PyResult<()> {
        self.inner.reset_subtree(subject, node).map_err(err)
    }

    fn selection(&self, subject: u64) -> BTreeSet<NodeId> {
        self.inner.selection_set(subject)
    }

    fn live_rows(&self) -> usize {
        self.inner.live_rows()
    }

    fn storage_bits(&self, key_bits: u64) -> u64 {
        self.inner.storage_bits(key_bits)
    }
}

#[pyclass(frozen, get_all)]
struct RunResult {
    methodology: String,
    success: bool,
    /// Failure reason, empty on success.
    reason: String,
    rules: Vec<String>,
    final_state: String,
    attempts: BTreeMap<u32, u32>,
    /// The trace as JSON lines.
    trace: String,
}

fn methodology(name: &str) -> PyResult<Methodology> {
    name.parse().map_err(err)
}

/// Run a machine over `h`. `scenario` is a JSON document; defaults when omitted.
#[pyfunction]
#[pyo3(signature = (name, h, scenario = None))]
fn run(name: &str, h: &Hierarchy, scenario: Option<&str>) -> PyResult<RunResult> {
    let sc = match scenario {
        Some(doc) => core::Scenario::from_json(doc).map_err(err)?,
        None => core::Scenario::default(),
    };
    let h = &*h.inner;
    let r = match methodology(name)? {
        Methodology::Dad => run_dad(&Dag::from_hierarchy(h), &sc),
        Methodology::Dfd => Ok(run_dfd(h)),
        Methodology::Bfd => Ok(run_bfd(h)),
        Methodology::Cdd => {
            let ids: Vec<NodeId> = h.nodes().iter().map(|n| n.id).collect();
            run_cdd(&ids, &sc)
        }
        Methodology::Pdfd => run_pdfd(h, &sc),
        Methodology::Pbfd => run_pbfd(h, &sc),
        Methodology::Tle => return Err(err("tle traces come from TleStore")),
    }
    .map_err(err)?;
    let mut trace = Vec::new();
    core::trace::write_jsonl(&mut trace, &r.trace).map_err(err)?;
    Ok(RunResult {
        methodology: r.methodology.to_string(),
        success: r.outcome.is_success(),
        reason: match &r.outcome {
            core::Outcome::Success => String::new(),
            core::Outcome::Error(e) => e.to_string(),
        },
        rules: r.rules().into_iter().map(str::to_string).collect(),
        final_state: r.trace.last().map(|e| e.to.clone()).unwrap_or_default(),
        attempts: r.attempts,
        trace: String::from_utf8(trace).map_err(err)?,
    })
}

/// Check a JSON-lines trace; returns (check, passed, detail) per monitor.
#[pyfunction]
#[pyo3(signature = (trace, name, r_max, levels, check = "all"))]
fn verify(
    trace: &str,
    name: &str,
    r_max: u32,
    levels: u32,
    check: &str,
) -> PyResult<Vec<(String, bool, String)>> {
    let events = core::trace::read_jsonl(trace.as_bytes()).map_err(err)?;
    let check: Check = check.parse().map_err(err)?;
    Ok(
        verify_trace(&events, methodology(name)?, r_max, levels, check)
            .into_iter()
            .map(|v| (v.check, v.passed, v.detail))
            .collect(),
    )
}

#[pymodule]
fn hiermark(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Hierarchy>()?;
    m.add_class::<TleStore>()?;
    m.add_class::<BaselineOracle>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
