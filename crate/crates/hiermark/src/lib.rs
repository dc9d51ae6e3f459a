//! Hierarchy selections stored as bitmasks over grandparent/parent/child
//! units, a relational baseline for comparison, and the development state
//! machines with their trace checkers.

pub mod bitmask;
pub mod fixtures;
pub mod gen;
pub mod hierarchy;
pub mod machine;
pub mod oracle;
pub mod tle;
pub mod trace;
pub mod verify;

pub use bitmask::{decode, Bitmask, BitmaskError, Combine};
pub use hierarchy::{Hierarchy, HierarchyError, HierarchyNode, NodeId, NodeStatus, WidthClass};
pub use machine::{MachineError, Outcome, Run, Scenario};
pub use oracle::{BaselineOracle, OracleError};
pub use tle::{TleError, TleStore};
pub use trace::{Measure, Methodology, TraceEvent};
