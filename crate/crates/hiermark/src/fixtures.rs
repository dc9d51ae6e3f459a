//! Bundled data: the geographic hierarchy with its reference selection, and
//! the two MVP replay profiles with their expected outcomes.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::hierarchy::{Hierarchy, NodeId};
use crate::machine::Scenario;

pub const GEO_HIERARCHY: &str = include_str!("../fixtures/geo_hierarchy.json");
pub const GEO_SELECTION: &str = include_str!("../fixtures/geo_selection.json");
pub const GEO_REPORT: &str = include_str!("../fixtures/geo_report.txt");
pub const VISITOR_HIERARCHY: &str = include_str!("../fixtures/visitor_hierarchy.json");
pub const PDFD_MVP_SCENARIO: &str = include_str!("../fixtures/pdfd_mvp_scenario.json");
pub const PBFD_MVP_SCENARIO: &str = include_str!("../fixtures/pbfd_mvp_scenario.json");
pub const PDFD_MVP_EXPECTED: &str = include_str!("../fixtures/pdfd_mvp_expected.json");
pub const PBFD_MVP_EXPECTED: &str = include_str!("../fixtures/pbfd_mvp_expected.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Selection {
    pub subject: u64,
    pub selected: Vec<NodeId>,
}

/// Golden summary of a replay. `cycles` lists (failing level, refined levels).
#[derive(Debug, Clone, Deserialize)]
pub struct Expected {
    pub outcome: String,
    #[serde(default)]
    pub attempts: BTreeMap<u32, u32>,
    #[serde(default)]
    pub max_attempts: Option<u32>,
    pub cycles: Vec<(u32, Vec<u32>)>,
}

/// Seven levels: two structural continent levels, then continent, country,
/// state, county, city.
pub fn geo_hierarchy() -> Hierarchy {
    Hierarchy::from_json(GEO_HIERARCHY).expect("bundled hierarchy is valid")
}

pub fn geo_selection() -> Selection {
    serde_json::from_str(GEO_SELECTION).expect("bundled selection is valid")
}

pub fn geo_report() -> Vec<&'static str> {
    GEO_REPORT.lines().collect()
}

/// Six levels rooted at the visitor: the geographic tree without its top
/// structural level.
pub fn visitor_hierarchy() -> Hierarchy {
    Hierarchy::from_json(VISITOR_HIERARCHY).expect("bundled hierarchy is valid")
}

/// Named replay profiles accepted by `profile`.
pub const PROFILES: [&str; 2] = ["pdfd-mvp", "pbfd-mvp"];

/// Forward validation fails once at the country, state and county levels,
/// each traced back to the continent level.
pub fn pdfd_mvp() -> (Hierarchy, Scenario) {
    let sc = Scenario::from_json(PDFD_MVP_SCENARIO).expect("bundled scenario is valid");
    (visitor_hierarchy(), sc)
}

/// One pattern failure at the continent level traced to the root.
pub fn pbfd_mvp() -> (Hierarchy, Scenario) {
    let sc = Scenario::from_json(PBFD_MVP_SCENARIO).expect("bundled scenario is valid");
    (geo_hierarchy(), sc)
}

pub fn profile(name: &str) -> Option<(Hierarchy, Scenario)> {
    match name {
        "pdfd-mvp" => Some(pdfd_mvp()),
        "pbfd-mvp" => Some(pbfd_mvp()),
        _ => None,
    }
}

pub fn expected(name: &str) -> Option<Expected> {
    let text = match name {
        "pdfd-mvp" => PDFD_MVP_EXPECTED,
        "pbfd-mvp" => PBFD_MVP_EXPECTED,
        _ => return None,
    };
    Some(serde_json::from_str(text).expect("bundled expectation is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_load() {
        assert_eq!(geo_hierarchy().max_level(), 7);
        assert_eq!(visitor_hierarchy().max_level(), 6);
        assert_eq!(geo_report().len(), 12);
        for name in PROFILES {
            let (h, sc) = profile(name).unwrap();
            sc.validate(&h).unwrap();
            assert!(expected(name).is_some());
        }
    }
}
