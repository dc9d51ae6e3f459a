//! Trace records shared by every machine and by the TLE traversal.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hierarchy::{NodeId, NodeStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Methodology {
    Dad,
    Dfd,
    Bfd,
    Cdd,
    Pdfd,
    Pbfd,
    Tle,
}

impl Methodology {
    pub const MACHINES: [Methodology; 6] = [
        Methodology::Dad,
        Methodology::Dfd,
        Methodology::Bfd,
        Methodology::Cdd,
        Methodology::Pdfd,
        Methodology::Pbfd,
    ];
}

impl fmt::Display for Methodology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Methodology::Dad => "dad",
            Methodology::Dfd => "dfd",
            Methodology::Bfd => "bfd",
            Methodology::Cdd => "cdd",
            Methodology::Pdfd => "pdfd",
            Methodology::Pbfd => "pbfd",
            Methodology::Tle => "tle",
        };
        f.write_str(s)
    }
}

impl FromStr for Methodology {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dad" => Ok(Methodology::Dad),
            "dfd" => Ok(Methodology::Dfd),
            "bfd" => Ok(Methodology::Bfd),
            "cdd" => Ok(Methodology::Cdd),
            "pdfd" => Ok(Methodology::Pdfd),
            "pbfd" => Ok(Methodology::Pbfd),
            "tle" => Ok(Methodology::Tle),
            other => Err(format!("unknown methodology {other:?}")),
        }
    }
}

/// Ranking tuple compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Measure {
    pub k1: u64,
    pub k2: u64,
    pub k3: u64,
    pub k4: u64,
}

impl Measure {
    pub fn components(&self) -> [u64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    /// Index of the first component that differs, if any.
    pub fn first_difference(&self, other: &Measure) -> Option<usize> {
        let a = self.components();
        let b = other.components();
        (0..4).find(|&i| a[i] != b[i])
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.k1, self.k2, self.k3, self.k4)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attempts: BTreeMap<u32, u32>,
    /// Committed statuses after the transition (hybrid machines only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub committed: BTreeMap<NodeId, NodeStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finalized_at_level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Process-algebra events this transition emits, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub csp: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub rule: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub measure_pre: Option<Measure>,
    #[serde(default)]
    pub measure_post: Option<Measure>,
    pub payload: Payload,
}

/// Builds a trace with a running sequence number.
#[derive(Debug, Default, Clone)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        rule: &str,
        from: impl ToString,
        to: impl ToString,
        payload: Payload,
    ) -> &mut TraceEvent {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            seq,
            rule: rule.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            measure_pre: None,
            measure_post: None,
            payload,
        });
        self.events.last_mut().expect("just pushed")
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

/// Flattened process-algebra event names of a trace.
pub fn csp_events(trace: &[TraceEvent]) -> Vec<String> {
    trace
        .iter()
        .flat_map(|e| e.payload.csp.iter().cloned())
        .collect()
}

pub fn write_jsonl<W: Write>(mut out: W, trace: &[TraceEvent]) -> io::Result<()> {
    for e in trace {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, serde_json::Error> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut log = TraceLog::new();
        let e = log.push("PD1", "S0", "S1(1)", Payload::default());
        e.measure_pre = Some(Measure {
            k1: 3,
            k2: 2,
            k3: 3,
            k4: 1,
        });
        log.push(
            "PD2",
            "S1(1)",
            "S2(1)",
            Payload {
                level: Some(1),
                csp: vec!["process_level_actual.1".into()],
                ..Payload::default()
            },
        );
        let mut buf = Vec::new();
        write_jsonl(&mut buf, log.events()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with("{\"seq\":0,\"rule\":\"PD1\""));
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, log.into_events());
    }

    #[test]
    fn measure_ordering_is_lexicographic() {
        let a = Measure {
            k1: 1,
            k2: 0,
            k3: 0,
            k4: 0,
        };
        let b = Measure {
            k1: 0,
            k2: 9,
            k3: 9,
            k4: 9,
        };
        assert!(b < a);
        assert_eq!(a.first_difference(&b), Some(0));
        assert_eq!(a.first_difference(&a), None);
    }
}
