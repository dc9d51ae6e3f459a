//! Lexicographic descent of the ranking tuple on hybrid-machine traces.

use crate::trace::{Methodology, TraceEvent};

use super::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Initial,
    /// Must descend, and the first changed component may not come after `leading`.
    NonTerminal {
        leading: usize,
    },
    Terminal,
}

/// Per-rule classification; `None` for rules outside the hybrid machines.
pub fn rule_kind(m: Methodology, rule: &str) -> Option<RuleKind> {
    use RuleKind::*;
    let k = |leading| Some(NonTerminal { leading });
    match m {
        Methodology::Pdfd => match rule {
            "PD1" => Some(Initial),
            "PD2b" => k(0),
            "PD2a" | "PD3a" | "PD3c" | "PD4b" | "PD6a" => k(1),
            "PD2" | "PD3" | "PD4" | "PD5" => k(2),
            "PD3b" | "PD4a" | "PD6" => k(3),
            "PD6b" | "PD7" | "PD8" => Some(Terminal),
            _ => None,
        },
        Methodology::Pbfd => match rule {
            "PB1" => Some(Initial),
            "PB4a" => k(0),
            "PB3" | "PB3a2" | "PB5" | "PB7a" => k(1),
            "PB2" | "PB2a" | "PB3a" | "PB3a1" | "PB3b" | "PB4" | "PB4b" => k(2),
            "PB6" | "PB7" => k(3),
            "PB3a3" | "PB3c" | "PB7b" | "PB8" | "PB9" => Some(Terminal),
            _ => None,
        },
        _ => None,
    }
}

pub fn check_measure_descent(trace: &[TraceEvent], m: Methodology) -> Verdict {
    const NAME: &str = "measure";
    if !matches!(m, Methodology::Pdfd | Methodology::Pbfd) {
        return Verdict::pass(NAME, format!("no ranking tuple for {m}"));
    }
    let mut checked = 0usize;
    for (i, e) in trace.iter().enumerate() {
        let leading = match rule_kind(m, &e.rule) {
            None => return Verdict::fail(NAME, Some(i), format!("unknown rule {}", e.rule)),
            Some(RuleKind::NonTerminal { leading }) => leading,
            Some(_) => continue,
        };
        let (Some(pre), Some(post)) = (e.measure_pre, e.measure_post) else {
            return Verdict::fail(NAME, Some(i), format!("{} carries no measure", e.rule));
        };
        let Some(d) = pre.first_difference(&post) else {
            return Verdict::fail(NAME, Some(i), format!("{} leaves {pre} unchanged", e.rule));
        };
        if post.components()[d] > pre.components()[d] {
            return Verdict::fail(NAME, Some(i), format!("{} raises {pre} to {post}", e.rule));
        }
        if d > leading {
            return Verdict::fail(
                NAME,
                Some(i),
                format!(
                    "{} descends on k{} but should lead with k{}",
                    e.rule,
                    d + 1,
                    leading + 1
                ),
            );
        }
        checked += 1;
    }
    Verdict::pass(NAME, format!("{checked} non-terminal transitions descend"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Hierarchy;
    use crate::machine::{run_pbfd, run_pdfd, Scenario, TraceOrigin};
    use crate::trace::Measure;

    // Type column of the two termination tables, row by row.
    const PDFD_TYPES: [(&str, char); 17] = [
        ("PD1", 'I'),
        ("PD2", 'N'),
        ("PD2a", 'N'),
        ("PD2b", 'N'),
        ("PD3", 'N'),
        ("PD3a", 'N'),
        ("PD3b", 'N'),
        ("PD3c", 'N'),
        ("PD4", 'N'),
        ("PD4a", 'N'),
        ("PD4b", 'N'),
        ("PD5", 'N'),
        ("PD6", 'N'),
        ("PD6a", 'N'),
        ("PD6b", 'T'),
        ("PD7", 'T'),
        ("PD8", 'T'),
    ];
    const PBFD_TYPES: [(&str, char); 20] = [
        ("PB1", 'I'),
        ("PB2", 'N'),
        ("PB2a", 'N'),
        ("PB3", 'N'),
        ("PB3a", 'N'),
        ("PB3a1", 'N'),
        ("PB3a2", 'N'),
        ("PB3a3", 'T'),
        ("PB3b", 'N'),
        ("PB3c", 'T'),
        ("PB4", 'N'),
        ("PB4a", 'N'),
        ("PB4b", 'N'),
        ("PB5", 'N'),
        ("PB6", 'N'),
        ("PB7", 'N'),
        ("PB7a", 'N'),
        ("PB7b", 'T'),
        ("PB8", 'T'),
        ("PB9", 'T'),
    ];

    #[test]
    fn classification_matches_type_column() {
        for (m, rows) in [
            (Methodology::Pdfd, &PDFD_TYPES[..]),
            (Methodology::Pbfd, &PBFD_TYPES[..]),
        ] {
            for &(rule, t) in rows {
                let got = match rule_kind(m, rule).unwrap() {
                    RuleKind::Initial => 'I',
                    RuleKind::NonTerminal { .. } => 'N',
                    RuleKind::Terminal => 'T',
                };
                assert_eq!(got, t, "{rule}");
            }
        }
    }

    #[test]
    fn threshold_advance_drops_first_component() {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let run = run_pdfd(&h, &Scenario::default()).unwrap();
        let e = run.trace.iter().find(|e| e.rule == "PD2b").unwrap();
        let (pre, post) = (e.measure_pre.unwrap(), e.measure_post.unwrap());
        assert_eq!(pre.first_difference(&post), Some(0));
        assert!(post.k1 < pre.k1);
        assert!(check_measure_descent(&run.trace, Methodology::Pdfd).passed);
    }

    #[test]
    fn refinement_entry_spends_one_unit_of_budget() {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let sc = Scenario::default().fail("process", 2, 1, &[2]);
        let run = run_pbfd(&h, &sc).unwrap();
        let e = run.trace.iter().find(|e| e.rule == "PB3").unwrap();
        let (pre, post) = (e.measure_pre.unwrap(), e.measure_post.unwrap());
        assert_eq!(pre.k1, post.k1);
        assert_eq!(pre.k2, post.k2 + 1);
        assert!(post.k3 > pre.k3);
        assert!(check_measure_descent(&run.trace, Methodology::Pbfd).passed);

        let sc = Scenario {
            trace_origin: TraceOrigin::Fixed(1),
            ..Scenario::default()
        }
        .fail("progress", 2, 1, &[2]);
        let run = run_pdfd(&h, &sc).unwrap();
        let e = run.trace.iter().find(|e| e.rule == "PD2a").unwrap();
        assert_eq!(e.measure_pre.unwrap().k2, e.measure_post.unwrap().k2 + 1);
    }

    #[test]
    fn flat_or_rising_measure_is_flagged() {
        let h = Hierarchy::perfect(2, 3).unwrap();
        let mut trace = run_pdfd(&h, &Scenario::default()).unwrap().trace;
        let m = Measure {
            k1: 1,
            k2: 1,
            k3: 1,
            k4: 1,
        };
        trace[2].measure_pre = Some(m);
        trace[2].measure_post = Some(Measure { k4: 2, ..m });
        let v = check_measure_descent(&trace, Methodology::Pdfd);
        assert_eq!(v.first_violation, Some(2));
    }
}
