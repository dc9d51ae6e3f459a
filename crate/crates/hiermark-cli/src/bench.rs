//! Deterministic step-count and storage tables. No wall-clock numbers, so
//! the output is byte-identical for a given seed.

use std::fmt::Write;
use std::sync::Arc;

use hiermark::gen::{fanout_tree, uniform_tree};
use hiermark::{NodeId, TleStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KEY_BITS: u64 = 32;
const CHILDREN: u32 = 32;

pub fn run(seed: u64) -> String {
    let mut out = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    writeln!(
        out,
        "{:>8} {:>7} {:>7} {:>8} {:>9} {:>7}",
        "nodes", "lookup", "update", "records", "batch", "c"
    )
    .unwrap();
    for n in [10usize, 1_000, 100_000] {
        let h = Arc::new(fanout_tree(n, 3));
        let mut store = TleStore::new(h.clone()).expect("fanout trees are deep enough");
        let targets: Vec<NodeId> = h
            .nodes()
            .iter()
            .filter(|x| x.level >= 3)
            .map(|x| x.id)
            .collect();
        let (mut lookup, mut update) = (0, 0);
        for s in 1..=40u64 {
            for _ in 0..20 {
                let id = targets[rng.random_range(0..targets.len())];
                store.reset_steps();
                store.update(s, id, true).expect("addressable");
                update = update.max(store.steps());
                store.reset_steps();
                store.lookup(s, id).expect("addressable");
                lookup = lookup.max(store.steps());
            }
        }
        store.reset_steps();
        store.batch_query(|_, _, m| !m.is_zero());
        let records = store.record_count();
        let batch = store.steps();
        writeln!(
            out,
            "{n:>8} {lookup:>7} {update:>7} {records:>8} {batch:>9} {:>7.3}",
            batch as f64 / records as f64
        )
        .unwrap();
    }

    writeln!(out).unwrap();
    writeln!(
        out,
        "{:>7} {:>10} {:>9} {:>11} {:>9} {:>9}",
        "density", "selections", "tle_bits", "trad_bits", "ratio", "C/(c*k)"
    )
    .unwrap();
    let h = Arc::new(uniform_tree(CHILDREN));
    let addressable: Vec<NodeId> = h
        .nodes()
        .iter()
        .filter(|x| x.level >= 3)
        .map(|x| x.id)
        .collect();
    for density in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut store = TleStore::new(h.clone()).expect("uniform tree has four levels");
        if density > 0.0 {
            for s in 1..=16u64 {
                for &id in &addressable {
                    store
                        .update(s, id, rng.random_bool(density))
                        .expect("addressable");
                }
            }
        }
        let r = store.storage_report(KEY_BITS);
        let predicted = if r.selected_children == 0 {
            "-".to_string()
        } else {
            let c_hat = r.selected_children as f64 / r.stored_cells as f64;
            format!("{:.5}", CHILDREN as f64 / (c_hat * KEY_BITS as f64))
        };
        let ratio = if r.traditional_bits == 0 {
            "-".to_string()
        } else if r.tle_bits * KEY_BITS == r.traditional_bits {
            format!("1/{KEY_BITS}")
        } else {
            format!("{:.5}", r.ratio)
        };
        writeln!(
            out,
            "{density:>7.2} {:>10} {:>9} {:>11} {ratio:>9} {predicted:>9}",
            r.selected_children, r.tle_bits, r.traditional_bits
        )
        .unwrap();
    }
    out
}
