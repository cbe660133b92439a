use std::sync::Arc;

use bsg_core::dataset::{empirical_conditional, Event};
use bsg_core::error::DatasetError;
use bsg_core::{ClassCatalog, SceneGraph};
use proptest::prelude::*;

const LABELS: [&str; 4] = ["a", "b", "c", "d"];

/// One building; room `r` holds `counts[r][i]` objects of class `i`.
fn dataset(catalog: &Arc<ClassCatalog>, counts: &[[u8; 4]]) -> SceneGraph {
    let mut b = SceneGraph::builder(catalog.clone()).building("bld");
    for (r, room) in counts.iter().enumerate() {
        let rid = format!("r{r}");
        b = b.room("bld", rid.as_str());
        for (i, &k) in room.iter().enumerate() {
            for j in 0..k {
                b = b.object(rid.as_str(), format!("{rid}/{i}-{j}"), LABELS[i]);
            }
        }
    }
    b.build().unwrap()
}

/// Event-counting oracle over room index sets.
fn oracle(counts: &[[u8; 4]], target: (usize, Option<u8>), observed: &[(usize, Option<u8>)]) -> Option<f64> {
    let holds = |room: &[u8; 4], (i, k): (usize, Option<u8>)| match k {
        None => room[i] > 0,
        Some(k) => room[i] == k,
    };
    let set = |ev| -> Vec<usize> { (0..counts.len()).filter(|&r| holds(&counts[r], ev)).collect() };
    let n = counts.len() as f64;
    let t = set(target);
    let mut numer = 0.0;
    let mut denom = 1.0;
    for &b in observed {
        let sb = set(b);
        if sb.is_empty() {
            return None;
        }
        numer += sb.iter().filter(|r| t.contains(r)).count() as f64 / n;
        denom *= sb.len() as f64 / n;
    }
    Some(numer / denom)
}

fn event((i, k): (usize, Option<u8>)) -> Event {
    match k {
        None => Event::class(LABELS[i]),
        Some(k) => Event::with_count(LABELS[i], u64::from(k)),
    }
}

fn check(g: &SceneGraph, counts: &[[u8; 4]], target: (usize, Option<u8>), observed: &[(usize, Option<u8>)]) {
    let obs: Vec<Event> = observed.iter().copied().map(event).collect();
    let got = empirical_conditional(std::slice::from_ref(g), &event(target), &obs);
    match (oracle(counts, target, observed), got) {
        (None, Err(DatasetError::UndefinedConditional(_))) => {}
        (Some(raw), Ok(c)) => {
            assert!((c.raw - raw).abs() < 1e-12, "{counts:?} {target:?} {observed:?}: {} vs {raw}", c.raw);
            assert_eq!(c.probability, raw.clamp(0.0, 1.0));
            assert_eq!(c.clamped, !(0.0..=1.0).contains(&raw));
        }
        (want, got) => panic!("{counts:?} {target:?} {observed:?}: oracle {want:?}, got {got:?}"),
    }
}

/// Every multiset of `len` presence patterns drawn from 16, as non-decreasing sequences.
fn multisets(len: usize, start: u8, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    for p in start..16 {
        prefix.push(p);
        multisets(len, p, prefix, out);
        prefix.pop();
    }
}

#[test]
fn exhaustive_presence_events_up_to_six_rooms() {
    let catalog = Arc::new(ClassCatalog::new(LABELS).unwrap());
    let subsets: Vec<Vec<(usize, Option<u8>)>> = (1u8..16)
        .map(|m| (0..4).filter(|i| m & (1 << i) != 0).map(|i| (i, None)).collect())
        .collect();
    let mut checked = 0usize;
    for rooms in 1..=6 {
        let mut all = Vec::new();
        multisets(rooms, 0, &mut Vec::new(), &mut all);
        for patterns in all {
            let counts: Vec<[u8; 4]> = patterns
                .iter()
                .map(|p| std::array::from_fn(|i| (p >> i) & 1))
                .collect();
            // the conditional is order-free, so one dataset per multiset covers all orderings
            let g = dataset(&catalog, &counts);
            for t in 0..4 {
                for obs in &subsets {
                    check(&g, &counts, (t, None), obs);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 74_612 * 60);
}

fn ev() -> impl Strategy<Value = (usize, Option<u8>)> {
    (0usize..4, prop::option::of(0u8..3))
}

proptest! {
    #[test]
    fn count_events_match_oracle(
        counts in prop::collection::vec(prop::array::uniform4(0u8..3), 1..=6),
        target in ev(),
        observed in prop::collection::vec(ev(), 1..4),
    ) {
        let catalog = Arc::new(ClassCatalog::new(LABELS).unwrap());
        check(&dataset(&catalog, &counts), &counts, target, &observed);
    }
}

#[test]
fn pooled_across_buildings() {
    let catalog = Arc::new(ClassCatalog::new(LABELS).unwrap());
    let g1 = dataset(&catalog, &[[1, 1, 0, 0], [1, 0, 0, 0]]);
    let g2 = dataset(&catalog, &[[0, 1, 0, 0], [0, 0, 0, 0]]);
    let c = empirical_conditional(&[g1, g2], &Event::class("b"), &[Event::class("a")]).unwrap();
    assert_eq!(c.probability, 0.5);
}
