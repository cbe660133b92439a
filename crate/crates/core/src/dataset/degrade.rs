use std::collections::HashSet;

use rand::seq::index;

use crate::error::{DatasetError, GraphError};
use crate::graph::{Layer, NodeId, SceneGraph};
use crate::rng;

/// Number of objects removed from `m` at deletion `fraction`: ⌈fraction·m⌉.
///
/// Products within 1e-9 of an integer are taken as that integer so that
/// e.g. 0.3·10 deletes 3, not 4.
pub fn deletion_count(m: usize, fraction: f64) -> usize {
    let x = fraction * m as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k.max(0.0) as usize).min(m)
}

/// Partial graph with ⌈fraction·m⌉ of the `m` object nodes removed uniformly
/// at random. Building, rooms, traversal edges and blind nodes are kept.
pub fn degrade(gt: &SceneGraph, seed: u64, fraction: f64) -> Result<SceneGraph, DatasetError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(DatasetError::Fraction(fraction));
    }
    let report = gt.validate();
    if !report.is_empty() {
        return Err(GraphError::Invalid(report).into());
    }
    let objects: Vec<&NodeId> = gt.objects().map(|n| &n.id).collect();
    let k = deletion_count(objects.len(), fraction);
    if k == 0 {
        return Ok(gt.clone());
    }
    let mut rng = rng::seeded(seed);
    let deleted: HashSet<&NodeId> = index::sample(&mut rng, objects.len(), k)
        .into_iter()
        .map(|i| objects[i])
        .collect();
    Ok(gt.filter_nodes(|n| !(n.layer == Layer::Object && deleted.contains(&n.id))))
}

/// A ground-truth graph with its degraded partial variants.
#[derive(Clone, Debug)]
pub struct DatasetSample {
    pub source_id: String,
    pub ground_truth: SceneGraph,
    pub partials: Vec<SceneGraph>,
    /// Seed used for each partial, in order.
    pub partial_seeds: Vec<u64>,
}

/// Degrades `gt` `partials` times; partial `k` uses a seed derived from
/// `(seed, source_id, k)`.
pub fn make_sample(
    source_id: &str,
    gt: SceneGraph,
    partials: usize,
    fraction: f64,
    seed: u64,
) -> Result<DatasetSample, DatasetError> {
    let mut out = Vec::with_capacity(partials);
    let mut seeds = Vec::with_capacity(partials);
    for k in 0..partials {
        let s = rng::derive_seed(seed, &format!("{source_id}/partial-{k}"));
        out.push(degrade(&gt, s, fraction)?);
        seeds.push(s);
    }
    Ok(DatasetSample {
        source_id: source_id.to_owned(),
        ground_truth: gt,
        partials: out,
        partial_seeds: seeds,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::catalog::ClassCatalog;

    fn graph(rooms: usize, objects_per_room: usize) -> SceneGraph {
        let catalog = Arc::new(ClassCatalog::new(["a", "b", "c"]).unwrap());
        let mut b = SceneGraph::builder(catalog).building("b");
        for r in 0..rooms {
            let room = format!("r{r}");
            b = b.room("b", room.as_str());
            for o in 0..objects_per_room {
                b = b.object(room.as_str(), format!("r{r}/o{o}").as_str(), ["a", "b", "c"][o % 3]);
            }
            if r > 0 {
                b = b.traversal(format!("r{}", r - 1).as_str(), room.as_str(), 1.0 + r as f64);
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn half_of_ten() {
        let g = graph(2, 5);
        let p = degrade(&g, 1, 0.5).unwrap();
        assert_eq!(p.object_count(), 5);
        assert_eq!(p.room_ids(), g.room_ids());
        assert_eq!(p.traversal_edges().count(), g.traversal_edges().count());
        assert!(p.validate().is_empty());
    }

    #[test]
    fn no_objects_is_identity() {
        let g = graph(3, 0);
        assert_eq!(degrade(&g, 9, 0.5).unwrap(), g);
    }

    #[test]
    fn deterministic_by_seed() {
        let g = graph(2, 5);
        assert_eq!(degrade(&g, 3, 0.5).unwrap(), degrade(&g, 3, 0.5).unwrap());
        let distinct = (0..8)
            .map(|s| {
                degrade(&g, s, 0.5)
                    .unwrap()
                    .objects()
                    .map(|o| o.id.to_string())
                    .collect::<Vec<_>>()
            })
            .collect::<HashSet<_>>();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn fraction_bounds() {
        let g = graph(1, 2);
        assert!(matches!(degrade(&g, 0, 1.0), Err(DatasetError::Fraction(_))));
        assert!(matches!(degrade(&g, 0, -0.1), Err(DatasetError::Fraction(_))));
        assert!(matches!(degrade(&g, 0, f64::NAN), Err(DatasetError::Fraction(_))));
    }

    #[test]
    fn ceiling_rounding() {
        assert_eq!(deletion_count(7, 0.5), 4);
        assert_eq!(deletion_count(10, 0.3), 3);
        assert_eq!(deletion_count(0, 0.5), 0);
        assert_eq!(deletion_count(3, 0.0), 0);
    }

    proptest! {
        #[test]
        fn removes_exact_count(rooms in 1usize..5, per in 0usize..7, seed in any::<u64>(), frac in 0.0f64..0.99) {
            let g = graph(rooms, per);
            let m = g.object_count();
            let p = degrade(&g, seed, frac).unwrap();
            prop_assert_eq!(m - p.object_count(), deletion_count(m, frac));
            let expected = (frac * m as f64 - 1e-9).ceil().max(0.0) as usize;
            prop_assert_eq!(deletion_count(m, frac), expected.min(m));
            let kept: HashSet<_> = g.objects().map(|o| o.id.clone()).collect();
            prop_assert!(p.objects().all(|o| kept.contains(&o.id)));
        }
    }
}
