//! Frequency-counting estimate of the conditional expectation of a class
//! given a set of observed classes.

use std::fmt;

use crate::error::DatasetError;
use crate::graph::{Histogram, SceneGraph};

/// "A room contains `class`", or with `count`, "a room contains exactly
/// `count` objects of `class`".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub class: String,
    pub count: Option<u64>,
}

impl Event {
    pub fn class(class: impl Into<String>) -> Self {
        Self {
            class: class.into(),
            count: None,
        }
    }

    pub fn with_count(class: impl Into<String>, count: u64) -> Self {
        Self {
            class: class.into(),
            count: Some(count),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.count {
            None => write!(f, "{}", self.class),
            Some(c) => write!(f, "{}={c}", self.class),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conditional {
    /// `raw` clamped to [0, 1].
    pub probability: f64,
    pub raw: f64,
    pub clamped: bool,
}

struct ResolvedEvent {
    index: usize,
    count: Option<u64>,
}

impl ResolvedEvent {
    fn holds(&self, room: &Histogram) -> bool {
        let c = room.get(self.index);
        match self.count {
            None => c > 0,
            Some(k) => c == k,
        }
    }
}

/// Σ_j P̂(target ∩ b_j) / Π_j P̂(b_j), with P̂ the fraction of rooms (pooled
/// over the dataset) in which the event holds.
///
/// The observations are treated as independent, so for more than one
/// observation the ratio can exceed 1; it is then clamped and flagged.
pub fn empirical_conditional(
    dataset: &[SceneGraph],
    target: &Event,
    observed: &[Event],
) -> Result<Conditional, DatasetError> {
    let first = dataset.first().ok_or(DatasetError::EmptyDataset)?;
    if observed.is_empty() {
        return Err(DatasetError::EmptyObservation);
    }
    let catalog = first.catalog();
    let resolve = |e: &Event| {
        catalog
            .index_of(&e.class)
            .map(|index| ResolvedEvent { index, count: e.count })
            .ok_or_else(|| DatasetError::UnknownClass(e.class.clone()))
    };
    let target_ev = resolve(target)?;
    let obs: Vec<ResolvedEvent> = observed.iter().map(resolve).collect::<Result<_, _>>()?;

    let mut rooms = 0usize;
    let mut joint = vec![0usize; obs.len()];
    let mut marginal = vec![0usize; obs.len()];
    for g in dataset {
        for room in g.rooms() {
            let h = g.node_histogram(&room.id, false)?;
            rooms += 1;
            let t = target_ev.holds(&h);
            for (j, b) in obs.iter().enumerate() {
                if b.holds(&h) {
                    marginal[j] += 1;
                    if t {
                        joint[j] += 1;
                    }
                }
            }
        }
    }
    if rooms == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let n = rooms as f64;
    let mut denom = 1.0;
    for (j, &m) in marginal.iter().enumerate() {
        if m == 0 {
            return Err(DatasetError::UndefinedConditional(observed[j].to_string()));
        }
        denom *= m as f64 / n;
    }
    let numer: f64 = joint.iter().map(|&c| c as f64 / n).sum();
    let raw = numer / denom;
    let probability = raw.clamp(0.0, 1.0);
    Ok(Conditional {
        probability,
        raw,
        clamped: probability != raw,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::catalog::ClassCatalog;

    fn dataset(rooms: &[&[&str]]) -> Vec<SceneGraph> {
        let catalog = Arc::new(ClassCatalog::new(["stove", "sink", "chair"]).unwrap());
        let mut b = SceneGraph::builder(catalog).building("b");
        for (r, objs) in rooms.iter().enumerate() {
            let room = format!("r{r}");
            b = b.room("b", room.as_str());
            for (k, c) in objs.iter().enumerate() {
                b = b.object(room.as_str(), format!("{room}/{k}").as_str(), *c);
            }
        }
        vec![b.build().unwrap()]
    }

    #[test]
    fn perfect_cooccurrence() {
        let d = dataset(&[&["stove", "sink"], &["sink"], &["stove", "sink", "chair"], &[]]);
        let c = empirical_conditional(&d, &Event::class("sink"), &[Event::class("stove")]).unwrap();
        assert_eq!(c.probability, 1.0);
    }

    #[test]
    fn self_conditioning() {
        let d = dataset(&[&["stove"], &["sink"], &[]]);
        let c = empirical_conditional(&d, &Event::class("stove"), &[Event::class("stove")]).unwrap();
        assert_eq!(c.probability, 1.0);
        assert!(!c.clamped);
    }

    #[test]
    fn four_room_example() {
        // (1/4) / (2/4)
        let d = dataset(&[&["stove", "sink"], &["stove"], &["sink"], &[]]);
        let c = empirical_conditional(&d, &Event::class("sink"), &[Event::class("stove")]).unwrap();
        assert!((c.probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn count_attribute_events() {
        let d = dataset(&[&["chair", "chair", "sink"], &["chair", "sink"], &["chair", "chair"]]);
        // rooms with exactly two chairs: r0, r2; of those r0 has a sink
        let c = empirical_conditional(&d, &Event::class("sink"), &[Event::with_count("chair", 2)]).unwrap();
        assert!((c.probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clamps_above_one() {
        // P(sink∩stove)=P(sink∩chair)=1/2, P(stove)=P(chair)=1/2 → 1 / (1/4) = 4
        let d = dataset(&[&["stove", "sink", "chair"], &[]]);
        let c = empirical_conditional(&d, &Event::class("sink"), &[Event::class("stove"), Event::class("chair")])
            .unwrap();
        assert!(c.clamped);
        assert_eq!(c.probability, 1.0);
        assert!((c.raw - 4.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let d = dataset(&[&["sink"]]);
        assert!(matches!(
            empirical_conditional(&d, &Event::class("sink"), &[Event::class("stove")]),
            Err(DatasetError::UndefinedConditional(_))
        ));
        assert!(matches!(
            empirical_conditional(&[], &Event::class("sink"), &[Event::class("stove")]),
            Err(DatasetError::EmptyDataset)
        ));
        assert!(matches!(
            empirical_conditional(&d, &Event::class("sink"), &[]),
            Err(DatasetError::EmptyObservation)
        ));
        assert!(matches!(
            empirical_conditional(&d, &Event::class("bed"), &[Event::class("sink")]),
            Err(DatasetError::UnknownClass(_))
        ));
    }
}
