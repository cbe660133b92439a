//! Seeded generator of annotated spaces from room archetypes.
//!
//! Stands in for a real annotated-scan corpus: each archetype fixes which
//! classes tend to appear together, so object classes correlate within rooms
//! and (through building types) across rooms of the same building.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AnnotatedSpace, RawObject, Region, SPACE_SCHEMA};
use crate::catalog::ClassCatalog;
use crate::error::DatasetError;
use crate::rng;

const DEFAULT_CONFIG: &str = include_str!("../../data/synth_default.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// Raw category emitted for the object (catalog label under the identity mapping).
    pub class: String,
    pub max_count: u32,
    pub min_count: u32,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    pub name: String,
    pub objects: Vec<ObjectSpec>,
    #[serde(default = "one")]
    pub weight: f64,
}

/// Mix of room archetypes for one kind of building.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingType {
    pub name: String,
    pub room_weights: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub archetypes: Vec<Archetype>,
    /// When empty, rooms draw archetypes by their own weights.
    #[serde(default)]
    pub building_types: Vec<BuildingType>,
    /// Inclusive `[min, max]`.
    pub rooms_per_building: [u32; 2],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("built-in synthesis config parses")
    }
}

impl SynthConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, DatasetError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let err = |m: String| Err(DatasetError::Config(m));
        if self.archetypes.is_empty() {
            return err("at least one archetype is required".into());
        }
        let [lo, hi] = self.rooms_per_building;
        if lo == 0 || lo > hi {
            return err(format!("rooms_per_building [{lo}, {hi}] must satisfy 1 ≤ min ≤ max"));
        }
        for a in &self.archetypes {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return err(format!("archetype {:?}: weight {}", a.name, a.weight));
            }
            for o in &a.objects {
                if !(0.0..=1.0).contains(&o.probability) {
                    return err(format!("{}/{}: probability {} outside [0,1]", a.name, o.class, o.probability));
                }
                if o.min_count > o.max_count {
                    return err(format!("{}/{}: count range [{}, {}]", a.name, o.class, o.min_count, o.max_count));
                }
            }
        }
        // archetype weights only matter when no building types are given
        if self.building_types.is_empty() && self.archetypes.iter().all(|a| a.weight == 0.0) {
            return err("all archetype weights are zero".into());
        }
        for b in &self.building_types {
            if !(b.weight.is_finite() && b.weight >= 0.0) {
                return err(format!("building type {:?}: weight {}", b.name, b.weight));
            }
            if b.room_weights.values().all(|w| *w <= 0.0) {
                return err(format!("building type {:?} has no positive room weight", b.name));
            }
            for (name, w) in &b.room_weights {
                if !self.archetypes.iter().any(|a| &a.name == name) {
                    return err(format!("building type {:?} names unknown archetype {name:?}", b.name));
                }
                if !(w.is_finite() && *w >= 0.0) {
                    return err(format!("building type {:?}: weight {w} for {name:?}", b.name));
                }
            }
        }
        if !self.building_types.is_empty() && self.building_types.iter().all(|b| b.weight <= 0.0) {
            return err("all building-type weights are zero".into());
        }
        Ok(())
    }

    /// Every emitted class must exist in `catalog` (needed for identity-mapped ingestion).
    pub fn check_catalog(&self, catalog: &ClassCatalog) -> Result<(), DatasetError> {
        for a in &self.archetypes {
            for o in &a.objects {
                if !catalog.contains(&o.class) {
                    return Err(DatasetError::UnknownClass(o.class.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn space_id(i: usize) -> String {
    format!("space-{i:05}")
}

/// Samples `count` spaces. Space `i` draws from its own stream derived from
/// `(config.seed, space_id(i))`.
pub fn synthesize(config: &SynthConfig, count: i64) -> Result<Vec<AnnotatedSpace>, DatasetError> {
    if count <= 0 {
        return Err(DatasetError::Count);
    }
    config.check()?;
    let archetype_index: BTreeMap<&str, usize> = config
        .archetypes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let flat = WeightedIndex::new(config.archetypes.iter().map(|a| a.weight)).ok();
    let building_mix = if config.building_types.is_empty() {
        None
    } else {
        let pick = WeightedIndex::new(config.building_types.iter().map(|b| b.weight))
            .map_err(|e| DatasetError::Config(e.to_string()))?;
        let rooms = config
            .building_types
            .iter()
            .map(|b| {
                let names: Vec<usize> = b.room_weights.keys().map(|k| archetype_index[k.as_str()]).collect();
                let dist = WeightedIndex::new(b.room_weights.values().copied())
                    .map_err(|e| DatasetError::Config(e.to_string()))?;
                Ok((names, dist))
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Some((pick, rooms))
    };

    let [lo, hi] = config.rooms_per_building;
    let mut spaces = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let id = space_id(i);
        let mut rng = rng::derive(config.seed, &id);
        let building = building_mix.as_ref().map(|(pick, rooms)| &rooms[pick.sample(&mut rng)]);
        let n_rooms = rng.gen_range(lo..=hi);
        let mut regions = Vec::with_capacity(n_rooms as usize);
        for j in 0..n_rooms {
            let a = match (building, &flat) {
                (Some((names, dist)), _) => names[dist.sample(&mut rng)],
                (None, Some(dist)) => dist.sample(&mut rng),
                (None, None) => unreachable!("checked above"),
            };
            let archetype = &config.archetypes[a];
            let mut objects = Vec::new();
            for spec in &archetype.objects {
                if rng.gen_bool(spec.probability) {
                    let k = rng.gen_range(spec.min_count..=spec.max_count);
                    objects.extend((0..k).map(|_| RawObject {
                        raw_category: spec.class.clone(),
                    }));
                }
            }
            regions.push(Region {
                id: format!("{j:02}"),
                objects,
                raw_label: archetype.name.clone(),
            });
        }
        spaces.push(AnnotatedSpace {
            id,
            regions,
            schema: SPACE_SCHEMA.into(),
        });
    }
    Ok(spaces)
}
