use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::catalog::ClassCatalog;
use crate::error::DatasetError;

const DROP: &str = "DROP";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MappingTarget {
    Label(String),
    Drop,
}

/// Raw dataset category → catalog label (or DROP).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassMapping {
    rules: BTreeMap<String, MappingTarget>,
}

#[derive(Deserialize)]
struct Row {
    raw_category: String,
    target: String,
}

impl ClassMapping {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps every catalog label to itself.
    pub fn identity(catalog: &ClassCatalog) -> Self {
        let rules = catalog
            .labels()
            .iter()
            .map(|l| (l.clone(), MappingTarget::Label(l.clone())))
            .collect();
        Self { rules }
    }

    pub fn insert(&mut self, raw: impl Into<String>, target: MappingTarget) {
        self.rules.insert(raw.into(), target);
    }

    /// Reads `raw_category,target` CSV with a header row; `DROP` discards the category.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rules = BTreeMap::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let target = if row.target == DROP {
                MappingTarget::Drop
            } else {
                MappingTarget::Label(row.target)
            };
            if rules.insert(row.raw_category.clone(), target).is_some() {
                return Err(DatasetError::Mapping(format!(
                    "raw category {:?} mapped twice",
                    row.raw_category
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DatasetError> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Every non-DROP target must be a catalog member.
    pub fn check(&self, catalog: &ClassCatalog) -> Result<(), DatasetError> {
        for (raw, target) in &self.rules {
            if let MappingTarget::Label(label) = target {
                if !catalog.contains(label) {
                    return Err(DatasetError::Mapping(format!(
                        "{raw:?} maps to {label:?}, which is not in the catalog"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `None` for categories without a rule; callers treat those as DROP.
    pub fn target(&self, raw: &str) -> Option<&MappingTarget> {
        self.rules.get(raw)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}
