//! Ordered set of object-class labels that fixes histogram indexing.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::GraphError;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.txt");

/// Environment variable naming a catalog file that replaces the built-in list.
pub const CATALOG_ENV: &str = "BSG_CATALOG";

/// Ordered, duplicate-free list of object-class labels.
///
/// Position `i` of every histogram counts objects of `labels()[i]`, so the
/// order is part of the data format: two catalogs with the same labels in a
/// different order have different fingerprints.
#[derive(Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassCatalog {
    pub fn new<I, S>(labels: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(GraphError::Catalog("catalog has no labels".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(GraphError::Catalog(format!("label #{i} is empty")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(GraphError::Catalog(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// The 45-class list shipped with the crate.
    pub fn default_catalog() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("built-in catalog is valid")
    }

    /// Parses a catalog file: one label per line, blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Catalog(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Catalog named by `BSG_CATALOG`, or the built-in one when unset.
    pub fn from_env() -> Result<Self, GraphError> {
        match std::env::var_os(CATALOG_ENV) {
            Some(path) if !path.is_empty() => Self::from_file(path),
            _ => Ok(Self::default_catalog()),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.get(i).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// SHA-256 over the newline-joined label list.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for label in &self.labels {
            hasher.update(label.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().into()
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint())
    }
}

impl Default for ClassCatalog {
    fn default() -> Self {
        Self::default_catalog()
    }
}

impl fmt::Debug for ClassCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassCatalog")
            .field("n", &self.labels.len())
            .field("fingerprint", &&self.fingerprint_hex()[..12])
            .finish()
    }
}
