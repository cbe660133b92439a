use thiserror::Error;

use crate::graph::{Layer, NodeId, ValidationReport};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {id} is a {layer:?} node; expected a building or room")]
    NotMasked { id: NodeId, layer: Layer },
    #[error("invalid scene graph: {0}")]
    Invalid(ValidationReport),
    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    SchemaVersion { expected: String, found: String },
    #[error("malformed graph file: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("annotated space {0}: {1}")]
    Schema(String, String),
    #[error("annotated space {0} has no regions")]
    EmptySpace(String),
    #[error("deletion fraction {0} outside [0, 1)")]
    Fraction(f64),
    #[error("count ≤ 0")]
    Count,
    #[error("split needs at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("conditional undefined: observed event {0} never occurs")]
    UndefinedConditional(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("observation set is empty")]
    EmptyObservation,
    #[error("class {0:?} not in catalog")]
    UnknownClass(String),
    #[error("class mapping: {0}")]
    Mapping(String),
    #[error("synthesis config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("backward called without a cached train-mode forward pass")]
    NoCache,
    #[error("catalog fingerprint mismatch: model {model}, catalog {catalog}")]
    CatalogMismatch { model: String, catalog: String },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("statistic undefined for zero-variance samples")]
    ZeroVariance,
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("beliefs do not match partial graph: {0}")]
    Mismatch(String),
    #[error("unknown room {0}")]
    UnknownRoom(NodeId),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid search environment: {0}")]
    InvalidEnv(String),
    #[error("empty test split")]
    EmptySplit,
    #[error("negative traversal cost {cost} on {from}-{to}")]
    NegativeCost { from: NodeId, to: NodeId, cost: f64 },
}

/// Union of the module errors, for callers that drive a whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Search(#[from] SearchError),
}
