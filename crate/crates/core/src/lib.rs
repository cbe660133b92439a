//! Belief scene graphs.
//!
//! Partial 3D scene graphs (building → rooms → objects) are folded into
//! per-room class histograms, a five-layer graph convolutional network (CECI)
//! predicts the full histograms, and the difference is materialized as blind
//! nodes. The predicted shares drive an expectation-first object-search
//! planner that is benchmarked against a nearest-room baseline.

pub mod belief;
pub mod catalog;
pub mod ceci;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod search;

pub use catalog::ClassCatalog;
pub use error::{BeliefError, DatasetError, Error, GraphError, MetricError, ModelError, SearchError};
pub use graph::{EdgeKind, Histogram, Layer, NodeId, SceneEdge, SceneGraph, SceneNode};
