//! Training and evaluating classifiers against distributions of human labels.

pub mod dawid_skene;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod modelkit;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod targets;

pub use error::{Error, Result};
pub use simplex::{AnnotationCounts, DivergenceKind, EvalPair, LabelDistribution};
