//! Learn dense node embeddings whose dot products approximate a taxonomy
//! similarity measure, plus the tooling around it: training-pair
//! construction, rank-correlation evaluation, graph-based word sense
//! disambiguation and a one-vs-all similarity benchmark.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod manifest;
pub mod metrics;
pub mod synth;
pub mod trainer;
pub mod wsd;

pub use error::{Error, Result};
pub use graph::{DepthIndex, TaxonomyGraph};
pub use metrics::{InformationContentTable, Measure, SimilaritySpec};
pub use trainer::{EmbeddingMatrix, ScoreMode, TrainConfig};
