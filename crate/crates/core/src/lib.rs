//! Geometry of multilingual embedding spaces.
//!
//! Loads EMBGEOM1 dumps ([`io`]) and computes anisotropy, the cross-lingual
//! similarity index Γ and the geometric separability index Φ ([`metrics`]),
//! grouped PCA projections ([`pca`]) and per-family summaries ([`report`]).
//!
//! Heavy operations run on the current rayon pool; results are bit-identical
//! for any number of workers.

pub mod engine;
pub mod family;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod pca;
pub mod report;
pub mod sum;

pub use engine::{with_workers, BLOCK_ROWS, THREADS_ENV};
pub use family::FamilyMap;
pub use io::{
    read_embeddings, validate_manifest, write_embeddings, DumpError, EmbeddingSet, LanguageSpan,
    Layer, Manifest, Pooling,
};
pub use matrix::{LabeledMatrix, MatrixKind};
pub use metrics::{
    anisotropy, cosine, gamma, gamma_matrix, gsi, nearest_neighbor_labels, phi_matrix,
    AnisotropyResult, MetricsError, NnMetric,
};
pub use pca::{mean_center, pca_group, project, top_components, PcaError, PcaResult};
pub use report::{FamilyReport, ReportError};
