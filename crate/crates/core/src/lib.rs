//! Attention analytics engine for multi-head self-attention networks.
//!
//! The crate is organized around the life of an attention dump:
//!
//! * [`model`] runs a small seeded encoder/decoder and emits per-head
//!   attention matrices together with the query and key vectors behind them.
//! * [`dump`] validates, ingests and re-serializes attention dumps, whether they
//!   come from [`model`] or from an external network.
//! * [`analytics`] scores heads (entropy, positional offset), builds per-word
//!   head histograms and layer-to-layer flow edges.
//! * [`piling`] groups the heads of one layer by agglomerative clustering of
//!   their attention patterns.
//! * [`headlens`] profiles a single head across a corpus with k-means++ on its
//!   query and key vectors.
//! * [`generate`] turns plain-text sentences into a dump using [`model`].

pub mod analytics;
pub mod dump;
mod error;
pub mod generate;
pub mod headlens;
pub mod io;
pub mod matrix;
pub mod model;
pub mod piling;
mod record;

pub use dump::{
    export_dump, fallback_pos_tag, ingest_dump, validate_dump, CorpusStats, CorpusStore,
    DumpDocument, SentenceDetail, SentenceEntry, SentenceSummary, UPos, ValidationReport,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{init_weights, ModelConfig, ScaleMode, WeightSet};
pub use record::{AttentionRecord, AttnType, QueryKey};

/// Row-sum tolerance for attention produced by the built-in model.
pub const MODEL_ROW_TOLERANCE: f64 = 1e-9;

/// Row-sum tolerance applied to ingested dumps, which may have been stored in
/// reduced precision.
pub const INGEST_ROW_TOLERANCE: f64 = 1e-4;
