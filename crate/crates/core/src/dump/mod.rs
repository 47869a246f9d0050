//! Attention dumps: the versioned JSON container exchanged between models,
//! the command line and the service.

mod pos;
mod schema;
mod store;
mod validate;

pub use pos::{fallback_pos_tag, UPos};
pub use schema::{
    AttentionLayers, DumpDocument, ModelMeta, QueryKeyDoc, SentenceDoc, VectorLayers,
};
pub use store::{
    export_dump, ingest_dump, CorpusStats, CorpusStore, SentenceDetail, SentenceEntry,
    SentenceSummary,
};
pub use validate::{validate_dump, Location, ValidationReport, Violation, ViolationKind};

/// Current dump format version.
pub const DUMP_VERSION: u32 = 1;
