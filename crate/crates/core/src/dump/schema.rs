use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::AttnType;

/// `[layer][head]` of row-major matrices given as arrays of rows.
pub type AttentionLayers = Vec<Vec<Vec<Vec<f64>>>>;

/// `[layer][head]` of query/key vector pairs.
pub type VectorLayers = Vec<Vec<QueryKeyDoc>>;

/// Attention dump, version 1.
///
/// Fields this version does not know are collected into `unknown` on read,
/// reported as warnings by validation and never written back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpDocument {
    pub version: u32,
    pub model: ModelMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub sentences: Vec<SentenceDoc>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub attn_types: Vec<AttnType>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, Value>,
}

impl ModelMeta {
    pub fn new(n_layers: usize, n_heads: usize, d_model: usize, attn_types: Vec<AttnType>) -> Self {
        Self {
            n_layers,
            n_heads,
            d_model,
            attn_types,
            unknown: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceDoc {
    pub id: String,
    pub source_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_pos: Option<Vec<String>>,
    pub attention: BTreeMap<AttnType, AttentionLayers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<BTreeMap<AttnType, VectorLayers>>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryKeyDoc {
    pub queries: Vec<Vec<f64>>,
    pub keys: Vec<Vec<f64>>,
}

impl DumpDocument {
    pub fn new(model: ModelMeta, sentences: Vec<SentenceDoc>) -> Self {
        Self {
            version: super::DUMP_VERSION,
            model,
            provenance: None,
            sentences,
            unknown: BTreeMap::new(),
        }
    }
}

impl SentenceDoc {
    /// `(query tokens, key tokens)` for an attention type, if that side exists.
    pub fn sides(&self, attn_type: AttnType) -> (Option<&[String]>, Option<&[String]>) {
        let source = Some(self.source_tokens.as_slice());
        let target = self.target_tokens.as_deref();
        let q = if attn_type.queries_on_target() {
            target
        } else {
            source
        };
        let k = if attn_type.keys_on_target() {
            target
        } else {
            source
        };
        (q, k)
    }
}
