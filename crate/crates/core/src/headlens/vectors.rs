use serde::{Deserialize, Serialize};

use super::summary::PointMeta;
use crate::dump::CorpusStore;
use crate::matrix::Matrix;
use crate::{AttnType, Error, Result};

/// Query or key vectors of one head across a corpus, one per token occurrence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    pub points: Vec<Vec<f64>>,
    pub meta: Vec<PointMeta>,
}

impl VectorSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn extend(&mut self, id: &str, vectors: &Matrix, tokens: &[String], pos: &[crate::UPos]) {
        for (t, row) in vectors.rows().into_iter().enumerate() {
            self.points.push(row.to_vec());
            self.meta.push(PointMeta {
                sentence_id: id.to_string(),
                token_index: t,
                token: tokens[t].clone(),
                pos: pos[t],
                sentence_len: tokens.len(),
            });
        }
    }
}

/// Gathers every query and key vector of one head. Queries come from the
/// query side of `attn_type` (the target side for encoder-decoder attention)
/// and keys from the key side. Sentences without that attention type are
/// skipped; sentences that have it but lack vectors are an error.
pub fn collect_head_vectors(
    store: &CorpusStore,
    attn_type: AttnType,
    layer: usize,
    head: usize,
) -> Result<(VectorSet, VectorSet)> {
    store.check_layer(layer)?;
    store.check_head(head)?;
    let mut queries = VectorSet::default();
    let mut keys = VectorSet::default();
    for s in store.sentences() {
        if !s.attention.contains_key(&attn_type) {
            continue;
        }
        let record = s.record(attn_type, layer, head)?;
        let qk = record.vectors.as_ref().ok_or_else(|| {
            Error::Unavailable(format!(
                "sentence `{}` carries no query/key vectors for {attn_type}",
                s.id
            ))
        })?;
        let (q_tokens, k_tokens) = s.side_tokens(attn_type)?;
        let (q_pos, k_pos) = s.side_pos(attn_type)?;
        queries.extend(&s.id, &qk.queries, q_tokens, &q_pos);
        keys.extend(&s.id, &qk.keys, k_tokens, &k_pos);
    }
    Ok((queries, keys))
}
