use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::pos::{fallback_pos_tag, UPos};
use super::schema::{DumpDocument, ModelMeta, QueryKeyDoc, SentenceDoc};
use super::validate::validate_dump;
use crate::matrix::{from_rows, to_rows};
use crate::record::{AttentionRecord, AttnType, QueryKey};
use crate::{Error, Result};

/// One ingested sentence with all of its attention records.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEntry {
    pub id: String,
    pub source_tokens: Vec<String>,
    pub target_tokens: Option<Vec<String>>,
    pub source_pos: Option<Vec<UPos>>,
    pub target_pos: Option<Vec<UPos>>,
    /// `attn_type -> [layer][head]`, 0-based positions of 1-based records.
    pub attention: BTreeMap<AttnType, Vec<Vec<AttentionRecord>>>,
}

impl SentenceEntry {
    pub fn attn_types(&self) -> impl Iterator<Item = AttnType> + '_ {
        self.attention.keys().copied()
    }

    /// `(query tokens, key tokens)` for an attention type.
    pub fn side_tokens(&self, attn_type: AttnType) -> Result<(&[String], &[String])> {
        let target = || {
            self.target_tokens.as_deref().ok_or_else(|| {
                Error::NotFound(format!("sentence `{}` has no target side", self.id))
            })
        };
        let q = if attn_type.queries_on_target() {
            target()?
        } else {
            &self.source_tokens
        };
        let k = if attn_type.keys_on_target() {
            target()?
        } else {
            &self.source_tokens
        };
        Ok((q, k))
    }

    /// POS tags for the query and key sides. Sides without ingested tags are
    /// tagged with [`fallback_pos_tag`].
    pub fn side_pos(&self, attn_type: AttnType) -> Result<(Vec<UPos>, Vec<UPos>)> {
        let (q_tokens, k_tokens) = self.side_tokens(attn_type)?;
        let pick = |on_target: bool, tokens: &[String]| {
            let given = if on_target {
                &self.target_pos
            } else {
                &self.source_pos
            };
            given.clone().unwrap_or_else(|| fallback_pos_tag(tokens))
        };
        Ok((
            pick(attn_type.queries_on_target(), q_tokens),
            pick(attn_type.keys_on_target(), k_tokens),
        ))
    }

    pub fn summary(&self) -> SentenceSummary {
        SentenceSummary {
            id: self.id.clone(),
            source_len: self.source_tokens.len(),
            target_len: self.target_tokens.as_ref().map(Vec::len),
            attn_types: self.attn_types().collect(),
        }
    }

    /// Tokens with resolved POS tags (ingested or fallback).
    pub fn detail(&self) -> SentenceDetail {
        SentenceDetail {
            id: self.id.clone(),
            source_pos: self
                .source_pos
                .clone()
                .unwrap_or_else(|| fallback_pos_tag(&self.source_tokens)),
            target_pos: self.target_tokens.as_ref().map(|t| {
                self.target_pos
                    .clone()
                    .unwrap_or_else(|| fallback_pos_tag(t))
            }),
            source_tokens: self.source_tokens.clone(),
            target_tokens: self.target_tokens.clone(),
            attn_types: self.attn_types().collect(),
        }
    }

    pub fn layers(&self, attn_type: AttnType) -> Result<&[Vec<AttentionRecord>]> {
        self.attention
            .get(&attn_type)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::NotFound(format!(
                    "sentence `{}` has no {attn_type} attention",
                    self.id
                ))
            })
    }

    /// All heads of a 1-based layer.
    pub fn layer(&self, attn_type: AttnType, layer: usize) -> Result<&[AttentionRecord]> {
        let layers = self.layers(attn_type)?;
        if layer == 0 || layer > layers.len() {
            return Err(Error::Range(format!(
                "layer {layer} outside 1..={}",
                layers.len()
            )));
        }
        Ok(&layers[layer - 1])
    }

    pub fn record(
        &self,
        attn_type: AttnType,
        layer: usize,
        head: usize,
    ) -> Result<&AttentionRecord> {
        let heads = self.layer(attn_type, layer)?;
        if head == 0 || head > heads.len() {
            return Err(Error::Range(format!(
                "head {head} outside 1..={}",
                heads.len()
            )));
        }
        Ok(&heads[head - 1])
    }
}

/// Listing entry for one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceSummary {
    pub id: String,
    pub source_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_len: Option<usize>,
    pub attn_types: Vec<AttnType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceDetail {
    pub id: String,
    pub source_tokens: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_tokens: Option<Vec<String>>,
    pub source_pos: Vec<UPos>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_pos: Option<Vec<UPos>>,
    pub attn_types: Vec<AttnType>,
}

/// Size and shape of a store.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub attn_types: Vec<AttnType>,
}

/// Immutable, validated collection of sentences sharing one model shape.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStore {
    meta: ModelMeta,
    provenance: Option<String>,
    sentences: Vec<SentenceEntry>,
    index: HashMap<String, usize>,
}

impl CorpusStore {
    fn new(mut meta: ModelMeta, provenance: Option<String>, sentences: Vec<SentenceEntry>) -> Self {
        meta.unknown.clear();
        let index = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Self {
            meta,
            provenance,
            sentences,
            index,
        }
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn sentences(&self) -> &[SentenceEntry] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            sentences: self.sentences.len(),
            tokens: self
                .sentences
                .iter()
                .map(|s| s.source_tokens.len() + s.target_tokens.as_ref().map_or(0, Vec::len))
                .sum(),
            n_layers: self.meta.n_layers,
            n_heads: self.meta.n_heads,
            d_model: self.meta.d_model,
            attn_types: self.meta.attn_types.clone(),
        }
    }

    pub fn sentence(&self, id: &str) -> Result<&SentenceEntry> {
        self.index
            .get(id)
            .map(|&i| &self.sentences[i])
            .ok_or_else(|| Error::NotFound(format!("no sentence with id `{id}`")))
    }

    /// Fails with [`Error::Range`] unless `1 <= layer <= n_layers`.
    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.meta.n_layers {
            return Err(Error::Range(format!(
                "layer {layer} outside 1..={}",
                self.meta.n_layers
            )));
        }
        Ok(())
    }

    pub fn check_head(&self, head: usize) -> Result<()> {
        if head == 0 || head > self.meta.n_heads {
            return Err(Error::Range(format!(
                "head {head} outside 1..={}",
                self.meta.n_heads
            )));
        }
        Ok(())
    }

    /// Combines two stores into a new one. Model shape must agree and
    /// sentence ids must be disjoint; `self`'s sentences come first.
    pub fn merge(&self, other: &CorpusStore) -> Result<CorpusStore> {
        let (a, b) = (&self.meta, &other.meta);
        for (name, x, y) in [
            ("n_layers", a.n_layers, b.n_layers),
            ("n_heads", a.n_heads, b.n_heads),
            ("d_model", a.d_model, b.d_model),
        ] {
            if x != y {
                return Err(Error::Conflict(format!("{name} {x} vs {y}")));
            }
        }
        if let Some(dup) = other
            .sentences
            .iter()
            .find(|s| self.index.contains_key(&s.id))
        {
            return Err(Error::Conflict(format!(
                "sentence id `{}` present in both corpora",
                dup.id
            )));
        }
        let types: BTreeSet<AttnType> = a.attn_types.iter().chain(&b.attn_types).copied().collect();
        let meta = ModelMeta::new(
            a.n_layers,
            a.n_heads,
            a.d_model,
            types.into_iter().collect(),
        );
        let provenance = match (&self.provenance, &other.provenance) {
            (Some(x), Some(y)) => Some(format!("{x}; {y}")),
            (x, y) => x.clone().or_else(|| y.clone()),
        };
        let sentences = self
            .sentences
            .iter()
            .chain(&other.sentences)
            .cloned()
            .collect();
        Ok(CorpusStore::new(meta, provenance, sentences))
    }
}

/// Validates and converts a dump into a [`CorpusStore`], keeping sentence order.
pub fn ingest_dump(doc: &DumpDocument) -> Result<CorpusStore> {
    let report = validate_dump(doc);
    if !report.is_ok() {
        return Err(Error::Validation(Box::new(report)));
    }
    let sentences = doc.sentences.iter().map(to_entry).collect::<Result<_>>()?;
    Ok(CorpusStore::new(
        doc.model.clone(),
        doc.provenance.clone(),
        sentences,
    ))
}

fn parse_pos(tags: &Option<Vec<String>>) -> Result<Option<Vec<UPos>>> {
    tags.as_ref()
        .map(|t| t.iter().map(|s| s.parse()).collect())
        .transpose()
}

fn to_entry(s: &SentenceDoc) -> Result<SentenceEntry> {
    let mut attention = BTreeMap::new();
    for (&attn_type, layers) in &s.attention {
        let vectors = s.vectors.as_ref().and_then(|v| v.get(&attn_type));
        let mut out = Vec::with_capacity(layers.len());
        for (l, heads) in layers.iter().enumerate() {
            let mut row = Vec::with_capacity(heads.len());
            for (h, rows) in heads.iter().enumerate() {
                let vectors = vectors
                    .map(|v| -> Result<QueryKey> {
                        let qk = &v[l][h];
                        Ok(QueryKey {
                            queries: from_rows(&qk.queries)?,
                            keys: from_rows(&qk.keys)?,
                        })
                    })
                    .transpose()?;
                row.push(AttentionRecord {
                    attn_type,
                    layer: l + 1,
                    head: h + 1,
                    weights: from_rows(rows)?,
                    vectors,
                });
            }
            out.push(row);
        }
        attention.insert(attn_type, out);
    }
    Ok(SentenceEntry {
        id: s.id.clone(),
        source_tokens: s.source_tokens.clone(),
        target_tokens: s.target_tokens.clone(),
        source_pos: parse_pos(&s.source_pos)?,
        target_pos: parse_pos(&s.target_pos)?,
        attention,
    })
}

fn pos_strings(tags: &Option<Vec<UPos>>) -> Option<Vec<String>> {
    tags.as_ref()
        .map(|t| t.iter().map(|p| p.as_str().to_string()).collect())
}

/// Serializes a store back to a dump document. Vector sections appear only
/// for attention types whose records all carry vectors.
pub fn export_dump(store: &CorpusStore) -> DumpDocument {
    let sentences = store
        .sentences
        .iter()
        .map(|s| {
            let attention = s
                .attention
                .iter()
                .map(|(&t, layers)| {
                    let m = layers
                        .iter()
                        .map(|heads| heads.iter().map(|r| to_rows(&r.weights)).collect())
                        .collect();
                    (t, m)
                })
                .collect();
            let vectors: BTreeMap<_, _> = s
                .attention
                .iter()
                .filter(|(_, layers)| layers.iter().flatten().all(|r| r.vectors.is_some()))
                .map(|(&t, layers)| {
                    let v = layers
                        .iter()
                        .map(|heads| {
                            heads
                                .iter()
                                .map(|r| {
                                    let qk = r.vectors.as_ref().expect("filtered above");
                                    QueryKeyDoc {
                                        queries: to_rows(&qk.queries),
                                        keys: to_rows(&qk.keys),
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    (t, v)
                })
                .collect();
            SentenceDoc {
                id: s.id.clone(),
                source_tokens: s.source_tokens.clone(),
                target_tokens: s.target_tokens.clone(),
                source_pos: pos_strings(&s.source_pos),
                target_pos: pos_strings(&s.target_pos),
                attention,
                vectors: (!vectors.is_empty()).then_some(vectors),
                unknown: BTreeMap::new(),
            }
        })
        .collect();
    let mut doc = DumpDocument::new(store.meta.clone(), sentences);
    doc.provenance = store.provenance.clone();
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(h: usize) -> ModelMeta {
        ModelMeta::new(1, h, 8, vec![AttnType::EncoderSelf])
    }

    fn one_sentence(id: &str) -> SentenceDoc {
        SentenceDoc {
            id: id.into(),
            source_tokens: vec!["hello".into(), "world".into()],
            target_tokens: None,
            source_pos: Some(vec!["INTJ".into(), "NOUN".into()]),
            target_pos: None,
            attention: BTreeMap::from([(
                AttnType::EncoderSelf,
                vec![vec![vec![vec![0.5, 0.5], vec![0.0, 1.0]]]],
            )]),
            vectors: None,
            unknown: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_dump_gives_empty_store() {
        let store = ingest_dump(&DumpDocument::new(meta(8), vec![])).unwrap();
        assert!(store.is_empty());
        let doc = export_dump(&store);
        assert!(doc.sentences.is_empty());
        assert_eq!(doc.model.n_heads, 8);
    }

    #[test]
    fn merge_rejects_head_mismatch() {
        let a = ingest_dump(&DumpDocument::new(meta(8), vec![])).unwrap();
        let b = ingest_dump(&DumpDocument::new(meta(4), vec![])).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::Conflict(_))));
    }

    #[test]
    fn merge_rejects_duplicate_ids() {
        let a = ingest_dump(&DumpDocument::new(meta(1), vec![one_sentence("x")])).unwrap();
        assert!(matches!(a.merge(&a), Err(Error::Conflict(_))));
        let b = ingest_dump(&DumpDocument::new(meta(1), vec![one_sentence("y")])).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(
            m.sentences()
                .iter()
                .map(|s| s.id.as_str())
                .collect::<Vec<_>>(),
            ["x", "y"]
        );
    }

    #[test]
    fn record_lookup_ranges() {
        let store = ingest_dump(&DumpDocument::new(meta(1), vec![one_sentence("x")])).unwrap();
        let s = store.sentence("x").unwrap();
        assert!(s.record(AttnType::EncoderSelf, 1, 1).is_ok());
        assert!(matches!(
            s.record(AttnType::EncoderSelf, 2, 1),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            s.record(AttnType::EncoderSelf, 1, 0),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            s.layers(AttnType::DecoderSelf),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(store.sentence("nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn export_omits_absent_vectors() {
        let doc = DumpDocument::new(meta(1), vec![one_sentence("x")]);
        let back = export_dump(&ingest_dump(&doc).unwrap());
        assert!(back.sentences[0].vectors.is_none());
        assert_eq!(back, doc);
        let json = serde_json::to_string(&back).unwrap();
        assert!(!json.contains("vectors"));
    }

    #[test]
    fn missing_pos_falls_back() {
        let mut s = one_sentence("x");
        s.source_pos = None;
        let store = ingest_dump(&DumpDocument::new(meta(1), vec![s])).unwrap();
        let (q, _) = store
            .sentence("x")
            .unwrap()
            .side_pos(AttnType::EncoderSelf)
            .unwrap();
        assert_eq!(q, vec![UPos::Noun, UPos::Noun]);
    }
}
