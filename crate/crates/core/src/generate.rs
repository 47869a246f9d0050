//! Building attention dumps from plain-text sentences with the toy model.
//!
//! Input is one sentence per line, whitespace-tokenized. A line of the form
//! `source tokens ||| target tokens` also runs the decoder. An optional POS
//! file mirrors the sentence file line by line and tag by tag; without it
//! tags come from [`fallback_pos_tag`].

use std::collections::{BTreeMap, HashMap};

use crate::dump::{fallback_pos_tag, DumpDocument, ModelMeta, QueryKeyDoc, SentenceDoc, UPos};
use crate::matrix::to_rows;
use crate::model::{init_weights, run_sentence, ModelConfig};
use crate::{AttnType, Error, Result};

const SIDE_SEPARATOR: &str = "|||";

#[derive(Clone, Debug, PartialEq)]
pub struct InputSentence {
    pub source: Vec<String>,
    pub target: Option<Vec<String>>,
    pub source_pos: Option<Vec<UPos>>,
    pub target_pos: Option<Vec<UPos>>,
}

fn split_sides(line: &str) -> (Vec<String>, Option<Vec<String>>) {
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    match line.split_once(SIDE_SEPARATOR) {
        Some((src, tgt)) => (words(src), Some(words(tgt))),
        None => (words(line), None),
    }
}

/// Parses a sentence file; blank lines are skipped.
pub fn parse_sentences(text: &str) -> Result<Vec<InputSentence>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let (source, target) = split_sides(line);
            if source.is_empty() || target.as_ref().is_some_and(Vec::is_empty) {
                return Err(Error::Input(format!("line {}: empty side", n + 1)));
            }
            Ok(InputSentence {
                source,
                target,
                source_pos: None,
                target_pos: None,
            })
        })
        .collect()
}

/// Attaches tags from a POS file laid out exactly like the sentence file.
pub fn attach_pos(sentences: &mut [InputSentence], pos_text: &str) -> Result<()> {
    let lines: Vec<&str> = pos_text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != sentences.len() {
        return Err(Error::Input(format!(
            "{} POS lines for {} sentences",
            lines.len(),
            sentences.len()
        )));
    }
    let parse = |tags: Vec<String>, tokens: usize, n: usize| -> Result<Vec<UPos>> {
        if tags.len() != tokens {
            return Err(Error::Input(format!(
                "POS line {n}: {} tags for {tokens} tokens",
                tags.len()
            )));
        }
        tags.iter().map(|t| t.parse()).collect()
    };
    for (n, (s, line)) in sentences.iter_mut().zip(lines).enumerate() {
        let (src, tgt) = split_sides(line);
        s.source_pos = Some(parse(src, s.source.len(), n + 1)?);
        s.target_pos = match (tgt, &s.target) {
            (Some(t), Some(target)) => Some(parse(t, target.len(), n + 1)?),
            (None, None) => None,
            _ => {
                return Err(Error::Input(format!(
                    "POS line {}: sides do not match sentence",
                    n + 1
                )))
            }
        };
    }
    Ok(())
}

/// Token ids in order of first appearance (source before target, line by line).
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn build(sentences: &[InputSentence]) -> Self {
        let mut v = Self::default();
        for s in sentences {
            for t in s.source.iter().chain(s.target.iter().flatten()) {
                if !v.ids.contains_key(t) {
                    v.ids.insert(t.clone(), v.tokens.len());
                    v.tokens.push(t.clone());
                }
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.ids
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("unknown token `{t}`")))
            })
            .collect()
    }
}

fn tag_strings(given: &Option<Vec<UPos>>, tokens: &[String]) -> Vec<String> {
    given
        .clone()
        .unwrap_or_else(|| fallback_pos_tag(tokens))
        .into_iter()
        .map(|t| t.as_str().to_string())
        .collect()
}

/// Runs the seeded toy model over every sentence and packages the result.
pub fn generate_dump(
    config: &ModelConfig,
    sentences: &[InputSentence],
    include_vectors: bool,
) -> Result<DumpDocument> {
    config.validate()?;
    let vocab = Vocabulary::build(sentences);
    let weights = init_weights(config, vocab.len().max(1))?;
    let mut any_target = false;
    let mut docs = Vec::with_capacity(sentences.len());
    for (n, s) in sentences.iter().enumerate() {
        let source = vocab.encode(&s.source)?;
        let target = s.target.as_deref().map(|t| vocab.encode(t)).transpose()?;
        any_target |= target.is_some();
        let records = run_sentence(&source, target.as_deref(), &weights)?;

        let mut attention: BTreeMap<AttnType, Vec<Vec<Vec<Vec<f64>>>>> = BTreeMap::new();
        let mut vectors: BTreeMap<AttnType, Vec<Vec<QueryKeyDoc>>> = BTreeMap::new();
        for r in records {
            let layers = attention.entry(r.attn_type).or_default();
            if layers.len() < r.layer {
                layers.resize_with(r.layer, Vec::new);
            }
            layers[r.layer - 1].push(to_rows(&r.weights));
            if let (true, Some(qk)) = (include_vectors, r.vectors) {
                let layers = vectors.entry(r.attn_type).or_default();
                if layers.len() < r.layer {
                    layers.resize_with(r.layer, Vec::new);
                }
                layers[r.layer - 1].push(QueryKeyDoc {
                    queries: to_rows(&qk.queries),
                    keys: to_rows(&qk.keys),
                });
            }
        }
        docs.push(SentenceDoc {
            id: format!("s{}", n + 1),
            source_pos: Some(tag_strings(&s.source_pos, &s.source)),
            target_pos: s.target.as_ref().map(|t| tag_strings(&s.target_pos, t)),
            source_tokens: s.source.clone(),
            target_tokens: s.target.clone(),
            attention,
            vectors: (!vectors.is_empty()).then_some(vectors),
            unknown: BTreeMap::new(),
        });
    }
    let attn_types = if any_target {
        AttnType::ALL.to_vec()
    } else {
        vec![AttnType::EncoderSelf]
    };
    let mut doc = DumpDocument::new(
        ModelMeta::new(config.n_layers, config.n_heads, config.d_model, attn_types),
        docs,
    );
    doc.provenance = Some(format!(
        "toy model: seed={} n_layers={} n_heads={} d_model={} d_ff={} scale={:?}",
        config.seed,
        config.n_layers,
        config.n_heads,
        config.d_model,
        config.d_ff,
        config.scale_mode
    ));
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate_dump;

    #[test]
    fn parses_sides_and_skips_blanks() {
        let s = parse_sentences("the cat sat\n\n le chat ||| the cat \n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].target, None);
        assert_eq!(s[1].source, ["le", "chat"]);
        assert_eq!(s[1].target.as_deref().unwrap(), ["the", "cat"]);
        assert!(parse_sentences("a b |||").is_err());
    }

    #[test]
    fn pos_file_alignment() {
        let mut s = parse_sentences("we live\nit is ||| il est").unwrap();
        attach_pos(&mut s, "PRON VERB\nPRON AUX ||| PRON AUX").unwrap();
        assert_eq!(s[0].source_pos.as_ref().unwrap()[1], UPos::Verb);
        assert!(attach_pos(&mut s, "PRON\nPRON AUX ||| PRON AUX").is_err());
        assert!(attach_pos(&mut s, "PRON VERB").is_err());
    }

    #[test]
    fn generated_dump_validates() {
        let s = parse_sentences("the planet is big\nwe live on it ||| nous vivons dessus").unwrap();
        let config = ModelConfig::new(2, 2, 8).unwrap().with_seed(4);
        let doc = generate_dump(&config, &s, true).unwrap();
        let report = validate_dump(&doc);
        assert!(report.is_ok(), "{report:?}");
        assert_eq!(doc.model.attn_types.len(), 3);
        assert_eq!(
            doc.sentences[1].attention[&AttnType::EncoderDecoder][0][0].len(),
            3
        );
        assert_eq!(doc.sentences[0].source_pos.as_ref().unwrap()[0], "DET");
    }
}
