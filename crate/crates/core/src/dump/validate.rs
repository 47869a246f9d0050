use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::schema::{DumpDocument, QueryKeyDoc, SentenceDoc};
use super::{UPos, DUMP_VERSION};
use crate::{AttnType, INGEST_ROW_TOLERANCE};

/// Slack allowed around `[0, 1]` for individual probabilities.
pub const ENTRY_TOLERANCE: f64 = 1e-6;
/// Largest magnitude tolerated above the diagonal of decoder self-attention.
pub const CAUSAL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnsupportedVersion,
    InvalidModel,
    EmptySentence,
    DuplicateSentenceId,
    MissingTarget,
    UndeclaredAttnType,
    PosAlignment,
    UnknownPosTag,
    LayerCount,
    HeadCount,
    Shape,
    RowSum,
    EntryRange,
    CausalMask,
    VectorShape,
    NonFiniteVector,
    UnknownField,
}

/// Where in the document a violation was found. Layers, heads, rows and
/// columns are reported 1-based for layers/heads and 0-based for matrix cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attn_type: Option<AttnType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_id: Option<String>,
    pub location: Location,
    pub kind: ViolationKind,
    /// The offending measurement (row sum, entry value, ...), when finite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    /// A dump is accepted exactly when there are no errors.
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

struct Checker<'a> {
    report: ValidationReport,
    sentence: Option<&'a str>,
}

impl<'a> Checker<'a> {
    fn error(
        &mut self,
        kind: ViolationKind,
        location: Location,
        measured: Option<f64>,
        message: String,
    ) {
        self.report.errors.push(Violation {
            sentence_id: self.sentence.map(str::to_string),
            location,
            kind,
            measured: measured.filter(|v| v.is_finite()),
            message,
        });
    }

    fn unknown_fields<'k>(&mut self, scope: &str, keys: impl Iterator<Item = &'k String>) {
        for key in keys {
            self.report.warnings.push(Violation {
                sentence_id: self.sentence.map(str::to_string),
                location: Location {
                    field: Some(format!("{scope}{key}")),
                    ..Location::default()
                },
                kind: ViolationKind::UnknownField,
                measured: None,
                message: format!("unknown field `{scope}{key}` ignored"),
            });
        }
    }
}

fn at(attn_type: AttnType, layer: usize, head: usize) -> Location {
    Location {
        attn_type: Some(attn_type),
        layer: Some(layer),
        head: Some(head),
        ..Location::default()
    }
}

fn field(name: &str) -> Location {
    Location {
        field: Some(name.to_string()),
        ..Location::default()
    }
}

/// Checks a parsed dump against every structural and probabilistic rule.
///
/// Rows must sum to one within `1e-4`, entries lie in `[-1e-6, 1 + 1e-6]`,
/// decoder self-attention must be zero (within `1e-6`) above the diagonal,
/// matrix and vector shapes must match token counts, and POS tags must align
/// with tokens. Unknown fields only produce warnings.
pub fn validate_dump(doc: &DumpDocument) -> ValidationReport {
    let mut c = Checker {
        report: ValidationReport::default(),
        sentence: None,
    };
    c.unknown_fields("", doc.unknown.keys());
    c.unknown_fields("model.", doc.model.unknown.keys());
    if doc.version != DUMP_VERSION {
        c.error(
            ViolationKind::UnsupportedVersion,
            field("version"),
            Some(doc.version as f64),
            format!(
                "version {} is not supported (expected {DUMP_VERSION})",
                doc.version
            ),
        );
    }
    let m = &doc.model;
    for (name, v) in [
        ("model.n_layers", m.n_layers),
        ("model.n_heads", m.n_heads),
        ("model.d_model", m.d_model),
    ] {
        if v == 0 {
            c.error(
                ViolationKind::InvalidModel,
                field(name),
                Some(0.0),
                format!("{name} must be positive"),
            );
        }
    }
    let declared: HashSet<AttnType> = m.attn_types.iter().copied().collect();
    if declared.len() != m.attn_types.len() {
        c.error(
            ViolationKind::InvalidModel,
            field("model.attn_types"),
            None,
            "attention types listed more than once".into(),
        );
    }

    let mut seen = HashSet::new();
    for s in &doc.sentences {
        c.sentence = Some(&s.id);
        if !seen.insert(s.id.as_str()) {
            c.error(
                ViolationKind::DuplicateSentenceId,
                field("id"),
                None,
                format!("sentence id `{}` appears more than once", s.id),
            );
        }
        check_sentence(&mut c, doc, s, &declared);
    }
    c.report
}

fn check_sentence(
    c: &mut Checker<'_>,
    doc: &DumpDocument,
    s: &SentenceDoc,
    declared: &HashSet<AttnType>,
) {
    c.unknown_fields("", s.unknown.keys());
    if s.source_tokens.is_empty() {
        c.error(
            ViolationKind::EmptySentence,
            field("source_tokens"),
            None,
            "no source tokens".into(),
        );
    }
    if s.target_tokens.as_ref().is_some_and(Vec::is_empty) {
        c.error(
            ViolationKind::EmptySentence,
            field("target_tokens"),
            None,
            "empty target token list".into(),
        );
    }
    check_pos(
        c,
        "source_pos",
        s.source_pos.as_deref(),
        Some(&s.source_tokens),
    );
    check_pos(
        c,
        "target_pos",
        s.target_pos.as_deref(),
        s.target_tokens.as_ref(),
    );

    for (&attn_type, layers) in &s.attention {
        if !declared.contains(&attn_type) {
            c.error(
                ViolationKind::UndeclaredAttnType,
                Location {
                    attn_type: Some(attn_type),
                    ..Location::default()
                },
                None,
                format!("{attn_type} attention is not listed in model.attn_types"),
            );
        }
        let (q_tokens, k_tokens) = s.sides(attn_type);
        let (Some(q_tokens), Some(k_tokens)) = (q_tokens, k_tokens) else {
            c.error(
                ViolationKind::MissingTarget,
                Location {
                    attn_type: Some(attn_type),
                    ..Location::default()
                },
                None,
                format!("{attn_type} attention requires target_tokens"),
            );
            continue;
        };
        let (t_q, t_k) = (q_tokens.len(), k_tokens.len());
        if !check_counts(c, doc, attn_type, layers.len(), layers.iter().map(Vec::len)) {
            continue;
        }
        for (l, heads) in layers.iter().enumerate() {
            for (h, rows) in heads.iter().enumerate() {
                check_matrix(c, at(attn_type, l + 1, h + 1), rows, t_q, t_k);
            }
        }
    }

    if let Some(vectors) = &s.vectors {
        for (&attn_type, layers) in vectors {
            if !s.attention.contains_key(&attn_type) {
                c.error(
                    ViolationKind::VectorShape,
                    Location {
                        attn_type: Some(attn_type),
                        ..Location::default()
                    },
                    None,
                    format!("vectors given for {attn_type} without matching attention"),
                );
                continue;
            }
            let (Some(q_tokens), Some(k_tokens)) = s.sides(attn_type) else {
                continue;
            };
            if !check_counts(c, doc, attn_type, layers.len(), layers.iter().map(Vec::len)) {
                continue;
            }
            for (l, heads) in layers.iter().enumerate() {
                for (h, qk) in heads.iter().enumerate() {
                    check_vectors(
                        c,
                        at(attn_type, l + 1, h + 1),
                        qk,
                        q_tokens.len(),
                        k_tokens.len(),
                    );
                }
            }
        }
    }
}

fn check_pos(
    c: &mut Checker<'_>,
    name: &str,
    tags: Option<&[String]>,
    tokens: Option<&Vec<String>>,
) {
    let Some(tags) = tags else { return };
    let Some(tokens) = tokens else {
        c.error(
            ViolationKind::PosAlignment,
            field(name),
            None,
            format!("{name} given without tokens"),
        );
        return;
    };
    if tags.len() != tokens.len() {
        c.error(
            ViolationKind::PosAlignment,
            field(name),
            Some(tags.len() as f64),
            format!("{} tags for {} tokens", tags.len(), tokens.len()),
        );
    }
    for (i, tag) in tags.iter().enumerate() {
        if tag.parse::<UPos>().is_err() {
            c.error(
                ViolationKind::UnknownPosTag,
                Location {
                    field: Some(name.to_string()),
                    col: Some(i),
                    ..Location::default()
                },
                None,
                format!("`{tag}` is not a universal POS tag"),
            );
        }
    }
}

/// Layer and per-layer head counts. Returns false when they are unusable.
fn check_counts(
    c: &mut Checker<'_>,
    doc: &DumpDocument,
    attn_type: AttnType,
    n_layers: usize,
    heads: impl Iterator<Item = usize>,
) -> bool {
    let mut ok = true;
    if n_layers != doc.model.n_layers {
        c.error(
            ViolationKind::LayerCount,
            Location {
                attn_type: Some(attn_type),
                ..Location::default()
            },
            Some(n_layers as f64),
            format!("{n_layers} layers, model declares {}", doc.model.n_layers),
        );
        ok = false;
    }
    for (l, n) in heads.enumerate() {
        if n != doc.model.n_heads {
            c.error(
                ViolationKind::HeadCount,
                Location {
                    attn_type: Some(attn_type),
                    layer: Some(l + 1),
                    ..Location::default()
                },
                Some(n as f64),
                format!("{n} heads, model declares {}", doc.model.n_heads),
            );
            ok = false;
        }
    }
    ok
}

fn check_matrix(c: &mut Checker<'_>, loc: Location, rows: &[Vec<f64>], t_q: usize, t_k: usize) {
    if rows.len() != t_q {
        c.error(
            ViolationKind::Shape,
            loc,
            Some(rows.len() as f64),
            format!("{} rows, expected {t_q} query tokens", rows.len()),
        );
        return;
    }
    let causal = loc.attn_type == Some(AttnType::DecoderSelf);
    for (i, row) in rows.iter().enumerate() {
        let cell = |col: Option<usize>| Location {
            row: Some(i),
            col,
            ..loc.clone()
        };
        if row.len() != t_k {
            c.error(
                ViolationKind::Shape,
                cell(None),
                Some(row.len() as f64),
                format!("row has {} entries, expected {t_k} key tokens", row.len()),
            );
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || !(-ENTRY_TOLERANCE..=1.0 + ENTRY_TOLERANCE).contains(&v) {
                c.error(
                    ViolationKind::EntryRange,
                    cell(Some(j)),
                    Some(v),
                    format!("entry {v} is not a probability"),
                );
            } else if causal && j > i && v.abs() > CAUSAL_TOLERANCE {
                c.error(
                    ViolationKind::CausalMask,
                    cell(Some(j)),
                    Some(v),
                    format!("query {i} attends to future key {j} with weight {v}"),
                );
            }
        }
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > INGEST_ROW_TOLERANCE {
            c.error(
                ViolationKind::RowSum,
                cell(None),
                Some(sum),
                format!("row sums to {sum} (deviation {:.3e})", (sum - 1.0).abs()),
            );
        }
    }
}

fn check_vectors(c: &mut Checker<'_>, loc: Location, qk: &QueryKeyDoc, t_q: usize, t_k: usize) {
    let width = qk.queries.first().or(qk.keys.first()).map_or(0, Vec::len);
    for (name, rows, expected) in [("queries", &qk.queries, t_q), ("keys", &qk.keys, t_k)] {
        let loc = Location {
            field: Some(name.to_string()),
            ..loc.clone()
        };
        if rows.len() != expected {
            c.error(
                ViolationKind::VectorShape,
                loc.clone(),
                Some(rows.len() as f64),
                format!("{} {name}, expected {expected}", rows.len()),
            );
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                c.error(
                    ViolationKind::VectorShape,
                    Location {
                        row: Some(i),
                        ..loc.clone()
                    },
                    Some(row.len() as f64),
                    format!("vector width {}, expected {width}", row.len()),
                );
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                c.error(
                    ViolationKind::NonFiniteVector,
                    Location {
                        row: Some(i),
                        col: Some(j),
                        ..loc.clone()
                    },
                    None,
                    "non-finite vector component".into(),
                );
            }
        }
    }
}
