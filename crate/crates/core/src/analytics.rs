//! Per-head scores and layer aggregates behind the network view.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dump::SentenceEntry;
use crate::matrix::{check_row_stochastic, Matrix};
use crate::record::{AttentionRecord, AttnType};
use crate::{Error, Result, INGEST_ROW_TOLERANCE};

/// Sankey edges below this weight are hidden unless the caller overrides it.
pub const DEFAULT_SANKEY_PRUNE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Entropy,
    Position,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "position" => Ok(Self::Position),
            _ => Err(Error::Input(format!(
                "unknown metric `{s}` (entropy|position)"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Entropy => "entropy",
            Self::Position => "position",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Ascending,
    Descending,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asc" | "ascending" => Ok(Self::Ascending),
            "desc" | "descending" => Ok(Self::Descending),
            _ => Err(Error::Input(format!(
                "unknown direction `{s}` (ascending|descending)"
            ))),
        }
    }
}

/// Which axis of the attention matrix is treated as the distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyAxis {
    /// Each row is the softmax distribution of one query.
    #[default]
    Rows,
    /// Each column, renormalized by its total mass.
    Columns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub layer: usize,
    pub head: usize,
    pub metric: Metric,
    /// Nats for entropy, signed token offset for position.
    pub value: f64,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Mean Shannon entropy (nats) of the rows, with `0 ln 0 = 0`.
pub fn row_entropy_score(a: &Matrix) -> Result<f64> {
    entropy_score(a, EntropyAxis::Rows)
}

/// Mean entropy along `axis`. For [`EntropyAxis::Columns`] each column is
/// divided by its sum first; columns without mass contribute zero.
pub fn entropy_score(a: &Matrix, axis: EntropyAxis) -> Result<f64> {
    check_row_stochastic(a, INGEST_ROW_TOLERANCE)?;
    if a.is_empty() {
        return Err(Error::Input("empty attention matrix".into()));
    }
    let score = match axis {
        EntropyAxis::Rows => {
            let total: f64 = a
                .rows()
                .into_iter()
                .map(|r| -r.iter().map(|&p| plogp(p)).sum::<f64>())
                .sum();
            total / a.nrows() as f64
        }
        EntropyAxis::Columns => {
            let total: f64 = a
                .columns()
                .into_iter()
                .map(|c| {
                    let mass = c.sum();
                    if mass > 0.0 {
                        -c.iter().map(|&p| plogp(p / mass)).sum::<f64>()
                    } else {
                        0.0
                    }
                })
                .sum();
            total / a.ncols() as f64
        }
    };
    Ok(score.max(0.0))
}

/// Attention-weighted mean signed offset `(1/T_q) sum_ij A[i,j] (j - i)`.
/// Negative values lean towards earlier keys, positive towards later ones.
pub fn position_offset_score(a: &Matrix) -> Result<f64> {
    check_row_stochastic(a, INGEST_ROW_TOLERANCE)?;
    if a.is_empty() {
        return Err(Error::Input("empty attention matrix".into()));
    }
    let total: f64 = a
        .indexed_iter()
        .map(|((i, j), &p)| p * (j as f64 - i as f64))
        .sum();
    Ok(total / a.nrows() as f64)
}

pub fn head_score(record: &AttentionRecord, metric: Metric) -> Result<HeadScore> {
    let value = match metric {
        Metric::Entropy => row_entropy_score(&record.weights)?,
        Metric::Position => position_offset_score(&record.weights)?,
    };
    Ok(HeadScore {
        layer: record.layer,
        head: record.head,
        metric,
        value,
    })
}

fn check_same_layer(records: &[AttentionRecord]) -> Result<&AttentionRecord> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("no attention records to compare".into()))?;
    if let Some(r) = records
        .iter()
        .find(|r| r.layer != first.layer || r.attn_type != first.attn_type)
    {
        return Err(Error::Input(format!(
            "records mix {} layer {} with {} layer {}",
            first.attn_type, first.layer, r.attn_type, r.layer
        )));
    }
    Ok(first)
}

/// Orders the heads of one layer by `metric`. The sort is stable, so heads
/// with equal scores keep their input order in either direction.
pub fn sort_heads(
    records: &[AttentionRecord],
    metric: Metric,
    direction: Direction,
) -> Result<Vec<HeadScore>> {
    check_same_layer(records)?;
    let mut scores = records
        .iter()
        .map(|r| head_score(r, metric))
        .collect::<Result<Vec<_>>>()?;
    match direction {
        Direction::Ascending => scores.sort_by(|a, b| a.value.total_cmp(&b.value)),
        Direction::Descending => scores.sort_by(|a, b| b.value.total_cmp(&a.value)),
    }
    Ok(scores)
}

/// Per key word, the total attention each head of a layer gives it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordHistogram {
    pub attn_type: AttnType,
    pub layer: usize,
    /// Head numbers, in the order of the inner vectors of `heights`.
    pub heads: Vec<usize>,
    /// `heights[word][k]` is the column sum of head `heads[k]` at key `word`.
    pub heights: Vec<Vec<f64>>,
}

pub fn word_histogram(records: &[AttentionRecord]) -> Result<WordHistogram> {
    let first = check_same_layer(records)?;
    let dim = first.weights.dim();
    if let Some(r) = records.iter().find(|r| r.weights.dim() != dim) {
        return Err(Error::Input(format!(
            "head {} has shape {:?}, head {} has {dim:?}",
            r.head,
            r.weights.dim(),
            first.head
        )));
    }
    let heights = (0..dim.1)
        .map(|j| records.iter().map(|r| r.weights.column(j).sum()).collect())
        .collect();
    Ok(WordHistogram {
        attn_type: first.attn_type,
        layer: first.layer,
        heads: records.iter().map(|r| r.head).collect(),
        heights,
    })
}

/// Edge between word `from_word` in column `from_layer` and word `to_word` in
/// column `from_layer + 1`. Column 0 holds the embedded inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from_layer: usize,
    pub from_word: usize,
    pub to_layer: usize,
    pub to_word: usize,
    pub weight: f64,
}

/// Head-averaged flow from column `source_layer` to `source_layer + 1`:
/// `w(i -> j) = (1/h) sum_heads A^(source_layer + 1)[j, i]`.
///
/// `layers` holds every layer of one attention type for one sentence. Edges
/// with weight below `prune_below` are dropped after aggregation.
pub fn sankey_edges(
    layers: &[Vec<AttentionRecord>],
    source_layer: usize,
    prune_below: f64,
) -> Result<Vec<FlowEdge>> {
    if source_layer >= layers.len() {
        return Err(Error::Range(format!(
            "source layer {source_layer} has no successor (valid 0..{})",
            layers.len()
        )));
    }
    if !(0.0..=1.0).contains(&prune_below) {
        return Err(Error::Input(format!(
            "prune threshold {prune_below} outside [0, 1]"
        )));
    }
    let heads = &layers[source_layer];
    let first = check_same_layer(heads)?;
    let (t_q, t_k) = first.weights.dim();
    if heads.iter().any(|r| r.weights.dim() != (t_q, t_k)) {
        return Err(Error::Input("heads of one layer differ in shape".into()));
    }
    let h = heads.len() as f64;
    let mut edges = Vec::new();
    for i in 0..t_k {
        for j in 0..t_q {
            let weight = heads.iter().map(|r| r.weights[[j, i]]).sum::<f64>() / h;
            if weight >= prune_below {
                edges.push(FlowEdge {
                    from_layer: source_layer,
                    from_word: i,
                    to_layer: source_layer + 1,
                    to_word: j,
                    weight,
                });
            }
        }
    }
    Ok(edges)
}

/// Flow edges for every consecutive pair of columns of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SankeyDiagram {
    pub sentence_id: String,
    pub attn_type: AttnType,
    pub prune_below: f64,
    /// Words of column 0 (the key side).
    pub source_words: Vec<String>,
    /// Words of columns `1..=n_layers` (the query side).
    pub target_words: Vec<String>,
    /// `transitions[l]` holds the edges from column `l` to `l + 1`.
    pub transitions: Vec<Vec<FlowEdge>>,
}

pub fn sankey_diagram(
    sentence: &SentenceEntry,
    attn_type: AttnType,
    prune_below: f64,
) -> Result<SankeyDiagram> {
    let layers = sentence.layers(attn_type)?;
    let (q, k) = sentence.side_tokens(attn_type)?;
    let transitions = (0..layers.len())
        .map(|l| sankey_edges(layers, l, prune_below))
        .collect::<Result<_>>()?;
    Ok(SankeyDiagram {
        sentence_id: sentence.id.clone(),
        attn_type,
        prune_below,
        source_words: k.to_vec(),
        target_words: q.to_vec(),
        transitions,
    })
}
