use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dump::UPos;

pub const POSITION_BINS: usize = 10;
pub const MAX_TOP_WORDS: usize = 20;

/// Where a query or key vector came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMeta {
    pub sentence_id: String,
    pub token_index: usize,
    pub token: String,
    pub pos: UPos,
    pub sentence_len: usize,
}

impl PointMeta {
    /// `token_index / (sentence_len - 1)`, or 0 for one-token sentences.
    pub fn relative_position(&self) -> f64 {
        if self.sentence_len <= 1 {
            0.0
        } else {
            self.token_index as f64 / (self.sentence_len - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopWord {
    pub word: String,
    pub count: usize,
    /// Most frequent tag among the word's occurrences.
    pub pos: UPos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub size: usize,
    /// Set when the cluster has no members; distributions are then empty.
    pub empty: bool,
    pub pos_distribution: BTreeMap<UPos, f64>,
    /// Fraction of members per tenth of relative position; the last bin is
    /// closed on the right.
    pub position_histogram: Vec<f64>,
    pub top_words: Vec<TopWord>,
}

/// Bin of a relative position in `[0, 1]`.
pub fn position_bin(r: f64) -> usize {
    ((r * POSITION_BINS as f64).floor() as usize).min(POSITION_BINS - 1)
}

/// POS composition, relative-position histogram and most frequent words
/// (case-folded, ties broken alphabetically) of one cluster.
pub fn cluster_summary(members: &[&PointMeta]) -> ClusterSummary {
    let size = members.len();
    let mut position_histogram = vec![0.0; POSITION_BINS];
    if size == 0 {
        return ClusterSummary {
            size,
            empty: true,
            pos_distribution: BTreeMap::new(),
            position_histogram,
            top_words: Vec::new(),
        };
    }
    let share = 1.0 / size as f64;
    let mut pos_counts: BTreeMap<UPos, usize> = BTreeMap::new();
    let mut words: HashMap<String, (usize, BTreeMap<UPos, usize>)> = HashMap::new();
    for m in members {
        *pos_counts.entry(m.pos).or_default() += 1;
        position_histogram[position_bin(m.relative_position())] += share;
        let entry = words.entry(m.token.to_lowercase()).or_default();
        entry.0 += 1;
        *entry.1.entry(m.pos).or_default() += 1;
    }
    let pos_distribution = pos_counts
        .into_iter()
        .map(|(p, n)| (p, n as f64 / size as f64))
        .collect();
    let mut top_words: Vec<TopWord> = words
        .into_iter()
        .map(|(word, (count, tags))| {
            // max_by_key keeps the last maximum; iterate in reverse so the
            // smallest tag wins ties.
            let pos = tags
                .iter()
                .rev()
                .max_by_key(|(_, n)| **n)
                .map(|(p, _)| *p)
                .expect("word has at least one occurrence");
            TopWord { word, count, pos }
        })
        .collect();
    top_words.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    top_words.truncate(MAX_TOP_WORDS);
    ClusterSummary {
        size,
        empty: false,
        pos_distribution,
        position_histogram,
        top_words,
    }
}
