//! Attention piling: grouping the heads of one layer whose attention
//! patterns look alike, with one averaged heatmap per group.

use serde::{Deserialize, Serialize};

use crate::matrix::{self, Matrix};
use crate::record::{AttentionRecord, AttnType};
use crate::{Error, Result};

/// Feature of one head: its flattened attention followed by the
/// `[upper, lower, diagonal]` mass proportions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PileFeature {
    pub head: usize,
    pub vector: Vec<f64>,
}

/// Shares of attention mass strictly above the diagonal (later keys),
/// strictly below it (earlier keys) and on it, each divided by `T_q`.
/// The diagonal of a rectangular matrix is `(j, j)` for `j < min(T_q, T_k)`.
pub fn mass_proportions(a: &Matrix) -> [f64; 3] {
    let mut sums = [0.0; 3];
    for ((i, j), &p) in a.indexed_iter() {
        let slot = match i.cmp(&j) {
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Equal => 2,
        };
        sums[slot] += p;
    }
    let t_q = a.nrows().max(1) as f64;
    sums.map(|s| s / t_q)
}

/// Row-major flattening of `a` followed by [`mass_proportions`]; length
/// `T_q * T_k + 3`.
pub fn pile_feature(a: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().copied().collect();
    v.extend(mass_proportions(a));
    v
}

/// A group of heads produced by [`agglomerative_cluster`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadCluster {
    /// Head numbers, ascending.
    pub members: Vec<usize>,
    /// Largest Euclidean distance between two members' features.
    pub intra_distance: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Average-linkage agglomerative clustering on Euclidean distance.
///
/// Clusters keep merging while the closest pair's linkage is strictly below
/// `threshold`; a threshold of zero therefore leaves every head alone and an
/// infinite one yields a single cluster. Ties go to the pair whose lowest
/// head numbers are smallest. Output is ordered by lowest member.
pub fn agglomerative_cluster(features: &[PileFeature], threshold: f64) -> Result<Vec<HeadCluster>> {
    if features.is_empty() {
        return Err(Error::Input("no features to cluster".into()));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Input(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let len = features[0].vector.len();
    if let Some(f) = features.iter().find(|f| f.vector.len() != len) {
        return Err(Error::Input(format!(
            "feature of head {} has length {}, expected {len}",
            f.head,
            f.vector.len()
        )));
    }
    let mut sorted: Vec<&PileFeature> = features.iter().collect();
    sorted.sort_by_key(|f| f.head);
    let n = sorted.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| euclidean(&sorted[i].vector, &sorted[j].vector))
                .collect()
        })
        .collect();

    // Slot `a` holds the cluster whose lowest member is point `a`; merging
    // (a, b) with a < b keeps slot a. `linkage` is updated by Lance-Williams.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut linkage = dist.clone();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            if members[a].is_none() {
                continue;
            }
            for b in a + 1..n {
                if members[b].is_none() {
                    continue;
                }
                if best.is_none_or(|(_, _, d)| linkage[a][b] < d) {
                    best = Some((a, b, linkage[a][b]));
                }
            }
        }
        let Some((a, b, d)) = best else { break };
        if d >= threshold {
            break;
        }
        let merged_b = members[b].take().expect("active slot");
        let (na, nb) = (
            members[a].as_ref().map_or(0, Vec::len) as f64,
            merged_b.len() as f64,
        );
        for x in 0..n {
            if x == a || members[x].is_none() {
                continue;
            }
            let l = (na * linkage[a][x] + nb * linkage[b][x]) / (na + nb);
            linkage[a][x] = l;
            linkage[x][a] = l;
        }
        members[a].as_mut().expect("active slot").extend(merged_b);
    }

    Ok(members
        .into_iter()
        .flatten()
        .map(|mut idx| {
            idx.sort_unstable();
            let intra_distance = idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| dist[i][j])
                .fold(0.0, f64::max);
            HeadCluster {
                members: idx.iter().map(|&i| sorted[i].head).collect(),
                intra_distance,
            }
        })
        .collect())
}

/// Element-wise mean of equally shaped matrices.
pub fn aggregate_pile(matrices: &[&Matrix]) -> Result<Matrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Input("cannot aggregate an empty pile".into()))?;
    let mut sum = Matrix::zeros(first.dim());
    for m in matrices {
        if m.dim() != first.dim() {
            return Err(Error::Input(format!(
                "matrix shape {:?} differs from {:?}",
                m.dim(),
                first.dim()
            )));
        }
        sum += *m;
    }
    Ok(sum / matrices.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pile {
    pub members: Vec<usize>,
    #[serde(with = "matrix::rows")]
    pub mean_matrix: Matrix,
    pub intra_distance: f64,
}

/// Piles of one layer of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPiles {
    pub attn_type: AttnType,
    pub layer: usize,
    pub threshold: f64,
    /// False for rectangular (encoder-decoder) attention, which has no
    /// self-attending diagonal.
    pub square: bool,
    pub piles: Vec<Pile>,
}

/// Features, clustering and aggregation for all heads of one layer.
pub fn pile_layer(records: &[AttentionRecord], threshold: f64) -> Result<LayerPiles> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("no attention records to pile".into()))?;
    if records.iter().any(|r| {
        r.layer != first.layer
            || r.attn_type != first.attn_type
            || r.weights.dim() != first.weights.dim()
    }) {
        return Err(Error::Input(
            "records must share layer, attention type and shape".into(),
        ));
    }
    let features: Vec<PileFeature> = records
        .iter()
        .map(|r| PileFeature {
            head: r.head,
            vector: pile_feature(&r.weights),
        })
        .collect();
    let clusters = agglomerative_cluster(&features, threshold)?;
    let piles = clusters
        .into_iter()
        .map(|c| {
            let mats: Vec<&Matrix> = c
                .members
                .iter()
                .map(|h| {
                    &records
                        .iter()
                        .find(|r| r.head == *h)
                        .expect("member of input")
                        .weights
                })
                .collect();
            Ok(Pile {
                mean_matrix: aggregate_pile(&mats)?,
                members: c.members,
                intra_distance: c.intra_distance,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LayerPiles {
        attn_type: first.attn_type,
        layer: first.layer,
        threshold,
        square: first.weights.is_square(),
        piles,
    })
}
