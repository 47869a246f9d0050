//! HeadLens: corpus-level profile of one attention head.
//!
//! The query and key vectors a head produces for every token occurrence are
//! clustered separately with k-means++. Query and key centroids are related
//! by their raw inner product, and each cluster is summarized by its POS
//! composition, relative positions and most frequent words.

mod kmeans;
mod summary;
mod vectors;

use serde::{Deserialize, Serialize};

pub use kmeans::{
    elbow_from_curve, inertia, kmeans_best_of, kmeans_pp, suggest_k, Clustering, ElbowSuggestion,
    DEFAULT_MAX_ITER,
};
pub use summary::{
    cluster_summary, position_bin, ClusterSummary, PointMeta, TopWord, MAX_TOP_WORDS, POSITION_BINS,
};
pub use vectors::{collect_head_vectors, VectorSet};

use crate::dump::CorpusStore;
use crate::{AttnType, Error, Result};

/// Number of clusters used when the caller does not choose one.
pub const DEFAULT_K: usize = 16;

/// `S[p][q] = <query centroid p, key centroid q>`, unnormalized.
pub fn centroid_similarity(query: &Clustering, key: &Clustering) -> Result<Vec<Vec<f64>>> {
    let dim = |c: &Clustering| c.centroids.first().map(Vec::len);
    if let (Some(a), Some(b)) = (dim(query), dim(key)) {
        if a != b {
            return Err(Error::Input(format!(
                "query centroids have dimension {a}, key centroids {b}"
            )));
        }
    }
    Ok(query
        .centroids
        .iter()
        .map(|q| {
            key.centroids
                .iter()
                .map(|k| q.iter().zip(k).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect())
}

/// Largest `|S|`; a diverging color scale is anchored at `-extent..=extent`
/// (blue for low, red for high).
pub fn color_extent(similarity: &[Vec<f64>]) -> f64 {
    similarity.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadProfile {
    pub attn_type: AttnType,
    pub layer: usize,
    pub head: usize,
    pub seed: u64,
    pub query_clustering: Clustering,
    pub key_clustering: Clustering,
    /// `K_q x K_k` centroid inner products.
    pub similarity: Vec<Vec<f64>>,
    pub color_extent: f64,
    pub query_summaries: Vec<ClusterSummary>,
    pub key_summaries: Vec<ClusterSummary>,
}

fn summaries(set: &VectorSet, clustering: &Clustering) -> Vec<ClusterSummary> {
    (0..clustering.k)
        .map(|c| {
            let members: Vec<&PointMeta> = set
                .meta
                .iter()
                .zip(&clustering.assignments)
                .filter(|(_, &a)| a == c)
                .map(|(m, _)| m)
                .collect();
            cluster_summary(&members)
        })
        .collect()
}

/// Builds the full profile of one head with `k` query and `k` key clusters.
pub fn build_head_profile(
    store: &CorpusStore,
    attn_type: AttnType,
    layer: usize,
    head: usize,
    k: usize,
    seed: u64,
) -> Result<HeadProfile> {
    let (queries, keys) = collect_head_vectors(store, attn_type, layer, head)?;
    let query_clustering = kmeans_pp(&queries.points, k, seed, DEFAULT_MAX_ITER)?;
    let key_clustering = kmeans_pp(&keys.points, k, seed, DEFAULT_MAX_ITER)?;
    let similarity = centroid_similarity(&query_clustering, &key_clustering)?;
    Ok(HeadProfile {
        attn_type,
        layer,
        head,
        seed,
        color_extent: color_extent(&similarity),
        query_summaries: summaries(&queries, &query_clustering),
        key_summaries: summaries(&keys, &key_clustering),
        query_clustering,
        key_clustering,
        similarity,
    })
}

/// The pair of clusters behind one similarity cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPair {
    pub query_cluster: usize,
    pub key_cluster: usize,
    pub similarity: f64,
    pub query: ClusterSummary,
    pub key: ClusterSummary,
}

/// Looks up the 0-based `(query_cluster, key_cluster)` cell of a profile.
pub fn cluster_pair(
    profile: &HeadProfile,
    query_cluster: usize,
    key_cluster: usize,
) -> Result<ClusterPair> {
    let kq = profile.query_summaries.len();
    let kk = profile.key_summaries.len();
    if query_cluster >= kq {
        return Err(Error::Range(format!(
            "query cluster {query_cluster} outside 0..{kq}"
        )));
    }
    if key_cluster >= kk {
        return Err(Error::Range(format!(
            "key cluster {key_cluster} outside 0..{kk}"
        )));
    }
    Ok(ClusterPair {
        query_cluster,
        key_cluster,
        similarity: profile.similarity[query_cluster][key_cluster],
        query: profile.query_summaries[query_cluster].clone(),
        key: profile.key_summaries[key_cluster].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustering(centroids: Vec<Vec<f64>>) -> Clustering {
        Clustering {
            k: centroids.len(),
            assignments: vec![],
            centroids,
            inertia: 0.0,
            iterations: 0,
            inertia_history: vec![],
        }
    }

    #[test]
    fn orthogonal_and_unit() {
        let q = clustering(vec![vec![1.0, 0.0]]);
        let k = clustering(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(centroid_similarity(&q, &k).unwrap(), vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn dimension_mismatch() {
        let q = clustering(vec![vec![1.0, 0.0]]);
        let k = clustering(vec![vec![1.0]]);
        assert!(centroid_similarity(&q, &k).is_err());
    }

    #[test]
    fn extent_is_max_abs() {
        assert_eq!(color_extent(&[vec![0.5, -2.0], vec![1.0, 0.0]]), 2.0);
    }
}
