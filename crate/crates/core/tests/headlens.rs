#![allow(clippy::needless_range_loop)]

use atlas_core::generate::{generate_dump, parse_sentences};
use atlas_core::headlens::{
    build_head_profile, centroid_similarity, cluster_pair, cluster_summary, collect_head_vectors,
    kmeans_best_of, kmeans_pp, suggest_k, Clustering, PointMeta, DEFAULT_MAX_ITER,
};
use atlas_core::{ingest_dump, AttnType, CorpusStore, ModelConfig, UPos};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum within-cluster sum of squares over every labelling of the points
/// into at most `k` groups.
fn exhaustive_optimum(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..dim {
                let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
        // next labelling in base k
        let mut i = 0;
        while i < n && labels[i] == k - 1 {
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        labels[i] += 1;
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

fn blobs(
    rng: &mut ChaCha8Rng,
    centers: &[[f64; 2]],
    per_blob: usize,
    spread: f64,
) -> Vec<Vec<f64>> {
    centers
        .iter()
        .flat_map(|c| {
            (0..per_blob)
                .map(|_| {
                    vec![
                        c[0] + rng.random_range(-spread..spread),
                        c[1] + rng.random_range(-spread..spread),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Up to `k` well-separated blobs with random centres, sizes and spreads,
/// `n` points in total.
fn random_blob_fixture(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut centers: Vec<[f64; 2]> = Vec::new();
    while centers.len() < k {
        let c = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
        if centers
            .iter()
            .all(|o| ((o[0] - c[0]).powi(2) + (o[1] - c[1]).powi(2)).sqrt() > 8.0)
        {
            centers.push(c);
        }
    }
    (0..n)
        .map(|i| {
            let c = centers[if i < k { i } else { rng.random_range(0..k) }];
            let spread = rng.random_range(0.1..1.5);
            vec![
                c[0] + rng.random_range(-spread..spread),
                c[1] + rng.random_range(-spread..spread),
            ]
        })
        .collect()
}

#[test]
fn best_of_ten_reaches_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..=3.min(n));
        let points = random_blob_fixture(&mut rng, n, k);
        let opt = exhaustive_optimum(&points, k);
        let best = kmeans_best_of(&points, k, 0..10, DEFAULT_MAX_ITER).unwrap();
        assert!(
            (best.inertia - opt).abs() <= 1e-9 * opt.max(1.0),
            "n={n} k={k}: {} vs {opt}",
            best.inertia
        );
    }
}

#[test]
fn single_run_within_five_percent_on_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..=3.min(n));
        let points = random_blob_fixture(&mut rng, n, k);
        let opt = exhaustive_optimum(&points, k);
        for seed in 0..5 {
            let c = kmeans_pp(&points, k, seed, DEFAULT_MAX_ITER).unwrap();
            assert!(
                c.inertia <= opt * 1.05 + 1e-12,
                "n={n} k={k} seed={seed}: {} vs {opt}",
                c.inertia
            );
        }
    }
}

#[test]
fn elbow_finds_four_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let centers = [[0.0, 0.0], [20.0, 0.0], [0.0, 20.0], [20.0, 20.0]];
    let points = blobs(&mut rng, &centers, 10, 1.0);
    for seed in 0..5 {
        let s = suggest_k(&points, 2..=10, seed).unwrap();
        assert_eq!(s.k, 4, "seed {seed}: {:?}", s.curve);
        assert_eq!(s.curve.len(), 9);
    }
    assert!(suggest_k(&points, 2..=3, 0).is_err());
    assert!(suggest_k(&points, 2..=41, 0).is_err());
}

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
fn similarity_matches_naive_and_transposes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let dim = rng.random_range(1..=8);
        let kq = rng.random_range(1..=6);
        let kk = rng.random_range(1..=6);
        let q = clustering(random_points(&mut rng, kq, dim));
        let k = clustering(random_points(&mut rng, kk, dim));
        let s = centroid_similarity(&q, &k).unwrap();
        assert_eq!((s.len(), s[0].len()), (kq, kk));
        for p in 0..kq {
            for c in 0..kk {
                let mut dot = 0.0;
                for d in 0..dim {
                    dot += q.centroids[p][d] * k.centroids[c][d];
                }
                assert!((s[p][c] - dot).abs() < 1e-12);
            }
        }
        let swapped = centroid_similarity(&k, &q).unwrap();
        for p in 0..kq {
            for c in 0..kk {
                assert_eq!(swapped[c][p], s[p][c]);
            }
        }
    }
    let bad = clustering(vec![vec![1.0, 2.0, 3.0]]);
    assert!(centroid_similarity(&clustering(vec![vec![1.0]]), &bad).is_err());
}

fn corpus(include_vectors: bool) -> CorpusStore {
    let text = "the world is big\nlife is good in the world\nthe cat sat ||| le chat est assis";
    let config = ModelConfig::new(2, 4, 16).unwrap().with_seed(3);
    ingest_dump(&generate_dump(&config, &parse_sentences(text).unwrap(), include_vectors).unwrap())
        .unwrap()
}

#[test]
fn vectors_follow_attention_sides() {
    let store = corpus(true);
    let (q, k) = collect_head_vectors(&store, AttnType::EncoderSelf, 1, 1).unwrap();
    assert_eq!((q.len(), k.len()), (4 + 6 + 3, 4 + 6 + 3));
    assert!(q.points.iter().all(|p| p.len() == 4));
    let (q, k) = collect_head_vectors(&store, AttnType::EncoderDecoder, 2, 4).unwrap();
    assert_eq!((q.len(), k.len()), (4, 3));
    assert_eq!(q.meta[0].token, "le");
    assert_eq!(k.meta[0].token, "the");
    assert!(collect_head_vectors(&store, AttnType::EncoderSelf, 3, 1).is_err());
    assert!(collect_head_vectors(&store, AttnType::EncoderSelf, 1, 5).is_err());
    assert!(collect_head_vectors(&corpus(false), AttnType::EncoderSelf, 1, 1).is_err());
}

#[test]
fn profile_is_deterministic_and_consistent() {
    let store = corpus(true);
    let a = build_head_profile(&store, AttnType::EncoderSelf, 2, 3, 4, 9).unwrap();
    let b = build_head_profile(&store, AttnType::EncoderSelf, 2, 3, 4, 9).unwrap();
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap()
    );
    assert_eq!(a.similarity.len(), 4);
    let total: usize = a.query_summaries.iter().map(|s| s.size).sum();
    assert_eq!(total, 13);
    let pair = cluster_pair(&a, 3, 0).unwrap();
    assert_eq!(pair.similarity, a.similarity[3][0]);
    assert!(cluster_pair(&a, 4, 0).is_err());
    assert!(build_head_profile(&store, AttnType::EncoderSelf, 2, 3, 14, 9).is_err());
}

#[test]
fn summary_counts_words_and_tags() {
    let meta = |word: &str, pos: UPos, index: usize, len: usize| PointMeta {
        sentence_id: "s".into(),
        token_index: index,
        token: word.into(),
        pos,
        sentence_len: len,
    };
    let members = [
        meta("world", UPos::Noun, 0, 5),
        meta("World", UPos::Noun, 4, 5),
        meta("life", UPos::Noun, 2, 5),
        meta("the", UPos::Det, 1, 5),
    ];
    let refs: Vec<&PointMeta> = members.iter().collect();
    let s = cluster_summary(&refs);
    assert_eq!(s.size, 4);
    assert!(!s.empty);
    assert_eq!(s.pos_distribution[&UPos::Noun], 0.75);
    assert_eq!(s.top_words[0].word, "world");
    assert_eq!(s.top_words[0].count, 2);
    assert_eq!(s.top_words[1].word, "life");
    assert_eq!(s.position_histogram[0], 0.25);
    assert_eq!(s.position_histogram[9], 0.25);
    let empty = cluster_summary(&[]);
    assert!(empty.empty && empty.top_words.is_empty());
}

proptest! {
    #[test]
    fn lloyd_never_increases_inertia(seed in any::<u64>(), n in 3usize..40, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, n, 3);
        let k = k.min(n);
        let c = kmeans_pp(&points, k, seed, DEFAULT_MAX_ITER).unwrap();
        for w in c.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0));
        }
        prop_assert_eq!(c.assignments.len(), n);
        prop_assert!(c.assignments.iter().all(|&a| a < k));
        let again = kmeans_pp(&points, k, seed, DEFAULT_MAX_ITER).unwrap();
        prop_assert_eq!(c, again);
    }
}
