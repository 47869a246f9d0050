use atlas_core::analytics::{
    entropy_score, position_offset_score, row_entropy_score, sankey_diagram, sankey_edges,
    sort_heads, word_histogram, Direction, EntropyAxis, Metric,
};
use atlas_core::generate::{generate_dump, parse_sentences};
use atlas_core::{ingest_dump, AttentionRecord, AttnType, Matrix, ModelConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-normalized matrix from nonnegative raw weights; rows of zeros become one-hot.
fn stochastic(raw: Vec<Vec<f64>>) -> Matrix {
    let t_q = raw.len();
    let t_k = raw[0].len();
    Array2::from_shape_fn((t_q, t_k), |(i, j)| {
        let s: f64 = raw[i].iter().sum();
        if s == 0.0 {
            if j == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            raw[i][j] / s
        }
    })
}

fn square_stochastic() -> impl Strategy<Value = Matrix> {
    (1usize..=8).prop_flat_map(|t| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], t),
            t,
        )
        .prop_map(stochastic)
    })
}

fn random_head(rng: &mut ChaCha8Rng, t: usize, sharpness: f64) -> Matrix {
    let raw: Vec<Vec<f64>> = (0..t)
        .map(|_| {
            (0..t)
                .map(|_| (rng.random::<f64>() * sharpness).exp())
                .collect()
        })
        .collect();
    stochastic(raw)
}

fn record(head: usize, weights: Matrix) -> AttentionRecord {
    AttentionRecord {
        attn_type: AttnType::EncoderSelf,
        layer: 1,
        head,
        weights,
        vectors: None,
    }
}

/// Entropy and offset evaluated entry by entry with explicit loops.
fn oracle_score(a: &Matrix, metric: Metric) -> f64 {
    let (t_q, t_k) = a.dim();
    let mut total = 0.0;
    for i in 0..t_q {
        for j in 0..t_k {
            let p = a[[i, j]];
            total += match metric {
                Metric::Entropy => {
                    if p == 0.0 {
                        0.0
                    } else {
                        -p * p.ln()
                    }
                }
                Metric::Position => p * (j as f64 - i as f64),
            };
        }
    }
    total / t_q as f64
}

#[test]
fn random_heads_sort_like_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let heads: Vec<_> = (1..=8)
            .map(|h| record(h, random_head(&mut rng, 8, 6.0)))
            .collect();
        for metric in [Metric::Entropy, Metric::Position] {
            for dir in [Direction::Ascending, Direction::Descending] {
                let got: Vec<usize> = sort_heads(&heads, metric, dir)
                    .unwrap()
                    .iter()
                    .map(|s| s.head)
                    .collect();
                // selection by repeated extremum search
                let mut left: Vec<(usize, f64)> = heads
                    .iter()
                    .map(|r| (r.head, oracle_score(&r.weights, metric)))
                    .collect();
                let mut expected = Vec::new();
                while !left.is_empty() {
                    let mut pick = 0;
                    for (i, (_, s)) in left.iter().enumerate() {
                        let better = match dir {
                            Direction::Ascending => *s < left[pick].1,
                            Direction::Descending => *s > left[pick].1,
                        };
                        if better {
                            pick = i;
                        }
                    }
                    expected.push(left.remove(pick).0);
                }
                assert_eq!(got, expected);
            }
        }
    }
}

#[test]
fn sankey_incoming_weights_sum_to_one() {
    let text = "the planet is home to many species\nwe live on a small blue planet ||| nous vivons sur une petite planète";
    let config = ModelConfig::new(3, 4, 16).unwrap().with_seed(5);
    let store =
        ingest_dump(&generate_dump(&config, &parse_sentences(text).unwrap(), false).unwrap())
            .unwrap();
    for s in store.sentences() {
        for t in s.attn_types() {
            let diagram = sankey_diagram(s, t, 0.0).unwrap();
            assert_eq!(diagram.transitions.len(), 3);
            for edges in &diagram.transitions {
                let n_to = diagram.target_words.len();
                let mut sums = vec![0.0; n_to];
                for e in edges {
                    sums[e.to_word] += e.weight;
                    assert!((0.0..=1.0).contains(&e.weight));
                }
                for s in sums {
                    assert!((s - 1.0).abs() < 1e-6);
                }
            }
            let layers = s.layers(t).unwrap();
            assert!(sankey_edges(layers, 3, 0.0).is_err());
            let pruned = sankey_diagram(s, t, 0.05).unwrap();
            assert!(pruned
                .transitions
                .iter()
                .flatten()
                .all(|e| e.weight >= 0.05));
        }
    }
}

proptest! {
    #[test]
    fn entropy_within_bounds(a in square_stochastic()) {
        let e = row_entropy_score(&a).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(e <= (a.ncols() as f64).ln() + 1e-12);
        let c = entropy_score(&a, EntropyAxis::Columns).unwrap();
        prop_assert!(c >= 0.0 && c <= (a.nrows() as f64).ln() + 1e-12);
    }

    #[test]
    fn mirrored_offsets_cancel(a in square_stochastic()) {
        let t = a.nrows();
        let mirror = Array2::from_shape_fn((t, t), |(i, j)| a[[t - 1 - i, t - 1 - j]]);
        let sum = position_offset_score(&a).unwrap() + position_offset_score(&mirror).unwrap();
        prop_assert!(sum.abs() < 1e-12);
        let bound = (t - 1) as f64;
        prop_assert!(position_offset_score(&a).unwrap().abs() <= bound + 1e-12);
    }

    #[test]
    fn histogram_mass_is_query_count(heads in prop::collection::vec(square_stochastic(), 1..6)) {
        let t = heads[0].nrows();
        let recs: Vec<_> = heads
            .into_iter()
            .filter(|m| m.nrows() == t)
            .enumerate()
            .map(|(h, m)| record(h + 1, m))
            .collect();
        let hist = word_histogram(&recs).unwrap();
        for k in 0..recs.len() {
            let total: f64 = hist.heights.iter().map(|w| w[k]).sum();
            prop_assert!((total - t as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn sort_is_a_permutation_and_reverses(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<_> = (1..=n).map(|h| record(h, random_head(&mut rng, 5, 4.0))).collect();
        let asc: Vec<usize> = sort_heads(&recs, Metric::Position, Direction::Ascending).unwrap().iter().map(|s| s.head).collect();
        let desc: Vec<usize> = sort_heads(&recs, Metric::Position, Direction::Descending).unwrap().iter().map(|s| s.head).collect();
        let mut sorted = asc.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
        let mut rev = desc.clone();
        rev.reverse();
        prop_assert_eq!(asc, rev);
    }
}

#[test]
fn square_superdiagonal_offset() {
    // the last query can only look at itself
    for t in 2..10 {
        let a = Array2::from_shape_fn(
            (t, t),
            |(i, j)| if j == (i + 1).min(t - 1) { 1.0 } else { 0.0 },
        );
        let expected = (t - 1) as f64 / t as f64;
        assert!((position_offset_score(&a).unwrap() - expected).abs() < 1e-12);
    }
}
