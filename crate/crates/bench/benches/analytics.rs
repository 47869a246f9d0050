use std::hint::black_box;

use atlas_bench::corpus;
use atlas_core::analytics::{sankey_diagram, sort_heads, Direction, Metric};
use atlas_core::headlens::{
    build_head_profile, collect_head_vectors, kmeans_pp, DEFAULT_K, DEFAULT_MAX_ITER,
};
use atlas_core::model::run_sentence;
use atlas_core::piling::pile_layer;
use atlas_core::{init_weights, AttnType, ModelConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn forward(c: &mut Criterion) {
    let config = ModelConfig::default().with_seed(1);
    let weights = init_weights(&config, 64).unwrap();
    let mut group = c.benchmark_group("forward");
    for len in [4usize, 12, 32] {
        let tokens: Vec<usize> = (0..len).map(|t| t * 5 % 64).collect();
        group.bench_with_input(BenchmarkId::new("encoder_decoder", len), &tokens, |b, t| {
            b.iter(|| run_sentence(black_box(t), Some(t), &weights).unwrap())
        });
    }
    group.finish();
}

fn layer_analytics(c: &mut Criterion) {
    let store = corpus(&ModelConfig::default(), 1, 24);
    let s = &store.sentences()[0];
    let heads = s.layer(AttnType::EncoderSelf, 2).unwrap();
    c.bench_function("sort_heads/entropy", |b| {
        b.iter(|| sort_heads(black_box(heads), Metric::Entropy, Direction::Ascending).unwrap())
    });
    c.bench_function("pile_layer/8_heads", |b| {
        b.iter(|| pile_layer(black_box(heads), 0.5).unwrap())
    });
    c.bench_function("sankey_diagram", |b| {
        b.iter(|| sankey_diagram(black_box(s), AttnType::EncoderSelf, 0.05).unwrap())
    });
}

fn headlens(c: &mut Criterion) {
    let config = ModelConfig::default();
    let store = corpus(&config, 40, 16);
    let (queries, _) = collect_head_vectors(&store, AttnType::EncoderSelf, 1, 1).unwrap();
    let mut group = c.benchmark_group("headlens");
    group.sample_size(20);
    group.bench_function("kmeans_pp/k16", |b| {
        b.iter(|| kmeans_pp(black_box(&queries.points), DEFAULT_K, 0, DEFAULT_MAX_ITER).unwrap())
    });
    group.bench_function("build_head_profile", |b| {
        b.iter(|| {
            build_head_profile(black_box(&store), AttnType::EncoderSelf, 1, 1, DEFAULT_K, 0)
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, forward, layer_analytics, headlens);
criterion_main!(benches);
