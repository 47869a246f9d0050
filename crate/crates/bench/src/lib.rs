//! Fixtures shared by the benchmarks under `benches/`.

use atlas_core::generate::{generate_dump, parse_sentences};
use atlas_core::{ingest_dump, CorpusStore, ModelConfig};

const WORDS: &[&str] = &[
    "the", "planet", "is", "home", "to", "many", "species", "we", "live", "on", "a", "small",
    "blue", "world", "and", "life", "goes", "in", "every", "corner", "of", "it", "with", "some",
    "hope",
];

/// `n` deterministic sentences of `len` tokens each.
pub fn sentence_text(n: usize, len: usize) -> String {
    (0..n)
        .map(|s| {
            (0..len)
                .map(|t| WORDS[(s * 7 + t * 3 + s * t) % WORDS.len()])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Toy-model corpus with query/key vectors.
pub fn corpus(config: &ModelConfig, n: usize, len: usize) -> CorpusStore {
    let sentences = parse_sentences(&sentence_text(n, len)).expect("fixture text parses");
    let doc = generate_dump(config, &sentences, true).expect("fixture dump");
    ingest_dump(&doc).expect("fixture dump validates")
}
