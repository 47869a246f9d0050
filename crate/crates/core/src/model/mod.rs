//! A small from-scratch Transformer that exists to produce attention.
//!
//! Weights are never trained: they are drawn from a seeded generator or loaded
//! from a weight file. The forward passes return every head's attention matrix
//! together with its projected queries and keys.

mod attention;
mod config;
mod transformer;
mod weights;

pub use attention::{
    causal_mask, embed_sequence, multi_head_attention, positional_encoding, scaled_dot_attention,
    HeadAttention, MultiHeadOutput, ScaledAttention,
};
pub use config::{ModelConfig, ScaleMode};
pub use transformer::{
    decoder_forward, encoder_forward, run_sentence, DecoderOutput, EncoderOutput,
    LAYER_NORM_EPSILON,
};
pub use weights::{
    init_weights, AttentionWeights, DecoderLayer, EncoderLayer, FeedForward, HeadProjection,
    LayerNorm, NamedMatrix, WeightFile, WeightFileModel, WeightSet,
};
