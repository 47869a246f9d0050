use ndarray::Axis;

use super::attention::{causal_mask, embed_sequence, multi_head_attention, MultiHeadOutput};
use super::weights::{FeedForward, LayerNorm, WeightSet};
use crate::matrix::Matrix;
use crate::record::{AttentionRecord, AttnType, QueryKey};
use crate::{Error, Result};

pub const LAYER_NORM_EPSILON: f64 = 1e-6;

fn layer_norm(x: &Matrix, norm: &LayerNorm) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let denom = (var + LAYER_NORM_EPSILON).sqrt();
        row.iter_mut()
            .zip(norm.gamma.iter().zip(&norm.beta))
            .for_each(|(v, (g, b))| *v = (*v - mean) / denom * g + b);
    }
    out
}

fn feed_forward(x: &Matrix, ffn: &FeedForward) -> Matrix {
    let mut hidden = x.dot(&ffn.w_in) + ffn.b_in.view().insert_axis(Axis(0));
    hidden.mapv_inplace(|v| v.max(0.0));
    hidden.dot(&ffn.w_out) + ffn.b_out.view().insert_axis(Axis(0))
}

fn to_records(attn_type: AttnType, layer: usize, mh: MultiHeadOutput) -> Vec<AttentionRecord> {
    mh.heads
        .into_iter()
        .enumerate()
        .map(|(h, head)| AttentionRecord {
            attn_type,
            layer,
            head: h + 1,
            weights: head.weights,
            vectors: Some(QueryKey {
                queries: head.queries,
                keys: head.keys,
            }),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct EncoderOutput {
    /// Final `T x d_model` hidden states.
    pub states: Matrix,
    /// `n_layers * n_heads` records, layer-major.
    pub records: Vec<AttentionRecord>,
}

/// Post-norm encoder: per layer, self-attention, residual and layer norm, then
/// a ReLU feed-forward block with its own residual and layer norm.
pub fn encoder_forward(tokens: &[usize], weights: &WeightSet) -> Result<EncoderOutput> {
    if tokens.is_empty() {
        return Err(Error::Input("cannot encode an empty sequence".into()));
    }
    let scale = weights.config.attention_scale();
    let mut x = embed_sequence(tokens, weights)?;
    let mut records = Vec::with_capacity(weights.config.n_layers * weights.config.n_heads);
    for (l, layer) in weights.encoder.iter().enumerate() {
        let mh = multi_head_attention(&x, &x, &layer.self_attn, None, scale)?;
        x = layer_norm(&(&x + &mh.output), &layer.norm_attn);
        records.extend(to_records(AttnType::EncoderSelf, l + 1, mh));
        x = layer_norm(&(&x + &feed_forward(&x, &layer.ffn)), &layer.norm_ffn);
    }
    Ok(EncoderOutput { states: x, records })
}

#[derive(Clone, Debug)]
pub struct DecoderOutput {
    pub states: Matrix,
    pub self_records: Vec<AttentionRecord>,
    pub cross_records: Vec<AttentionRecord>,
}

/// Teacher-forced decoder over the given target tokens. Each layer runs
/// causal self-attention, then encoder-decoder attention whose queries come
/// from the target side and keys/values from `encoder_states`, then the
/// feed-forward block.
pub fn decoder_forward(
    target: &[usize],
    encoder_states: &Matrix,
    weights: &WeightSet,
) -> Result<DecoderOutput> {
    if target.is_empty() {
        return Err(Error::Input("cannot decode an empty target".into()));
    }
    if encoder_states.nrows() == 0 {
        return Err(Error::Input("encoder states are empty".into()));
    }
    let scale = weights.config.attention_scale();
    let mask = causal_mask(target.len());
    let mut y = embed_sequence(target, weights)?;
    let cap = weights.config.n_layers * weights.config.n_heads;
    let mut self_records = Vec::with_capacity(cap);
    let mut cross_records = Vec::with_capacity(cap);
    for (l, layer) in weights.decoder.iter().enumerate() {
        let sa = multi_head_attention(&y, &y, &layer.self_attn, Some(&mask), scale)?;
        y = layer_norm(&(&y + &sa.output), &layer.norm_self);
        self_records.extend(to_records(AttnType::DecoderSelf, l + 1, sa));

        let ca = multi_head_attention(&y, encoder_states, &layer.cross_attn, None, scale)?;
        y = layer_norm(&(&y + &ca.output), &layer.norm_cross);
        cross_records.extend(to_records(AttnType::EncoderDecoder, l + 1, ca));

        y = layer_norm(&(&y + &feed_forward(&y, &layer.ffn)), &layer.norm_ffn);
    }
    Ok(DecoderOutput {
        states: y,
        self_records,
        cross_records,
    })
}

/// Runs the encoder and, when a target is given, the decoder; returns every
/// record produced.
pub fn run_sentence(
    source: &[usize],
    target: Option<&[usize]>,
    weights: &WeightSet,
) -> Result<Vec<AttentionRecord>> {
    let enc = encoder_forward(source, weights)?;
    let mut records = enc.records;
    if let Some(target) = target {
        let dec = decoder_forward(target, &enc.states, weights)?;
        records.extend(dec.self_records);
        records.extend(dec.cross_records);
    }
    Ok(records)
}
