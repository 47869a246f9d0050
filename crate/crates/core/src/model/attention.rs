use ndarray::{concatenate, Array1, Array2, Axis};

use super::weights::{AttentionWeights, WeightSet};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Sinusoidal position vector: entry `2i` is `sin(pos / 10000^(2i/d))` and
/// entry `2i+1` is the cosine of the same argument.
pub fn positional_encoding(position: usize, d_model: usize) -> Array1<f64> {
    Array1::from_shape_fn(d_model, |idx| {
        let pair = (idx / 2) * 2;
        let angle = position as f64 / 10000f64.powf(pair as f64 / d_model as f64);
        if idx % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Token embeddings plus positional encodings, one row per token.
pub fn embed_sequence(tokens: &[usize], weights: &WeightSet) -> Result<Matrix> {
    let d_model = weights.config.d_model;
    let vocab = weights.vocab_size();
    let mut out = Array2::zeros((tokens.len(), d_model));
    for (t, &id) in tokens.iter().enumerate() {
        if id >= vocab {
            return Err(Error::Input(format!(
                "token id {id} at position {t} outside vocabulary of {vocab}"
            )));
        }
        let row = &weights.embedding.row(id) + &positional_encoding(t, d_model);
        out.row_mut(t).assign(&row);
    }
    Ok(out)
}

/// Lower-triangular visibility mask: query `i` may see keys `0..=i`.
pub fn causal_mask(len: usize) -> Array2<bool> {
    Array2::from_shape_fn((len, len), |(i, j)| j <= i)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledAttention {
    /// `T_q x T_k` attention probabilities.
    pub weights: Matrix,
    /// `T_q x d_v` attended values.
    pub output: Matrix,
}

/// `softmax(Q K^T / scale) V`.
///
/// `mask[i, j] == false` hides key `j` from query `i`; hidden entries get
/// probability exactly zero. A row with no visible key is an error.
pub fn scaled_dot_attention(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    mask: Option<&Array2<bool>>,
    scale: f64,
) -> Result<ScaledAttention> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Input(format!(
            "attention scale must be positive, got {scale}"
        )));
    }
    if q.ncols() != k.ncols() {
        return Err(Error::Input(format!(
            "query width {} differs from key width {}",
            q.ncols(),
            k.ncols()
        )));
    }
    if k.nrows() != v.nrows() {
        return Err(Error::Input(format!(
            "{} keys but {} values",
            k.nrows(),
            v.nrows()
        )));
    }
    let (t_q, t_k) = (q.nrows(), k.nrows());
    if let Some(m) = mask {
        if m.dim() != (t_q, t_k) {
            return Err(Error::Input(format!(
                "mask shape {:?} does not match scores ({t_q}, {t_k})",
                m.dim()
            )));
        }
    }
    let mut weights = q.dot(&k.t()) / scale;
    for (i, mut row) in weights.rows_mut().into_iter().enumerate() {
        let visible = |j: usize| mask.is_none_or(|m| m[[i, j]]);
        let max = (0..t_k)
            .filter(|&j| visible(j))
            .map(|j| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateRow { row: i });
        }
        let mut sum = 0.0;
        for j in 0..t_k {
            row[j] = if visible(j) {
                (row[j] - max).exp()
            } else {
                0.0
            };
            sum += row[j];
        }
        row.mapv_inplace(|x| x / sum);
    }
    let output = weights.dot(v);
    Ok(ScaledAttention { weights, output })
}

/// One head's attention with the projected queries and keys it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadAttention {
    pub weights: Matrix,
    pub queries: Matrix,
    pub keys: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadOutput {
    /// `T_q x d_model`
    pub output: Matrix,
    pub heads: Vec<HeadAttention>,
}

/// `Concat(head_1, ..., head_h) W_o` with `head_i = Attention(X_q W_q, X_kv W_k, X_kv W_v)`.
pub fn multi_head_attention(
    x_q: &Matrix,
    x_kv: &Matrix,
    layer: &AttentionWeights,
    mask: Option<&Array2<bool>>,
    scale: f64,
) -> Result<MultiHeadOutput> {
    let d_model = layer.w_o.nrows();
    for (name, x) in [("query input", x_q), ("key/value input", x_kv)] {
        if x.ncols() != d_model {
            return Err(Error::Input(format!(
                "{name} has width {}, expected d_model {d_model}",
                x.ncols()
            )));
        }
    }
    let mut heads = Vec::with_capacity(layer.heads.len());
    let mut outputs = Vec::with_capacity(layer.heads.len());
    for proj in &layer.heads {
        let queries = x_q.dot(&proj.w_q);
        let keys = x_kv.dot(&proj.w_k);
        let values = x_kv.dot(&proj.w_v);
        let att = scaled_dot_attention(&queries, &keys, &values, mask, scale)?;
        outputs.push(att.output);
        heads.push(HeadAttention {
            weights: att.weights,
            queries,
            keys,
        });
    }
    let views: Vec<_> = outputs.iter().map(|o| o.view()).collect();
    let concat = concatenate(Axis(1), &views)
        .map_err(|e| Error::Input(format!("cannot concatenate heads: {e}")))?;
    if concat.ncols() != d_model {
        return Err(Error::Input(format!(
            "concatenated heads have width {}, expected {d_model}",
            concat.ncols()
        )));
    }
    Ok(MultiHeadOutput {
        output: concat.dot(&layer.w_o),
        heads,
    })
}
