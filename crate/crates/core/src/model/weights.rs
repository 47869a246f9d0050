use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ScaleMode};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Per-head projections, each `d_model x d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadProjection {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub heads: Vec<HeadProjection>,
    /// `d_model x d_model` output projection applied to the concatenated heads.
    pub w_o: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub w_in: Matrix,
    pub b_in: Array1<f64>,
    pub w_out: Matrix,
    pub b_out: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub self_attn: AttentionWeights,
    pub norm_attn: LayerNorm,
    pub ffn: FeedForward,
    pub norm_ffn: LayerNorm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer {
    pub self_attn: AttentionWeights,
    pub norm_self: LayerNorm,
    pub cross_attn: AttentionWeights,
    pub norm_cross: LayerNorm,
    pub ffn: FeedForward,
    pub norm_ffn: LayerNorm,
}

/// All parameters of the encoder/decoder stack.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub config: ModelConfig,
    /// `vocab_size x d_model`, shared by source and target sides.
    pub embedding: Matrix,
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
}

enum Param<'a> {
    Matrix(&'a mut Matrix),
    Vector(&'a mut Array1<f64>),
}

impl AttentionWeights {
    fn zeros(c: &ModelConfig) -> Self {
        let d_k = c.d_head();
        let head = HeadProjection {
            w_q: Array2::zeros((c.d_model, d_k)),
            w_k: Array2::zeros((c.d_model, d_k)),
            w_v: Array2::zeros((c.d_model, d_k)),
        };
        Self {
            heads: vec![head; c.n_heads],
            w_o: Array2::zeros((c.d_model, c.d_model)),
        }
    }

    fn params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, Param<'a>)>) {
        for (h, head) in self.heads.iter_mut().enumerate() {
            let h = h + 1;
            out.push((format!("{prefix}.{h}.w_q"), Param::Matrix(&mut head.w_q)));
            out.push((format!("{prefix}.{h}.w_k"), Param::Matrix(&mut head.w_k)));
            out.push((format!("{prefix}.{h}.w_v"), Param::Matrix(&mut head.w_v)));
        }
        out.push((format!("{prefix}.w_o"), Param::Matrix(&mut self.w_o)));
    }
}

impl FeedForward {
    fn zeros(c: &ModelConfig) -> Self {
        Self {
            w_in: Array2::zeros((c.d_model, c.d_ff)),
            b_in: Array1::zeros(c.d_ff),
            w_out: Array2::zeros((c.d_ff, c.d_model)),
            b_out: Array1::zeros(c.d_model),
        }
    }

    fn params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, Param<'a>)>) {
        out.push((format!("{prefix}.w_in"), Param::Matrix(&mut self.w_in)));
        out.push((format!("{prefix}.b_in"), Param::Vector(&mut self.b_in)));
        out.push((format!("{prefix}.w_out"), Param::Matrix(&mut self.w_out)));
        out.push((format!("{prefix}.b_out"), Param::Vector(&mut self.b_out)));
    }
}

impl LayerNorm {
    fn identity(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
        }
    }

    fn params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, Param<'a>)>) {
        out.push((format!("{prefix}.gamma"), Param::Vector(&mut self.gamma)));
        out.push((format!("{prefix}.beta"), Param::Vector(&mut self.beta)));
    }
}

impl WeightSet {
    /// Correctly shaped parameters with zero matrices and identity layer norms.
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::Config("vocabulary must not be empty".into()));
        }
        let c = config;
        let encoder = (0..c.n_layers)
            .map(|_| EncoderLayer {
                self_attn: AttentionWeights::zeros(c),
                norm_attn: LayerNorm::identity(c.d_model),
                ffn: FeedForward::zeros(c),
                norm_ffn: LayerNorm::identity(c.d_model),
            })
            .collect();
        let decoder = (0..c.n_layers)
            .map(|_| DecoderLayer {
                self_attn: AttentionWeights::zeros(c),
                norm_self: LayerNorm::identity(c.d_model),
                cross_attn: AttentionWeights::zeros(c),
                norm_cross: LayerNorm::identity(c.d_model),
                ffn: FeedForward::zeros(c),
                norm_ffn: LayerNorm::identity(c.d_model),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            embedding: Array2::zeros((vocab_size, c.d_model)),
            encoder,
            decoder,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    /// Every parameter in canonical order. This order fixes both the random
    /// draw sequence of [`init_weights`] and the layout of weight files.
    fn params(&mut self) -> Vec<(String, Param<'_>)> {
        let mut out = vec![("embedding".to_string(), Param::Matrix(&mut self.embedding))];
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            let p = format!("encoder.{}", l + 1);
            layer.self_attn.params(&format!("{p}.self_attn"), &mut out);
            layer.norm_attn.params(&format!("{p}.norm_attn"), &mut out);
            layer.ffn.params(&format!("{p}.ffn"), &mut out);
            layer.norm_ffn.params(&format!("{p}.norm_ffn"), &mut out);
        }
        for (l, layer) in self.decoder.iter_mut().enumerate() {
            let p = format!("decoder.{}", l + 1);
            layer.self_attn.params(&format!("{p}.self_attn"), &mut out);
            layer.norm_self.params(&format!("{p}.norm_self"), &mut out);
            layer
                .cross_attn
                .params(&format!("{p}.cross_attn"), &mut out);
            layer
                .norm_cross
                .params(&format!("{p}.norm_cross"), &mut out);
            layer.ffn.params(&format!("{p}.ffn"), &mut out);
            layer.norm_ffn.params(&format!("{p}.norm_ffn"), &mut out);
        }
        out
    }

    pub fn to_file(&self) -> WeightFile {
        let mut copy = self.clone();
        let weights = copy
            .params()
            .into_iter()
            .map(|(name, p)| match p {
                Param::Matrix(m) => NamedMatrix {
                    name,
                    shape: [m.nrows(), m.ncols()],
                    data: m.iter().copied().collect(),
                },
                Param::Vector(v) => NamedMatrix {
                    name,
                    shape: [1, v.len()],
                    data: v.to_vec(),
                },
            })
            .collect();
        WeightFile {
            version: 1,
            model: WeightFileModel {
                n_layers: self.config.n_layers,
                n_heads: self.config.n_heads,
                d_model: self.config.d_model,
                d_ff: self.config.d_ff,
                scale_mode: self.config.scale_mode,
                vocab_size: self.vocab_size(),
            },
            weights,
        }
    }

    /// Rebuilds a weight set from a weight file. Every parameter must be
    /// present exactly once with the shape the model section implies.
    pub fn from_file(file: &WeightFile) -> Result<Self> {
        if file.version != 1 {
            return Err(Error::Input(format!(
                "unsupported weight file version {}",
                file.version
            )));
        }
        let m = &file.model;
        let config = ModelConfig {
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            d_model: m.d_model,
            d_ff: m.d_ff,
            scale_mode: m.scale_mode,
            seed: 0,
        };
        let mut by_name: BTreeMap<&str, &NamedMatrix> = BTreeMap::new();
        for w in &file.weights {
            if by_name.insert(&w.name, w).is_some() {
                return Err(Error::Input(format!("duplicate weight `{}`", w.name)));
            }
        }
        let mut set = Self::zeros(&config, m.vocab_size)?;
        let mut used = 0;
        for (name, param) in set.params() {
            let src = by_name
                .get(name.as_str())
                .ok_or_else(|| Error::Input(format!("missing weight `{name}`")))?;
            used += 1;
            let expected = match &param {
                Param::Matrix(t) => [t.nrows(), t.ncols()],
                Param::Vector(t) => [1, t.len()],
            };
            if src.shape != expected || src.data.len() != expected[0] * expected[1] {
                return Err(Error::Input(format!(
                    "weight `{name}` has shape {:?}, expected {expected:?}",
                    src.shape
                )));
            }
            match param {
                Param::Matrix(t) => t.iter_mut().zip(&src.data).for_each(|(d, s)| *d = *s),
                Param::Vector(t) => t.iter_mut().zip(&src.data).for_each(|(d, s)| *d = *s),
            }
        }
        if used != by_name.len() {
            return Err(Error::Input("weight file holds unknown parameters".into()));
        }
        Ok(set)
    }
}

/// Seeded random initialization.
///
/// Every matrix parameter (embedding, projections, feed-forward weights) is
/// filled row-major, in canonical parameter order, with draws uniform on
/// `[-1/sqrt(d_model), 1/sqrt(d_model)]` from a ChaCha8 generator seeded with
/// `config.seed`. Biases start at zero and layer norms at the identity.
pub fn init_weights(config: &ModelConfig, vocab_size: usize) -> Result<WeightSet> {
    let mut set = WeightSet::zeros(config, vocab_size)?;
    let bound = 1.0 / (config.d_model as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (_, param) in set.params() {
        if let Param::Matrix(m) = param {
            m.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
    }
    Ok(set)
}

/// On-disk weight container, sharing the JSON conventions of attention dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub version: u32,
    pub model: WeightFileModel,
    pub weights: Vec<NamedMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFileModel {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    #[serde(default)]
    pub scale_mode: ScaleMode,
    pub vocab_size: usize,
}

/// A named matrix stored row-major; vectors use shape `[1, n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}
