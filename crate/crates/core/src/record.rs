use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::matrix::{self, Matrix};
use crate::Error;

/// Which attention sub-layer a record was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnType {
    EncoderSelf,
    DecoderSelf,
    EncoderDecoder,
}

impl AttnType {
    pub const ALL: [AttnType; 3] = [Self::EncoderSelf, Self::DecoderSelf, Self::EncoderDecoder];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EncoderSelf => "encoder_self",
            Self::DecoderSelf => "decoder_self",
            Self::EncoderDecoder => "encoder_decoder",
        }
    }

    /// True when queries come from the target side.
    pub fn queries_on_target(self) -> bool {
        !matches!(self, Self::EncoderSelf)
    }

    /// True when keys come from the target side.
    pub fn keys_on_target(self) -> bool {
        matches!(self, Self::DecoderSelf)
    }
}

impl fmt::Display for AttnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttnType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttnType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown attention type `{s}`")))
    }
}

/// Query and key vectors of one head for one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryKey {
    /// `T_q x d_k`
    #[serde(with = "matrix::rows")]
    pub queries: Matrix,
    /// `T_k x d_k`
    #[serde(with = "matrix::rows")]
    pub keys: Matrix,
}

/// One head's attention for one sentence.
///
/// Layer and head are 1-based. The owning [`crate::SentenceEntry`] carries the
/// sentence identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub attn_type: AttnType,
    pub layer: usize,
    pub head: usize,
    /// Row-stochastic `T_q x T_k` attention matrix.
    #[serde(with = "matrix::rows")]
    pub weights: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<QueryKey>,
}

impl AttentionRecord {
    pub fn query_len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn key_len(&self) -> usize {
        self.weights.ncols()
    }
}
