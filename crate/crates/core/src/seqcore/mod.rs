//! Desk-scale sequence-model mathematics: embeddings, the three attention
//! forms, FFN, residual+LayerNorm stacks, the denoising corruptions and
//! constrained beam decoding. Weights are random at a recorded seed; the
//! module verifies architecture math, not learned behaviour.

pub mod attention;
pub mod decode;
pub mod layers;
pub mod matrix;
pub mod noise;
pub mod vocab;

pub use attention::{attention, cross_attention, masked_attention, MultiHeadWeights};
pub use decode::{decode, length_penalized_score, DecodeConfig, DecodeError, NextTokenScorer};
pub use layers::{
    embed, ffn, gelu, residual_layernorm, DecoderLayerWeights, EncoderLayerWeights, FfnWeights,
    LayerNormParams, TransformerWeights, LAYER_NORM_EPS,
};
pub use matrix::{softmax_rows, Matrix};
pub use noise::{
    apply_noise, document_rotate, rotate_at, sentence_permute, text_infill, token_delete,
    token_mask, NoiseError, NoiseKind, NoiseSpec,
};
pub use vocab::Vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeqError {
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: &'static str },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenIdOutOfRange { id: u32, vocab: usize },
    #[error("{got} positions exceed the maximum of {max}")]
    TooManyPositions { got: usize, max: usize },
    #[error("invalid model dimensions: {0}")]
    InvalidDims(&'static str),
}

/// Architecture dimensions. `dropout` is recorded for exported configs
/// and inert at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ffn: usize,
    pub n_layers: usize,
    pub max_positions: usize,
    pub dropout: f64,
    pub init_std: f64,
}

impl ModelDims {
    pub fn new(
        d_model: usize,
        n_heads: usize,
        d_ffn: usize,
        n_layers: usize,
        max_positions: usize,
        dropout: f64,
        init_std: f64,
    ) -> Result<Self, SeqError> {
        if d_model == 0 || n_heads == 0 {
            return Err(SeqError::InvalidDims("d_model and n_heads must be >= 1"));
        }
        if d_model % n_heads != 0 {
            return Err(SeqError::InvalidDims("d_model must divide by n_heads"));
        }
        if max_positions == 0 {
            return Err(SeqError::InvalidDims("max_positions must be >= 1"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(SeqError::InvalidDims("dropout must lie in [0, 1)"));
        }
        if !(init_std > 0.0) {
            return Err(SeqError::InvalidDims("init_std must be positive"));
        }
        Ok(ModelDims {
            d_model,
            n_heads,
            d_ffn,
            n_layers,
            max_positions,
            dropout,
            init_std,
        })
    }

    /// Width 768, 12 heads, 3072 inner, 6+6 layers, 1024 positions,
    /// dropout 0.1, init std 0.02.
    pub fn bart_base() -> Self {
        ModelDims::new(768, 12, 3072, 6, 1024, 0.1, 0.02).unwrap()
    }

    /// Per-head width.
    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bart_base_dims_are_consistent() {
        let dims = ModelDims::bart_base();
        assert_eq!(dims.d_k(), 64);
        assert_eq!(dims.d_ffn, 4 * dims.d_model);
        assert_eq!(dims.max_positions, 1024);
    }

    #[test]
    fn dims_validation() {
        assert!(ModelDims::new(10, 3, 40, 1, 16, 0.1, 0.02).is_err());
        assert!(ModelDims::new(0, 1, 4, 1, 16, 0.1, 0.02).is_err());
        assert!(ModelDims::new(8, 2, 32, 1, 0, 0.1, 0.02).is_err());
        assert!(ModelDims::new(8, 2, 32, 1, 16, 1.0, 0.02).is_err());
        assert!(ModelDims::new(8, 2, 32, 1, 16, 0.1, 0.0).is_err());
    }
}
