//! Embedding, feed-forward, residual+LayerNorm and the stacked
//! encoder/decoder composition, with `N(0, init_std)` weight
//! initialisation at a recorded seed. No training happens here; the
//! contract is mathematical correctness of the forward pass.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::MultiHeadWeights;
use super::matrix::Matrix;
use super::{ModelDims, SeqError};

/// Epsilon added to the per-row variance before normalising.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row `t` of the result is `E[id_t] + P[t]`.
pub fn embed(
    token_ids: &[u32],
    token_table: &Matrix,
    position_table: &Matrix,
) -> Result<Matrix, SeqError> {
    if token_ids.len() > position_table.rows() {
        return Err(SeqError::TooManyPositions {
            got: token_ids.len(),
            max: position_table.rows(),
        });
    }
    if token_table.cols() != position_table.cols() {
        return Err(SeqError::ShapeMismatch {
            context: "token/position embedding widths",
        });
    }
    let mut out = Matrix::zeros(token_ids.len(), token_table.cols());
    for (t, &id) in token_ids.iter().enumerate() {
        if id as usize >= token_table.rows() {
            return Err(SeqError::TokenIdOutOfRange {
                id,
                vocab: token_table.rows(),
            });
        }
        let row = out.row_mut(t);
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = token_table.get(id as usize, c) + position_table.get(t, c);
        }
    }
    Ok(out)
}

/// Exact GeLU: `0.5·x·(1 + erf(x/√2))`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Position-wise feed-forward: `GeLU(x·W1 + b1)·W2 + b2`, applied to each
/// row independently.
pub fn ffn(x: &Matrix, weights: &FfnWeights) -> Result<Matrix, SeqError> {
    if weights.b1.len() != weights.w1.cols() || weights.b2.len() != weights.w2.cols() {
        return Err(SeqError::ShapeMismatch {
            context: "ffn bias widths",
        });
    }
    let mut hidden = x.matmul(&weights.w1)?;
    for r in 0..hidden.rows() {
        let row = hidden.row_mut(r);
        for (v, b) in row.iter_mut().zip(&weights.b1) {
            *v = gelu(*v + b);
        }
    }
    let mut out = hidden.matmul(&weights.w2)?;
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (v, b) in row.iter_mut().zip(&weights.b2) {
            *v += b;
        }
    }
    Ok(out)
}

/// Learned per-feature scale and shift; identity at initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl LayerNormParams {
    pub fn identity(width: usize) -> Self {
        LayerNormParams {
            scale: vec![1.0; width],
            shift: vec![0.0; width],
        }
    }
}

/// `LayerNorm(x + sublayer_output)`: each row of the sum is normalised to
/// zero mean and unit variance (population variance, epsilon-stabilised)
/// and then scaled/shifted. A constant row normalises to zeros.
pub fn residual_layernorm(
    x: &Matrix,
    sublayer_output: &Matrix,
    params: &LayerNormParams,
) -> Result<Matrix, SeqError> {
    if params.scale.len() != x.cols() || params.shift.len() != x.cols() {
        return Err(SeqError::ShapeMismatch {
            context: "layernorm parameter widths",
        });
    }
    let mut sum = x.add(sublayer_output)?;
    let width = sum.cols() as f64;
    for r in 0..sum.rows() {
        let row = sum.row_mut(r);
        let mean: f64 = row.iter().sum::<f64>() / width;
        let variance: f64 =
            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width;
        let denom = libm::sqrt(variance + LAYER_NORM_EPS);
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) / denom * params.scale[c] + params.shift[c];
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerWeights {
    pub self_attn: MultiHeadWeights,
    pub ln1: LayerNormParams,
    pub ffn: FfnWeights,
    pub ln2: LayerNormParams,
}

impl EncoderLayerWeights {
    /// Self-attention → residual+LN → FFN → residual+LN.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix, SeqError> {
        let attended = self.self_attn.forward(x, x, false)?;
        let x = residual_layernorm(x, &attended, &self.ln1)?;
        let transformed = ffn(&x, &self.ffn)?;
        residual_layernorm(&x, &transformed, &self.ln2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerWeights {
    pub self_attn: MultiHeadWeights,
    pub ln1: LayerNormParams,
    pub cross_attn: MultiHeadWeights,
    pub ln2: LayerNormParams,
    pub ffn: FfnWeights,
    pub ln3: LayerNormParams,
}

impl DecoderLayerWeights {
    /// Masked self-attention → residual+LN → cross-attention →
    /// residual+LN → FFN → residual+LN.
    pub fn forward(&self, x: &Matrix, encoder_out: &Matrix) -> Result<Matrix, SeqError> {
        let attended = self.self_attn.forward(x, x, true)?;
        let x = residual_layernorm(x, &attended, &self.ln1)?;
        let crossed = self.cross_attn.forward(&x, encoder_out, false)?;
        let x = residual_layernorm(&x, &crossed, &self.ln2)?;
        let transformed = ffn(&x, &self.ffn)?;
        residual_layernorm(&x, &transformed, &self.ln3)
    }
}

/// Full randomly-initialised parameter set for one encoder/decoder model.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerWeights {
    pub dims: ModelDims,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub encoder: Vec<EncoderLayerWeights>,
    pub decoder: Vec<DecoderLayerWeights>,
    pub seed: u64,
}

impl TransformerWeights {
    /// Sample every weight from `N(0, dims.init_std)` with a ChaCha stream
    /// seeded by `seed`; LayerNorm parameters start at identity.
    pub fn random(dims: &ModelDims, vocab_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = dims.init_std;
        let d = dims.d_model;
        let mha = |rng: &mut ChaCha8Rng| MultiHeadWeights {
            wq: Matrix::random_normal(d, d, std, rng),
            wk: Matrix::random_normal(d, d, std, rng),
            wv: Matrix::random_normal(d, d, std, rng),
            wo: Matrix::random_normal(d, d, std, rng),
            n_heads: dims.n_heads,
        };
        let ffn_weights = |rng: &mut ChaCha8Rng| FfnWeights {
            w1: Matrix::random_normal(d, dims.d_ffn, std, rng),
            b1: vec![0.0; dims.d_ffn],
            w2: Matrix::random_normal(dims.d_ffn, d, std, rng),
            b2: vec![0.0; d],
        };
        let encoder = (0..dims.n_layers)
            .map(|_| EncoderLayerWeights {
                self_attn: mha(&mut rng),
                ln1: LayerNormParams::identity(d),
                ffn: ffn_weights(&mut rng),
                ln2: LayerNormParams::identity(d),
            })
            .collect();
        let decoder = (0..dims.n_layers)
            .map(|_| DecoderLayerWeights {
                self_attn: mha(&mut rng),
                ln1: LayerNormParams::identity(d),
                cross_attn: mha(&mut rng),
                ln2: LayerNormParams::identity(d),
                ffn: ffn_weights(&mut rng),
                ln3: LayerNormParams::identity(d),
            })
            .collect();
        TransformerWeights {
            dims: dims.clone(),
            token_embedding: Matrix::random_normal(vocab_size, d, std, &mut rng),
            position_embedding: Matrix::random_normal(dims.max_positions, d, std, &mut rng),
            encoder,
            decoder,
            seed,
        }
    }

    /// Run the encoder layers in order; identity when `n_layers == 0`.
    pub fn encoder_stack(&self, input: &Matrix) -> Result<Matrix, SeqError> {
        let mut x = input.clone();
        for layer in &self.encoder {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Run the decoder layers over a target prefix against the encoder
    /// output; identity when `n_layers == 0`.
    pub fn decoder_stack(
        &self,
        target_prefix: &Matrix,
        encoder_out: &Matrix,
    ) -> Result<Matrix, SeqError> {
        let mut x = target_prefix.clone();
        for layer in &self.decoder {
            x = layer.forward(&x, encoder_out)?;
        }
        Ok(x)
    }

    pub fn embed_tokens(&self, token_ids: &[u32]) -> Result<Matrix, SeqError> {
        embed(token_ids, &self.token_embedding, &self.position_embedding)
    }
}
