//! Scaled dot-product attention in its three forms, plus the multi-head
//! wrapper used by the encoder/decoder stacks.

use alloc::vec::Vec;

use super::matrix::{softmax_rows, Matrix};
use super::SeqError;

/// `softmax(Q·Kᵀ/√d_k)·V` with row-wise softmax. `Q` is `T_q×d_k`, `K`
/// `T_k×d_k`, `V` `T_k×d_v`.
pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix, SeqError> {
    scaled_attention(q, k, v, false)
}

/// As [`attention`] with scores above the diagonal forced to `-inf`
/// before the softmax, so row `i` is a distribution over positions `<= i`.
/// Requires `T_q == T_k`.
pub fn masked_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix, SeqError> {
    if q.rows() != k.rows() {
        return Err(SeqError::ShapeMismatch {
            context: "masked attention needs square score matrix",
        });
    }
    scaled_attention(q, k, v, true)
}

/// Unmasked attention with decoder states as queries and encoder states
/// as both keys and values.
pub fn cross_attention(
    decoder_states: &Matrix,
    encoder_states: &Matrix,
) -> Result<Matrix, SeqError> {
    attention(decoder_states, encoder_states, encoder_states)
}

fn scaled_attention(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    causal: bool,
) -> Result<Matrix, SeqError> {
    if q.cols() != k.cols() {
        return Err(SeqError::ShapeMismatch {
            context: "query/key widths",
        });
    }
    if k.rows() != v.rows() {
        return Err(SeqError::ShapeMismatch {
            context: "key/value row counts",
        });
    }
    let scale = 1.0 / libm::sqrt(q.cols() as f64);
    let mut scores = q.matmul(&k.transpose())?.scale(scale);
    if causal {
        for r in 0..scores.rows() {
            for c in (r + 1)..scores.cols() {
                scores.set(r, c, f64::NEG_INFINITY);
            }
        }
    }
    softmax_rows(&scores).matmul(v)
}

/// Per-head projection weights; every matrix is `d_model×d_model` and the
/// head split happens on the projected columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub n_heads: usize,
}

impl MultiHeadWeights {
    pub fn forward(
        &self,
        query_input: &Matrix,
        kv_input: &Matrix,
        causal: bool,
    ) -> Result<Matrix, SeqError> {
        let d_model = self.wq.rows();
        if d_model % self.n_heads != 0 {
            return Err(SeqError::ShapeMismatch {
                context: "d_model not divisible by n_heads",
            });
        }
        let d_k = d_model / self.n_heads;
        let q = query_input.matmul(&self.wq)?;
        let k = kv_input.matmul(&self.wk)?;
        let v = kv_input.matmul(&self.wv)?;
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let q_h = q.col_slice(h * d_k, d_k);
            let k_h = k.col_slice(h * d_k, d_k);
            let v_h = v.col_slice(h * d_k, d_k);
            heads.push(if causal {
                masked_attention(&q_h, &k_h, &v_h)?
            } else {
                attention(&q_h, &k_h, &v_h)?
            });
        }
        Matrix::hcat(&heads)?.matmul(&self.wo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_scores_average_values() {
        // Zero queries make every score equal; softmax goes uniform and
        // the output is the column mean of V.
        let q = Matrix::zeros(2, 3);
        let k = Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let v = Matrix::from_rows(&[&[3.0, 0.0], &[6.0, 3.0], &[0.0, 0.0]]);
        let out = attention(&q, &k, &v).unwrap();
        for r in 0..2 {
            assert!((out.get(r, 0) - 3.0).abs() < 1e-12);
            assert!((out.get(r, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_key_returns_its_value() {
        let q = Matrix::from_rows(&[&[0.3, -2.0], &[5.0, 1.0]]);
        let k = Matrix::from_rows(&[&[0.7, 0.7]]);
        let v = Matrix::from_rows(&[&[42.0, -1.0]]);
        let out = attention(&q, &k, &v).unwrap();
        for r in 0..2 {
            assert_eq!(out.row(r), &[42.0, -1.0]);
        }
    }

    #[test]
    fn hand_softmax_two_by_two() {
        // d_k = 1 so the scale is 1; scores [[0, ln 3], [0, 0]] give
        // weights [[0.25, 0.75], [0.5, 0.5]].
        let q = Matrix::from_rows(&[&[1.0], &[0.0]]);
        let k = Matrix::from_rows(&[&[0.0], &[libm::log(3.0)]]);
        let v = Matrix::from_rows(&[&[1.0], &[2.0]]);
        let out = attention(&q, &k, &v).unwrap();
        assert!((out.get(0, 0) - 1.75).abs() < 1e-12);
        assert!((out.get(1, 0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn masked_first_row_sees_only_itself() {
        let q = Matrix::from_rows(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let k = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let v = Matrix::from_rows(&[&[7.0], &[9.0]]);
        let out = masked_attention(&q, &k, &v).unwrap();
        assert_eq!(out.get(0, 0), 7.0);
    }

    #[test]
    fn masked_uniform_scores_average_prefix() {
        let q = Matrix::zeros(3, 2);
        let k = Matrix::zeros(3, 2);
        let v = Matrix::from_rows(&[&[3.0], &[9.0], &[0.0]]);
        let out = masked_attention(&q, &k, &v).unwrap();
        assert!((out.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((out.get(1, 0) - 6.0).abs() < 1e-12);
        assert!((out.get(2, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn masked_requires_square_scores() {
        let q = Matrix::zeros(2, 2);
        let k = Matrix::zeros(3, 2);
        let v = Matrix::zeros(3, 2);
        assert!(masked_attention(&q, &k, &v).is_err());
    }

    #[test]
    fn cross_attention_handles_different_lengths() {
        let dec = Matrix::zeros(4, 2);
        let enc = Matrix::from_rows(&[&[1.0, 0.0], &[3.0, 0.0]]);
        let out = cross_attention(&dec, &enc).unwrap();
        assert_eq!(out.rows(), 4);
        assert_eq!(out.cols(), 2);
        for r in 0..4 {
            assert!((out.get(r, 0) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let q = Matrix::zeros(2, 3);
        let k = Matrix::zeros(2, 2);
        assert!(attention(&q, &k, &k).is_err());
        let v = Matrix::zeros(5, 2);
        assert!(attention(&k, &k, &v).is_err());
    }
}
