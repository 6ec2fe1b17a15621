//! Temporal self-attention block.
//!
//! Input rows are independent sequences over the frame axis (`rows × n × c`,
//! one row per batch element and spatial position):
//!
//! ```text
//! ζ  = x + PosEmb(x)
//! ζ₁ = LayerNorm(ζ)
//! ζ₂ = MultiHeadSelfAttention(ζ₁) + ζ
//! ζ₃ = LayerNorm(ζ₂)
//! y  = MLP(ζ₃) + ζ₂
//! ```

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ops::{silu_in_place, sinusoidal_embedding, LayerNorm, Linear};
use super::EncoderError;

/// Rows processed per work item; fixed so results never depend on scheduling.
const ROW_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalAttention {
    pub width: usize,
    pub heads: usize,
    pub use_pos_emb: bool,
    pub norm1: LayerNorm,
    pub to_q: Linear,
    pub to_k: Linear,
    pub to_v: Linear,
    pub to_out: Linear,
    pub norm2: LayerNorm,
    pub mlp_in: Linear,
    pub mlp_out: Linear,
}

impl TemporalAttention {
    pub(crate) fn random(
        rng: &mut ChaCha8Rng,
        width: usize,
        heads: usize,
        mlp_ratio: usize,
        use_pos_emb: bool,
        zero_bias: bool,
    ) -> Self {
        let hidden = width * mlp_ratio;
        Self {
            width,
            heads,
            use_pos_emb,
            norm1: LayerNorm::new(width),
            to_q: Linear::random(rng, width, width, zero_bias),
            to_k: Linear::random(rng, width, width, zero_bias),
            to_v: Linear::random(rng, width, width, zero_bias),
            to_out: Linear::random(rng, width, width, zero_bias),
            norm2: LayerNorm::new(width),
            mlp_in: Linear::random(rng, width, hidden, zero_bias),
            mlp_out: Linear::random(rng, hidden, width, zero_bias),
        }
    }

    fn check(&self, x: &[f32], rows: usize, n: usize) -> Result<(), EncoderError> {
        if self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            return Err(EncoderError::InvalidConfig(format!(
                "{} heads do not divide width {}",
                self.heads, self.width
            )));
        }
        if x.len() != rows * n * self.width {
            return Err(EncoderError::ShapeMismatch(format!(
                "attention input has {} values, expected {rows}×{n}×{}",
                x.len(),
                self.width
            )));
        }
        Ok(())
    }

    /// `x + PosEmb(x)` for `tokens = rows·n` tokens.
    fn add_pos_emb(&self, x: &[f32], n: usize) -> Vec<f32> {
        let mut z = x.to_vec();
        if self.use_pos_emb && n > 0 {
            let pe = sinusoidal_embedding(n, self.width);
            for seq in z.chunks_exact_mut(n * self.width) {
                for (v, p) in seq.iter_mut().zip(&pe) {
                    *v += p;
                }
            }
        }
        z
    }

    /// Softmax weights `rows × heads × n × n` and the attended values
    /// (`rows·n × width`, heads concatenated) for already-normalized input.
    fn attend(&self, z1: &[f32], n: usize, want_probs: bool) -> (Vec<f32>, Vec<f32>) {
        let c = self.width;
        let dh = c / self.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let q = self.to_q.forward(z1);
        let k = self.to_k.forward(z1);
        let v = self.to_v.forward(z1);
        let rows = z1.len() / (n * c);
        let mut out = vec![0.0f32; z1.len()];
        let mut probs = if want_probs {
            vec![0.0f32; rows * self.heads * n * n]
        } else {
            Vec::new()
        };
        let mut p = vec![0.0f32; n];
        for r in 0..rows {
            let base = r * n * c;
            for h in 0..self.heads {
                let off = h * dh;
                for i in 0..n {
                    let qi = &q[base + i * c + off..][..dh];
                    let mut max = f32::NEG_INFINITY;
                    for (j, pj) in p.iter_mut().enumerate() {
                        let kj = &k[base + j * c + off..][..dh];
                        *pj = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f32>() * scale;
                        max = max.max(*pj);
                    }
                    let mut sum = 0.0f32;
                    for pj in p.iter_mut() {
                        *pj = (*pj - max).exp();
                        sum += *pj;
                    }
                    let inv = 1.0 / sum;
                    p.iter_mut().for_each(|pj| *pj *= inv);
                    if want_probs {
                        probs[((r * self.heads + h) * n + i) * n..][..n].copy_from_slice(&p);
                    }
                    let oi = &mut out[base + i * c + off..][..dh];
                    for (j, &pj) in p.iter().enumerate() {
                        let vj = &v[base + j * c + off..][..dh];
                        for (o, &vv) in oi.iter_mut().zip(vj) {
                            *o += pj * vv;
                        }
                    }
                }
            }
        }
        (probs, out)
    }

    fn forward_chunk(&self, x: &[f32], n: usize) -> Vec<f32> {
        let z = self.add_pos_emb(x, n);
        let z1 = self.norm1.forward(&z);
        let (_, attended) = self.attend(&z1, n, false);
        let mut z2 = self.to_out.forward(&attended);
        for (a, b) in z2.iter_mut().zip(&z) {
            *a += b;
        }
        let z3 = self.norm2.forward(&z2);
        let mut hidden = self.mlp_in.forward(&z3);
        silu_in_place(&mut hidden);
        let mut y = self.mlp_out.forward(&hidden);
        for (a, b) in y.iter_mut().zip(&z2) {
            *a += b;
        }
        y
    }

    /// `x` is `rows × n × width`; returns the same shape.
    pub fn forward(&self, x: &[f32], rows: usize, n: usize) -> Result<Vec<f32>, EncoderError> {
        self.check(x, rows, n)?;
        let chunk = ROW_CHUNK * n * self.width;
        if chunk == 0 {
            return Ok(Vec::new());
        }
        let parts: Vec<Vec<f32>> = x
            .par_chunks(chunk)
            .map(|xs| self.forward_chunk(xs, n))
            .collect();
        Ok(parts.concat())
    }

    /// Attention weights `rows × heads × n × n` for input `x`.
    pub fn attention_probabilities(
        &self,
        x: &[f32],
        rows: usize,
        n: usize,
    ) -> Result<Vec<f32>, EncoderError> {
        self.check(x, rows, n)?;
        let z = self.add_pos_emb(x, n);
        let z1 = self.norm1.forward(&z);
        Ok(self.attend(&z1, n, true).0)
    }
}
