//! Forward-only tensor kernels used by the camera encoder.
//!
//! Activations are stored frame-major: `frames × channels × height × width`
//! for convolutions and `tokens × channels` for linear layers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EncoderError;

pub const LAYER_NORM_EPS: f32 = 1e-5;

fn sgemm_nn(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: bounds asserted above; row-major contiguous operands.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C[m×n] = A[m×k] · Bᵀ` where `B` is stored `n×k`.
fn sgemm_nt(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: bounds asserted above; B is read through transposed strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Uniform `[-bound, bound)` with `bound = 1/√fan_in`.
pub(crate) fn init_uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f32> {
    let bound = 1.0 / (fan_in as f32).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

pub(crate) fn init_bias(rng: &mut ChaCha8Rng, len: usize, fan_in: usize, zero: bool) -> Vec<f32> {
    if zero {
        vec![0.0; len]
    } else {
        init_uniform(rng, len, fan_in)
    }
}

#[inline]
pub fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

pub fn silu_in_place(xs: &mut [f32]) {
    xs.iter_mut().for_each(|x| *x = silu(*x));
}

/// Fully connected layer applied per token. `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn identity(features: usize) -> Self {
        let mut weight = vec![0.0; features * features];
        for i in 0..features {
            weight[i * features + i] = 1.0;
        }
        Self {
            in_features: features,
            out_features: features,
            weight,
            bias: vec![0.0; features],
        }
    }

    pub(crate) fn random(rng: &mut ChaCha8Rng, in_f: usize, out_f: usize, zero_bias: bool) -> Self {
        Self {
            in_features: in_f,
            out_features: out_f,
            weight: init_uniform(rng, in_f * out_f, in_f),
            bias: init_bias(rng, out_f, in_f, zero_bias),
        }
    }

    pub fn zero_out(&mut self) {
        self.weight.fill(0.0);
        self.bias.fill(0.0);
    }

    /// `x` is `tokens × in_features`; returns `tokens × out_features`.
    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let tokens = x.len() / self.in_features;
        debug_assert_eq!(tokens * self.in_features, x.len());
        let mut y = vec![0.0; tokens * self.out_features];
        if tokens == 0 {
            return y;
        }
        sgemm_nt(
            tokens,
            self.in_features,
            self.out_features,
            x,
            &self.weight,
            &mut y,
        );
        for row in y.chunks_exact_mut(self.out_features) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        y
    }
}

/// Per-token normalization over the channel axis with affine parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let width = self.gamma.len();
        let mut out = vec![0.0; x.len()];
        for (src, dst) in x.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
            let mean = src.iter().map(|&v| v as f64).sum::<f64>() / width as f64;
            let var = src
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / width as f64;
            let inv = 1.0 / (var + self.eps as f64).sqrt();
            for (i, (d, &s)) in dst.iter_mut().zip(src).enumerate() {
                let norm = ((s as f64 - mean) * inv) as f32;
                *d = norm * self.gamma[i] + self.beta[i];
            }
        }
        out
    }
}

/// 2-D convolution with square kernel, zero padding and stride.
/// `weight` is `out × (in · k · k)`, ordered `(in, ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub(crate) fn random(
        rng: &mut ChaCha8Rng,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        zero_bias: bool,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        Self {
            in_channels: in_ch,
            out_channels: out_ch,
            kernel,
            stride,
            padding: kernel / 2,
            weight: init_uniform(rng, out_ch * fan_in, fan_in),
            bias: init_bias(rng, out_ch, fan_in, zero_bias),
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let f = |x: usize| (x + 2 * self.padding - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }

    /// One frame: `x` is `in × h × w`, `out` is `out × ho × wo`.
    fn forward_frame(&self, x: &[f32], h: usize, w: usize, out: &mut [f32]) {
        let (ho, wo) = self.output_size(h, w);
        let k = self.kernel;
        let cols = ho * wo;
        let depth = self.in_channels * k * k;
        if k == 1 && self.stride == 1 && self.padding == 0 {
            sgemm_nn(self.out_channels, depth, cols, &self.weight, x, out);
        } else {
            let mut col = vec![0.0f32; depth * cols];
            for ci in 0..self.in_channels {
                let plane = &x[ci * h * w..(ci + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let row = &mut col[((ci * k + ky) * k + kx) * cols..][..cols];
                        for oy in 0..ho {
                            let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src = &plane[iy as usize * w..][..w];
                            let dst = &mut row[oy * wo..][..wo];
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                                if ix >= 0 && ix < w as isize {
                                    *d = src[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
            sgemm_nn(self.out_channels, depth, cols, &self.weight, &col, out);
        }
        for (plane, b) in out.chunks_exact_mut(cols).zip(&self.bias) {
            plane.iter_mut().for_each(|v| *v += b);
        }
    }

    /// `x` is `frames × in × h × w`. Returns the output and its spatial size.
    pub fn forward(
        &self,
        x: &[f32],
        frames: usize,
        h: usize,
        w: usize,
    ) -> (Vec<f32>, usize, usize) {
        use rayon::prelude::*;
        let (ho, wo) = self.output_size(h, w);
        let in_len = self.in_channels * h * w;
        let out_len = self.out_channels * ho * wo;
        assert_eq!(x.len(), frames * in_len, "conv input size");
        let mut out = vec![0.0; frames * out_len];
        if out_len > 0 {
            out.par_chunks_mut(out_len)
                .zip(x.par_chunks(in_len.max(1)))
                .for_each(|(o, xi)| self.forward_frame(xi, h, w, o));
        }
        (out, ho, wo)
    }
}

/// Space-to-channel rearrangement over the last two axes of a 5-D tensor
/// `b × n × c × h × w`, giving `b × n × (c·r²) × (h/r) × (w/r)`. Output
/// channel `ci·r² + dy·r + dx` holds input pixel `(y·r + dy, x·r + dx)` of
/// channel `ci`.
pub fn pixel_unshuffle(x: &crate::Tensor, r: usize) -> Result<crate::Tensor, EncoderError> {
    let [b, n, c, h, w] = dims5(x)?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(EncoderError::IndivisibleDims {
            height: h,
            width: w,
            factor: r,
        });
    }
    let (ho, wo) = (h / r, w / r);
    let co = c * r * r;
    let src = x.data();
    let mut out = vec![0.0f32; src.len()];
    for f in 0..b * n {
        let xin = &src[f * c * h * w..][..c * h * w];
        let xout = &mut out[f * co * ho * wo..][..co * ho * wo];
        for ci in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let oc = ci * r * r + dy * r + dx;
                    for y in 0..ho {
                        for xx in 0..wo {
                            xout[(oc * ho + y) * wo + xx] =
                                xin[(ci * h + y * r + dy) * w + xx * r + dx];
                        }
                    }
                }
            }
        }
    }
    Ok(crate::Tensor::new(vec![b, n, co, ho, wo], out).expect("size preserved"))
}

/// Inverse of [`pixel_unshuffle`].
pub fn pixel_shuffle(x: &crate::Tensor, r: usize) -> Result<crate::Tensor, EncoderError> {
    let [b, n, co, ho, wo] = dims5(x)?;
    if r == 0 || co % (r * r) != 0 {
        return Err(EncoderError::ShapeMismatch(format!(
            "{co} channels not divisible by {r}²"
        )));
    }
    let c = co / (r * r);
    let (h, w) = (ho * r, wo * r);
    let src = x.data();
    let mut out = vec![0.0f32; src.len()];
    for f in 0..b * n {
        let xin = &src[f * co * ho * wo..][..co * ho * wo];
        let xout = &mut out[f * c * h * w..][..c * h * w];
        for ci in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let oc = ci * r * r + dy * r + dx;
                    for y in 0..ho {
                        for xx in 0..wo {
                            xout[(ci * h + y * r + dy) * w + xx * r + dx] =
                                xin[(oc * ho + y) * wo + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(crate::Tensor::new(vec![b, n, c, h, w], out).expect("size preserved"))
}

pub(crate) fn dims5(x: &crate::Tensor) -> Result<[usize; 5], EncoderError> {
    x.shape().try_into().map_err(|_| {
        EncoderError::ShapeMismatch(format!("expected a 5-D tensor, got shape {:?}", x.shape()))
    })
}

/// Fixed sinusoidal embedding, `positions × width`:
/// `pe[t, 2i] = sin(t / 10000^(2i/width))`, `pe[t, 2i+1] = cos(…)`.
pub fn sinusoidal_embedding(positions: usize, width: usize) -> Vec<f32> {
    let mut pe = vec![0.0f32; positions * width];
    for t in 0..positions {
        for j in 0..width {
            let pair = (j / 2) * 2;
            let freq = 10000f64.powf(-(pair as f64) / width as f64);
            let angle = t as f64 * freq;
            pe[t * width + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() } as f32;
        }
    }
    pe
}
