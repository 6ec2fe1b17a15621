//! Forward-only camera encoder.
//!
//! Plücker sequences are pixel-unshuffled, projected by a 3×3 convolution and
//! passed through four scales of residual convolutions, each followed by
//! temporal self-attention over the frame axis. Weights are pseudo-random
//! from [`EncoderConfig::seed`] (ChaCha8, uniform in `±1/√fan_in`, drawn in
//! construction order); nothing here is trained.

mod attention;
mod ops;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plucker::{PluckerSequence, CHANNELS};
use crate::tensor::Tensor;

pub use attention::TemporalAttention;
pub use ops::{
    pixel_shuffle, pixel_unshuffle, silu, sinusoidal_embedding, Conv2d, LayerNorm, Linear,
    LAYER_NORM_EPS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncoderError {
    #[error("spatial size {height}×{width} is not divisible by {factor}")]
    IndivisibleDims {
        height: usize,
        width: usize,
        factor: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
}

/// Total spatial reduction from input pixels to the coarsest scale.
const DOWNSAMPLE_FACTOR: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub unshuffle_factor: usize,
    pub in_channels: usize,
    pub scale_channels: [usize; 4],
    pub heads: usize,
    pub mlp_ratio: usize,
    pub seed: u64,
    pub pos_emb: bool,
    pub zero_biases: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            unshuffle_factor: 8,
            in_channels: CHANNELS,
            scale_channels: [320, 640, 1280, 1280],
            heads: 8,
            mlp_ratio: 4,
            seed: 0,
            pos_emb: true,
            zero_biases: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.unshuffle_factor == 0 {
            return bad("unshuffle factor must be at least 1".into());
        }
        if self.in_channels == 0 {
            return bad("input channels must be positive".into());
        }
        if self.mlp_ratio == 0 {
            return bad("mlp ratio must be positive".into());
        }
        if self.heads == 0 {
            return bad("head count must be positive".into());
        }
        for &c in &self.scale_channels {
            if c == 0 {
                return bad("scale channels must be positive".into());
            }
            if c % self.heads != 0 {
                return bad(format!("{} heads do not divide width {c}", self.heads));
            }
        }
        Ok(())
    }

    /// Channels after pixel unshuffle.
    pub fn unshuffled_channels(&self) -> usize {
        self.in_channels * self.unshuffle_factor * self.unshuffle_factor
    }

    /// Input height and width must be multiples of this.
    pub fn spatial_multiple(&self) -> usize {
        self.unshuffle_factor * DOWNSAMPLE_FACTOR
    }

    fn check_spatial(&self, h: usize, w: usize) -> Result<(), EncoderError> {
        let m = self.spatial_multiple();
        if h == 0 || w == 0 || !h.is_multiple_of(m) || !w.is_multiple_of(m) {
            return Err(EncoderError::IndivisibleDims {
                height: h,
                width: w,
                factor: m,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub name: &'static str,
    pub shape: [usize; 5],
}

pub const STAGE_NAMES: [&str; 6] = ["unshuffle", "conv", "scale1", "scale2", "scale3", "scale4"];

pub fn shape_schedule(
    cfg: &EncoderConfig,
    b: usize,
    n: usize,
    h: usize,
    w: usize,
) -> Result<Vec<StageShape>, EncoderError> {
    cfg.check_spatial(h, w)?;
    let r = cfg.unshuffle_factor;
    let [c1, c2, c3, c4] = cfg.scale_channels;
    let shapes = [
        [b, n, cfg.unshuffled_channels(), h / r, w / r],
        [b, n, c1, h / r, w / r],
        [b, n, c1, h / r, w / r],
        [b, n, c2, h / (2 * r), w / (2 * r)],
        [b, n, c3, h / (4 * r), w / (4 * r)],
        [b, n, c4, h / (8 * r), w / (8 * r)],
    ];
    Ok(STAGE_NAMES
        .iter()
        .zip(shapes)
        .map(|(&name, shape)| StageShape { name, shape })
        .collect())
}

/// A `b × n × c × h × w` activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    data: Tensor,
}

impl FeatureMap {
    pub fn new(data: Tensor) -> Result<Self, EncoderError> {
        ops::dims5(&data)?;
        Ok(Self { data })
    }

    pub fn shape(&self) -> [usize; 5] {
        self.data
            .shape()
            .try_into()
            .expect("checked at construction")
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleCameraFeatures {
    pub scales: [FeatureMap; 4],
}

impl MultiScaleCameraFeatures {
    pub fn shapes(&self) -> [[usize; 5]; 4] {
        [0, 1, 2, 3].map(|i| self.scales[i].shape())
    }
}

/// Residual block: `conv3×3(stride) → SiLU → conv3×3`, plus a skip that is the
/// identity unless the block changes channels or resolution, in which case it
/// is a strided 1×1 convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ResnetBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub skip: Option<Conv2d>,
}

impl ResnetBlock {
    fn random(
        rng: &mut ChaCha8Rng,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        zero_bias: bool,
    ) -> Self {
        let conv1 = Conv2d::random(rng, in_ch, out_ch, 3, stride, zero_bias);
        let conv2 = Conv2d::random(rng, out_ch, out_ch, 3, 1, zero_bias);
        let skip = (in_ch != out_ch || stride != 1)
            .then(|| Conv2d::random(rng, in_ch, out_ch, 1, stride, zero_bias));
        Self { conv1, conv2, skip }
    }

    pub fn forward(
        &self,
        x: &[f32],
        frames: usize,
        h: usize,
        w: usize,
    ) -> (Vec<f32>, usize, usize) {
        let (mut a, ho, wo) = self.conv1.forward(x, frames, h, w);
        a.iter_mut().for_each(|v| *v = silu(*v));
        let (mut out, _, _) = self.conv2.forward(&a, frames, ho, wo);
        match &self.skip {
            Some(skip) => {
                let (s, _, _) = skip.forward(x, frames, h, w);
                out.iter_mut().zip(&s).for_each(|(o, s)| *o += s);
            }
            None => out.iter_mut().zip(x).for_each(|(o, s)| *o += s),
        }
        (out, ho, wo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderScale {
    pub down: Option<(ResnetBlock, TemporalAttention)>,
    pub block: ResnetBlock,
    pub attention: TemporalAttention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraEncoder {
    config: EncoderConfig,
    pub conv_in: Conv2d,
    pub scales: Vec<EncoderScale>,
}

impl CameraEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let zb = config.zero_biases;
        let attn = |rng: &mut ChaCha8Rng, c| {
            TemporalAttention::random(rng, c, config.heads, config.mlp_ratio, config.pos_emb, zb)
        };
        let c = config.scale_channels;
        let conv_in = Conv2d::random(&mut rng, config.unshuffled_channels(), c[0], 3, 1, zb);
        let mut scales = Vec::with_capacity(4);
        let mut prev = c[0];
        for (i, &ch) in c.iter().enumerate() {
            let down = (i > 0).then(|| {
                let block = ResnetBlock::random(&mut rng, prev, ch, 2, zb);
                (block, attn(&mut rng, ch))
            });
            let block = ResnetBlock::random(&mut rng, ch, ch, 1, zb);
            let attention = attn(&mut rng, ch);
            scales.push(EncoderScale {
                down,
                block,
                attention,
            });
            prev = ch;
        }
        Ok(Self {
            config,
            conv_in,
            scales,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        fn conv(c: &Conv2d) -> usize {
            c.weight.len() + c.bias.len()
        }
        fn lin(l: &Linear) -> usize {
            l.weight.len() + l.bias.len()
        }
        fn block(b: &ResnetBlock) -> usize {
            conv(&b.conv1) + conv(&b.conv2) + b.skip.as_ref().map_or(0, conv)
        }
        fn attn(a: &TemporalAttention) -> usize {
            [&a.to_q, &a.to_k, &a.to_v, &a.to_out, &a.mlp_in, &a.mlp_out]
                .into_iter()
                .map(lin)
                .sum::<usize>()
                + 4 * a.width
        }
        conv(&self.conv_in)
            + self
                .scales
                .iter()
                .map(|s| {
                    s.down.as_ref().map_or(0, |(b, a)| block(b) + attn(a))
                        + block(&s.block)
                        + attn(&s.attention)
                })
                .sum::<usize>()
    }

    /// Runs the encoder on a `b × n × c × h × w` tensor, or `n × c × h × w`
    /// treated as a batch of one.
    pub fn forward(&self, input: &Tensor) -> Result<MultiScaleCameraFeatures, EncoderError> {
        let input = match input.ndim() {
            4 => {
                let mut shape = vec![1];
                shape.extend_from_slice(input.shape());
                input.clone().reshape(shape).expect("same length")
            }
            5 => input.clone(),
            _ => {
                return Err(EncoderError::ShapeMismatch(format!(
                    "expected a 4-D or 5-D tensor, got shape {:?}",
                    input.shape()
                )))
            }
        };
        let [b, n, c, h, w] = ops::dims5(&input)?;
        if c != self.config.in_channels {
            return Err(EncoderError::ShapeMismatch(format!(
                "expected {} input channels, got {c}",
                self.config.in_channels
            )));
        }
        self.config.check_spatial(h, w)?;

        let frames = b * n;
        let unshuffled = pixel_unshuffle(&input, self.config.unshuffle_factor)?;
        let [_, _, _, mut fh, mut fw] = ops::dims5(&unshuffled)?;
        let (mut x, _, _) = self.conv_in.forward(unshuffled.data(), frames, fh, fw);

        let mut outputs = Vec::with_capacity(4);
        for scale in &self.scales {
            let stages = scale
                .down
                .iter()
                .map(|(b, a)| (b, a))
                .chain(std::iter::once((&scale.block, &scale.attention)));
            for (block, attention) in stages {
                let (y, ho, wo) = block.forward(&x, frames, fh, fw);
                fh = ho;
                fw = wo;
                let ch = block.conv2.out_channels;
                let tokens = to_temporal(&y, b, n, ch, fh * fw);
                let attended = attention.forward(&tokens, b * fh * fw, n)?;
                x = from_temporal(&attended, b, n, ch, fh * fw);
            }
            let ch = scale.block.conv2.out_channels;
            let t = Tensor::new(vec![b, n, ch, fh, fw], x.clone()).expect("shape matches data");
            outputs.push(FeatureMap { data: t });
        }
        let scales: [FeatureMap; 4] = outputs.try_into().expect("four scales");
        Ok(MultiScaleCameraFeatures { scales })
    }
}

/// `b × n × c × hw` → `(b · hw) × n × c`.
fn to_temporal(x: &[f32], b: usize, n: usize, c: usize, hw: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        for t in 0..n {
            for ci in 0..c {
                let src = &x[((bi * n + t) * c + ci) * hw..][..hw];
                for (p, &v) in src.iter().enumerate() {
                    out[((bi * hw + p) * n + t) * c + ci] = v;
                }
            }
        }
    }
    out
}

/// Inverse of [`to_temporal`].
fn from_temporal(x: &[f32], b: usize, n: usize, c: usize, hw: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        for t in 0..n {
            for ci in 0..c {
                let dst = &mut out[((bi * n + t) * c + ci) * hw..][..hw];
                for (p, d) in dst.iter_mut().enumerate() {
                    *d = x[((bi * hw + p) * n + t) * c + ci];
                }
            }
        }
    }
    out
}

/// Encodes one Plücker sequence (batch of one) with freshly seeded weights.
pub fn encoder_forward(
    p: &PluckerSequence,
    cfg: &EncoderConfig,
) -> Result<MultiScaleCameraFeatures, EncoderError> {
    CameraEncoder::new(cfg.clone())?.forward(p.tensor())
}

/// `Linear(z + c)` at every position, over the channel axis.
pub fn fuse(z: &FeatureMap, c: &FeatureMap, linear: &Linear) -> Result<FeatureMap, EncoderError> {
    if z.shape() != c.shape() {
        return Err(EncoderError::ShapeMismatch(format!(
            "latent {:?} vs camera {:?}",
            z.shape(),
            c.shape()
        )));
    }
    let [b, n, ch, h, w] = z.shape();
    if linear.in_features != ch || linear.out_features != ch {
        return Err(EncoderError::ShapeMismatch(format!(
            "linear maps {}→{}, features have {ch} channels",
            linear.in_features, linear.out_features
        )));
    }
    let sum: Vec<f32> = z
        .data
        .data()
        .iter()
        .zip(c.data.data())
        .map(|(a, b)| a + b)
        .collect();
    let tokens = to_temporal(&sum, b * n, 1, ch, h * w);
    let mixed = linear.forward(&tokens);
    let out = from_temporal(&mixed, b * n, 1, ch, h * w);
    Ok(FeatureMap {
        data: Tensor::new(vec![b, n, ch, h, w], out).expect("shape preserved"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> EncoderConfig {
        EncoderConfig {
            unshuffle_factor: 2,
            scale_channels: [8, 8, 16, 16],
            heads: 2,
            mlp_ratio: 2,
            seed,
            ..EncoderConfig::default()
        }
    }

    fn input(b: usize, n: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(vec![b, n, 6, h, w], |i| ((i as f32) * 0.618).sin())
    }

    #[test]
    fn default_channels() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.unshuffled_channels(), 384);
        assert_eq!(cfg.spatial_multiple(), 64);
        cfg.validate().unwrap();
    }

    #[test]
    fn schedule_for_reference_resolution() {
        let s = shape_schedule(&EncoderConfig::default(), 2, 16, 256, 384).unwrap();
        let shapes: Vec<_> = s.iter().map(|s| s.shape).collect();
        assert_eq!(
            shapes,
            vec![
                [2, 16, 384, 32, 48],
                [2, 16, 320, 32, 48],
                [2, 16, 320, 32, 48],
                [2, 16, 640, 16, 24],
                [2, 16, 1280, 8, 12],
                [2, 16, 1280, 4, 6],
            ]
        );
        assert!(matches!(
            shape_schedule(&EncoderConfig::default(), 1, 1, 100, 128),
            Err(EncoderError::IndivisibleDims { .. })
        ));
    }

    #[test]
    fn invalid_configs() {
        let cfg = EncoderConfig {
            heads: 7,
            ..EncoderConfig::default()
        };
        assert!(CameraEncoder::new(cfg).is_err());
        let cfg = EncoderConfig {
            unshuffle_factor: 0,
            ..EncoderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn forward_shapes_follow_schedule() {
        let cfg = tiny(1);
        let enc = CameraEncoder::new(cfg.clone()).unwrap();
        let out = enc.forward(&input(2, 3, 32, 48)).unwrap();
        let sched = shape_schedule(&cfg, 2, 3, 32, 48).unwrap();
        for i in 0..4 {
            assert_eq!(out.scales[i].shape(), sched[i + 2].shape);
            assert!(out.scales[i].is_finite());
        }
    }

    #[test]
    fn four_dimensional_input_is_batch_of_one() {
        let enc = CameraEncoder::new(tiny(2)).unwrap();
        let x5 = input(1, 2, 16, 16);
        let x4 = x5.clone().reshape(vec![2, 6, 16, 16]).unwrap();
        let a = enc.forward(&x5).unwrap();
        let b = enc.forward(&x4).unwrap();
        assert!(a.scales[3].tensor().bit_eq(b.scales[3].tensor()));
        assert!(matches!(
            enc.forward(&Tensor::zeros(vec![1, 1, 5, 16, 16])),
            Err(EncoderError::ShapeMismatch(_))
        ));
        assert!(matches!(
            enc.forward(&Tensor::zeros(vec![1, 1, 6, 16, 24])),
            Err(EncoderError::IndivisibleDims { .. })
        ));
    }

    #[test]
    fn seed_changes_weights() {
        let a = CameraEncoder::new(tiny(1)).unwrap();
        let b = CameraEncoder::new(tiny(2)).unwrap();
        assert_ne!(a.conv_in.weight, b.conv_in.weight);
        assert_eq!(a, CameraEncoder::new(tiny(1)).unwrap());
    }

    #[test]
    fn downsample_skip_is_projected() {
        let enc = CameraEncoder::new(tiny(0)).unwrap();
        assert!(enc.scales[0].down.is_none());
        assert!(enc.scales[0].block.skip.is_none());
        for s in &enc.scales[1..] {
            let (block, _) = s.down.as_ref().unwrap();
            let skip = block.skip.as_ref().unwrap();
            assert_eq!((skip.kernel, skip.stride), (1, 2));
        }
    }

    #[test]
    fn temporal_layout_round_trip() {
        let x: Vec<f32> = (0..2 * 3 * 4 * 5).map(|i| i as f32).collect();
        let t = to_temporal(&x, 2, 3, 4, 5);
        // batch 1, position 2, frame 1, channel 3
        assert_eq!(t[((5 + 2) * 3 + 1) * 4 + 3], x[((3 + 1) * 4 + 3) * 5 + 2]);
        assert_eq!(from_temporal(&t, 2, 3, 4, 5), x);
    }

    #[test]
    fn fuse_rejects_mismatch() {
        let a = FeatureMap::new(Tensor::zeros(vec![1, 1, 2, 2, 2])).unwrap();
        let b = FeatureMap::new(Tensor::zeros(vec![1, 1, 2, 2, 1])).unwrap();
        assert!(fuse(&a, &b, &Linear::identity(2)).is_err());
        assert!(fuse(&a, &a, &Linear::identity(3)).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let x = input(2, 3, 16, 32);
        let a = CameraEncoder::new(tiny(9)).unwrap().forward(&x).unwrap();
        let b = CameraEncoder::new(tiny(9))
            .unwrap()
            .forward(&x.clone())
            .unwrap();
        for (sa, sb) in a.scales.iter().zip(&b.scales) {
            assert!(sa.tensor().bit_eq(sb.tensor()));
        }
    }

    #[test]
    fn zero_input_propagates_zero() {
        // No biases, no positional term: each conv maps 0 to 0, SiLU(0) = 0,
        // LayerNorm of a zero token is 0 / √eps = 0 and every residual adds 0.
        let cfg = EncoderConfig {
            zero_biases: true,
            pos_emb: false,
            ..tiny(4)
        };
        let out = CameraEncoder::new(cfg)
            .unwrap()
            .forward(&Tensor::zeros(vec![1, 2, 6, 16, 16]))
            .unwrap();
        for s in &out.scales {
            assert!(s.tensor().data().iter().all(|&v| v == 0.0));
        }
    }

    fn feature(seed: u32, shape: [usize; 5]) -> FeatureMap {
        let t = Tensor::from_fn(shape.to_vec(), |i| {
            ((i as f32 + seed as f32 * 0.37) * 1.3).cos()
        });
        FeatureMap::new(t).unwrap()
    }

    #[test]
    fn fuse_identity_cases() {
        let shape = [1, 2, 3, 2, 2];
        let z = feature(1, shape);
        let zero = FeatureMap::new(Tensor::zeros(shape.to_vec())).unwrap();
        let id = Linear::identity(3);
        assert!(fuse(&z, &zero, &id).unwrap().tensor().bit_eq(z.tensor()));
        assert!(fuse(&zero, &z, &id).unwrap().tensor().bit_eq(z.tensor()));
    }

    #[test]
    fn fuse_matches_per_position_matmul() {
        let shape = [2, 3, 4, 3, 5];
        let (z, c) = (feature(1, shape), feature(2, shape));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let lin = Linear::random(&mut rng, 4, 4, false);
        let out = fuse(&z, &c, &lin).unwrap();
        let [b, n, ch, h, w] = shape;
        for f in 0..b * n {
            for y in 0..h {
                for x in 0..w {
                    let at = |t: &Tensor, k: usize| t.data()[((f * ch + k) * h + y) * w + x] as f64;
                    for o in 0..ch {
                        let mut acc = lin.bias[o] as f64;
                        for i in 0..ch {
                            acc += lin.weight[o * ch + i] as f64
                                * (at(z.tensor(), i) + at(c.tensor(), i));
                        }
                        assert!((at(out.tensor(), o) - acc).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
