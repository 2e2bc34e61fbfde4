//! Convolutional autoencoder shared by the front and side views.
//!
//! Encoder: five blocks of 3×3 conv → batch norm → leaky ReLU → 2×2 max pool,
//! then a dense projection of the flattened features to the latent vector.
//! Decoder: dense back to the pooled feature map, five blocks of ×2 nearest
//! upsampling → 3×3 conv → batch norm → ReLU, and a final 1×1 conv whose
//! sigmoid gives per-pixel foreground probabilities. The network itself
//! produces logits; the sigmoid is applied by [`Autoencoder::decode`] and
//! fused into the loss gradient during training.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{upsample, upsample_backward, BatchNorm, Conv2d, Linear, MaxPool, Rectifier};
use super::tensor::{Real, Tensor};
use super::{EmbeddingVector, LATENT_DIM};
use crate::error::{Error, IoContext, Result};
use crate::silhouette::{Silhouette, SilhouettePair};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"S2SAE01\0";
/// Number of conv blocks on each side; the input must be divisible by 2^DEPTH.
pub const DEPTH: usize = 5;
pub const BCE_EPS: f64 = 1e-7;
const ENCODER_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AeConfig {
    pub width: usize,
    pub height: usize,
    /// Filters per conv layer.
    pub channels: usize,
    pub latent_dim: usize,
}

impl AeConfig {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: 32,
            latent_dim: LATENT_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = 1 << DEPTH;
        if self.width == 0 || self.height == 0 || self.width % unit != 0 || self.height % unit != 0 {
            return Err(Error::InvalidArgument(format!(
                "autoencoder resolution {}x{} must be a positive multiple of {unit}",
                self.width, self.height
            )));
        }
        if self.channels == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidArgument("channels and latent_dim must be positive".into()));
        }
        Ok(())
    }

    fn bottleneck(&self) -> [usize; 3] {
        [self.channels, self.height >> DEPTH, self.width >> DEPTH]
    }

    fn pixels(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Norm(BatchNorm<T>),
    Act(Rectifier),
    Pool(MaxPool),
    Upsample,
    Dense(Linear<T>),
    /// Per-item reshape between two fixed shapes.
    Reshape { from: [usize; 3], to: [usize; 3] },
}

impl<T: Real> Layer<T> {
    fn forward_eval(&self, x: Tensor<T>) -> Tensor<T> {
        match self {
            Layer::Conv(c) => c.forward_eval(&x),
            Layer::Norm(b) => b.forward_eval(x),
            Layer::Act(a) => a.forward_eval(x),
            Layer::Pool(p) => p.forward_eval(&x),
            Layer::Upsample => upsample(&x),
            Layer::Dense(l) => l.forward_eval(&x),
            Layer::Reshape { to, .. } => {
                let n = x.batch();
                x.reshaped([n, to[0], to[1], to[2]])
            }
        }
    }

    fn forward_train(&mut self, x: Tensor<T>) -> Tensor<T> {
        match self {
            Layer::Conv(c) => c.forward_train(x),
            Layer::Norm(b) => b.forward_train(x),
            Layer::Act(a) => a.forward_train(x),
            Layer::Pool(p) => p.forward_train(&x),
            Layer::Dense(l) => l.forward_train(x),
            other => other.forward_eval(x),
        }
    }

    fn backward(&mut self, dy: Tensor<T>) -> Tensor<T> {
        match self {
            Layer::Conv(c) => c.backward(dy),
            Layer::Norm(b) => b.backward(dy),
            Layer::Act(a) => a.backward(dy),
            Layer::Pool(p) => p.backward(dy),
            Layer::Upsample => upsample_backward(&dy),
            Layer::Dense(l) => l.backward(dy),
            Layer::Reshape { from, .. } => {
                let n = dy.batch();
                dy.reshaped([n, from[0], from[1], from[2]])
            }
        }
    }

    /// Trainable tensors with their gradient buffers.
    fn params_mut(&mut self) -> Vec<(&mut Vec<T>, &mut Vec<T>)> {
        match self {
            Layer::Conv(c) => {
                let mut v = vec![(&mut c.weight, &mut c.grad_weight)];
                if let (Some(b), Some(g)) = (c.bias.as_mut(), c.grad_bias.as_mut()) {
                    v.push((b, g));
                }
                v
            }
            Layer::Norm(b) => vec![(&mut b.gamma, &mut b.grad_gamma), (&mut b.beta, &mut b.grad_beta)],
            Layer::Dense(l) => vec![(&mut l.weight, &mut l.grad_weight), (&mut l.bias, &mut l.grad_bias)],
            _ => Vec::new(),
        }
    }

    /// Every stored tensor (trainable and running statistics) in checkpoint order.
    fn state_mut(&mut self) -> Vec<&mut Vec<T>> {
        match self {
            Layer::Conv(c) => {
                let mut v = vec![&mut c.weight];
                if let Some(b) = c.bias.as_mut() {
                    v.push(b);
                }
                v
            }
            Layer::Norm(b) => vec![&mut b.gamma, &mut b.beta, &mut b.running_mean, &mut b.running_var],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Autoencoder<T> {
    config: AeConfig,
    encoder: Vec<Layer<T>>,
    decoder: Vec<Layer<T>>,
}

impl<T: Real> Autoencoder<T> {
    /// Freshly initialized network; the seed fixes every initial weight.
    pub fn new(config: AeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let feat = config.bottleneck();
        let feat_len = feat.iter().product();

        let mut encoder = Vec::new();
        let mut in_c = 1;
        for _ in 0..DEPTH {
            encoder.push(Layer::Conv(Conv2d::new(&mut rng, in_c, c, 3, false)));
            encoder.push(Layer::Norm(BatchNorm::new(c)));
            encoder.push(Layer::Act(Rectifier::new(ENCODER_SLOPE)));
            encoder.push(Layer::Pool(MaxPool::default()));
            in_c = c;
        }
        encoder.push(Layer::Reshape {
            from: feat,
            to: [feat_len, 1, 1],
        });
        encoder.push(Layer::Dense(Linear::new(&mut rng, feat_len, config.latent_dim)));

        let mut decoder = vec![
            Layer::Dense(Linear::new(&mut rng, config.latent_dim, feat_len)),
            Layer::Reshape {
                from: [feat_len, 1, 1],
                to: feat,
            },
        ];
        for _ in 0..DEPTH {
            decoder.push(Layer::Upsample);
            decoder.push(Layer::Conv(Conv2d::new(&mut rng, c, c, 3, false)));
            decoder.push(Layer::Norm(BatchNorm::new(c)));
            decoder.push(Layer::Act(Rectifier::new(0.0)));
        }
        decoder.push(Layer::Conv(Conv2d::new(&mut rng, c, 1, 1, true)));

        Ok(Self { config, encoder, decoder })
    }

    pub fn config(&self) -> &AeConfig {
        &self.config
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer<T>> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    /// Stacks silhouettes into a `(n, 1, h, w)` tensor of 0/1 values.
    pub fn input_tensor(&self, images: &[&Silhouette]) -> Result<Tensor<T>> {
        let expected = (self.config.width, self.config.height);
        let mut data = Vec::with_capacity(images.len() * self.config.pixels());
        for img in images {
            if img.dims() != expected {
                return Err(Error::Resolution {
                    expected,
                    got: img.dims(),
                });
            }
            data.extend(img.pixels().iter().map(|&p| if p == 0 { T::zero() } else { T::one() }));
        }
        Ok(Tensor::from_vec([images.len(), 1, self.config.height, self.config.width], data))
    }

    fn run_eval(layers: &[Layer<T>], mut x: Tensor<T>) -> Tensor<T> {
        for l in layers {
            x = l.forward_eval(x);
        }
        x
    }

    /// Inference-mode encoding of several images; each result depends only on
    /// its own image.
    pub fn encode_batch(&self, images: &[&Silhouette]) -> Result<Vec<EmbeddingVector>> {
        let z = Self::run_eval(&self.encoder, self.input_tensor(images)?);
        (0..z.batch())
            .map(|i| EmbeddingVector::new(z.item(i).iter().map(|v| v.f64()).collect()))
            .collect()
    }

    pub fn encode(&self, image: &Silhouette) -> Result<EmbeddingVector> {
        Ok(self.encode_batch(&[image])?.remove(0))
    }

    /// Foreground probabilities in row-major order.
    pub fn decode(&self, z: &EmbeddingVector) -> Result<Vec<f64>> {
        if z.len() != self.config.latent_dim {
            return Err(Error::Sizing {
                what: "latent vector",
                expected: self.config.latent_dim,
                got: z.len(),
            });
        }
        let x = Tensor::from_vec([1, self.config.latent_dim, 1, 1], z.values().iter().map(|&v| T::lit(v)).collect());
        let logits = Self::run_eval(&self.decoder, x);
        Ok(logits.data.iter().map(|l| sigmoid(l.f64())).collect())
    }

    pub fn reconstruct(&self, image: &Silhouette) -> Result<Vec<f64>> {
        self.decode(&self.encode(image)?)
    }

    /// Inference-mode two-view loss of one subject.
    pub fn pair_loss(&self, pair: &SilhouettePair) -> Result<f64> {
        let front = bce_loss(&self.reconstruct(&pair.front)?, &pair.front)?;
        let side = bce_loss(&self.reconstruct(&pair.side)?, &pair.side)?;
        Ok(front + side)
    }

    /// Training-mode forward pass returning logits; caches activations for
    /// [`Autoencoder::backward`].
    pub fn forward_train(&mut self, mut x: Tensor<T>) -> Tensor<T> {
        for l in self.layers_mut() {
            x = l.forward_train(x);
        }
        x
    }

    /// Accumulates parameter gradients given the gradient wrt the logits.
    pub fn backward(&mut self, mut dy: Tensor<T>) {
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()).rev() {
            dy = l.backward(dy);
        }
    }

    /// Training-mode loss over a batch of pairs; leaves caches ready for
    /// [`Autoencoder::backward_loss`]. Fronts and sides share one batch, so
    /// batch-norm statistics are computed over both views together.
    pub fn batch_loss_train(&mut self, pairs: &[&SilhouettePair]) -> Result<(f64, Tensor<T>, Tensor<T>)> {
        let mut images: Vec<&Silhouette> = pairs.iter().map(|p| &p.front).collect();
        images.extend(pairs.iter().map(|p| &p.side));
        let x = self.input_tensor(&images)?;
        let logits = self.forward_train(x.clone());
        Ok((two_view_loss(&logits, &x, pairs.len()), logits, x))
    }

    /// Backpropagates the two-view loss; the gradient wrt each logit is
    /// `(p − q) / (B·P)` for `B` pairs of `P`-pixel images.
    pub fn backward_loss(&mut self, logits: &Tensor<T>, target: &Tensor<T>, pairs: usize) {
        let norm = (pairs * self.config.pixels()) as f64;
        let grad: Vec<T> = logits
            .data
            .iter()
            .zip(&target.data)
            .map(|(l, q)| T::lit((sigmoid(l.f64()) - q.f64()) / norm))
            .collect();
        self.backward(Tensor::from_vec(logits.shape, grad));
    }

    /// Every piecewise-linear branch decision (rectifier signs, pooling
    /// winners) taken by the last training pass. Two passes with equal
    /// signatures lie on the same smooth piece of the loss.
    pub fn branch_signature(&self) -> Vec<u8> {
        let mut sig = Vec::new();
        for l in self.encoder.iter().chain(&self.decoder) {
            match l {
                Layer::Act(a) => sig.extend(a.pattern().iter().map(|&b| b as u8)),
                Layer::Pool(p) => sig.extend_from_slice(p.pattern()),
                _ => {}
            }
        }
        sig
    }

    pub fn zero_grad(&mut self) {
        for l in self.layers_mut() {
            for (_, g) in l.params_mut() {
                g.iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }

    pub fn update_running_stats(&mut self) {
        for l in self.layers_mut() {
            if let Layer::Norm(b) = l {
                b.update_running_stats();
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&mut Vec<T>, &mut Vec<T>)> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn num_params(&mut self) -> usize {
        self.params_mut().iter().map(|(p, _)| p.len()).sum()
    }

    /// All stored tensors flattened in checkpoint order.
    pub fn state_vector(&mut self) -> Vec<f64> {
        self.layers_mut().flat_map(|l| l.state_mut()).flat_map(|t| t.iter().map(|v| v.f64()).collect::<Vec<_>>()).collect()
    }

    /// The final 1×1 output conv.
    pub fn output_layer_mut(&mut self) -> &mut Conv2d<T> {
        match self.decoder.last_mut() {
            Some(Layer::Conv(c)) => c,
            _ => unreachable!("decoder always ends in a conv"),
        }
    }

    /// Writes the checkpoint: magic, `u32` width, height, layer count,
    /// channels, latent size, then each tensor as a `u32` length followed by
    /// little-endian `f32` values.
    pub fn save(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = CHECKPOINT_MAGIC.to_vec();
        let layer_count = self.encoder.len() + self.decoder.len();
        let header = [self.config.width, self.config.height, layer_count, self.config.channels, self.config.latent_dim];
        for v in header {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for t in self.layers_mut().flat_map(|l| l.state_mut()) {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            for &v in t.iter() {
                v.to_le(&mut out);
            }
        }
        fs::write(path, out).at(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).at(path)?;
        let bad = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: msg.to_string(),
        };
        if bytes.get(..8) != Some(&CHECKPOINT_MAGIC[..]) {
            return Err(bad("not an autoencoder checkpoint"));
        }
        let mut cur = Cursor { bytes: &bytes, pos: 8 };
        let mut header = [0usize; 5];
        for h in header.iter_mut() {
            *h = cur.u32().ok_or_else(|| bad("truncated checkpoint"))?;
        }
        let [width, height, layers, channels, latent_dim] = header;
        let mut ae = Self::new(
            AeConfig {
                width,
                height,
                channels,
                latent_dim,
            },
            0,
        )?;
        if layers != ae.encoder.len() + ae.decoder.len() {
            return Err(bad("layer count does not match the architecture"));
        }
        for t in ae.layers_mut().flat_map(|l| l.state_mut()) {
            let len = cur.u32().ok_or_else(|| bad("truncated checkpoint"))?;
            if len != t.len() {
                return Err(bad("tensor size does not match the architecture"));
            }
            for dst in t.iter_mut() {
                let v = cur.f32().ok_or_else(|| bad("truncated checkpoint"))?;
                *dst = T::lit(v as f64);
            }
        }
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes after checkpoint"));
        }
        Ok(ae)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take4(&mut self) -> Option<[u8; 4]> {
        let chunk = self.bytes.get(self.pos..self.pos + 4)?;
        self.pos += 4;
        chunk.try_into().ok()
    }

    fn u32(&mut self) -> Option<usize> {
        self.take4().map(|b| u32::from_le_bytes(b) as usize)
    }

    fn f32(&mut self) -> Option<f32> {
        self.take4().map(f32::from_le_bytes)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn bce_term(p: f64, q: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(q * p.ln() + (1.0 - q) * (1.0 - p).ln())
}

/// Mean binary cross-entropy of predicted probabilities against a silhouette.
pub fn bce_loss(pred: &[f64], target: &Silhouette) -> Result<f64> {
    if pred.len() != target.pixels().len() {
        return Err(Error::Sizing {
            what: "prediction pixels",
            expected: target.pixels().len(),
            got: pred.len(),
        });
    }
    let sum: f64 = pred.iter().zip(target.pixels()).map(|(&p, &q)| bce_term(p, q as f64)).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean BCE over the front half of the batch plus mean BCE over the side half.
fn two_view_loss<T: Real>(logits: &Tensor<T>, target: &Tensor<T>, pairs: usize) -> f64 {
    let per_view = (pairs * logits.item_len()) as f64;
    let sum: f64 = logits.data.iter().zip(&target.data).map(|(l, q)| bce_term(sigmoid(l.f64()), q.f64())).sum();
    sum / per_view
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::silhouette::Silhouette;

    fn disk(size: usize, r: f64) -> Silhouette {
        let c = size as f64 / 2.0;
        let px = (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f64 + 0.5 - c, (i / size) as f64 + 0.5 - c);
                u8::from(x * x + y * y <= r * r)
            })
            .collect();
        Silhouette::new(size, size, px).unwrap()
    }

    fn small() -> AeConfig {
        AeConfig {
            channels: 4,
            ..AeConfig::new(32, 32)
        }
    }

    #[test]
    fn bce_closed_forms() {
        let ones = Silhouette::new(2, 2, vec![1; 4]).unwrap();
        let zeros = Silhouette::blank(2, 2);
        assert!((bce_loss(&[0.5; 4], &ones).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((bce_loss(&[0.9; 4], &ones).unwrap() - 0.10536051565782628).abs() < 1e-12);
        let perfect = bce_loss(&[1.0; 4], &ones).unwrap();
        assert!((perfect + (1.0 - BCE_EPS).ln()).abs() < 1e-15 && perfect > 0.0);
        assert!(bce_loss(&[0.0; 4], &zeros).unwrap() >= 0.0);
        assert!(bce_loss(&[0.5; 3], &zeros).is_err());
    }

    #[test]
    fn resolution_must_divide_by_32() {
        assert!(Autoencoder::<f32>::new(AeConfig::new(48, 64), 0).is_err());
        assert!(Autoencoder::<f32>::new(AeConfig::new(64, 64), 0).is_ok());
    }

    #[test]
    fn encode_is_deterministic_and_batch_invariant() {
        let ae = Autoencoder::<f64>::new(small(), 1).unwrap();
        let a = disk(32, 8.0);
        let b = disk(32, 12.0);
        let z1 = ae.encode(&a).unwrap();
        assert_eq!(z1, ae.encode(&a).unwrap());
        assert_eq!(z1.len(), LATENT_DIM);
        let zb = ae.encode_batch(&[&b, &a, &b]).unwrap();
        assert_eq!(zb[1], z1);
        assert!(ae.encode(&disk(64, 8.0)).is_err());
    }

    #[test]
    fn decode_range_and_size() {
        let ae = Autoencoder::<f32>::new(small(), 2).unwrap();
        let z = EmbeddingVector::new((0..LATENT_DIM).map(|i| (i as f64 * 0.37).sin() * 3.0).collect()).unwrap();
        let img = ae.decode(&z).unwrap();
        assert_eq!(img.len(), 32 * 32);
        assert!(img.iter().all(|&p| p > 0.0 && p < 1.0));
        assert_eq!(img, ae.decode(&z).unwrap());
        assert!(ae.decode(&EmbeddingVector::new(vec![0.0; 8]).unwrap()).is_err());
    }

    #[test]
    fn pair_loss_is_symmetric_and_additive() {
        let ae = Autoencoder::<f64>::new(small(), 3).unwrap();
        let a = disk(32, 7.0);
        let b = disk(32, 11.0);
        let same = SilhouettePair::new(a.clone(), a.clone(), "s").unwrap();
        let single = bce_loss(&ae.reconstruct(&a).unwrap(), &a).unwrap();
        assert_eq!(ae.pair_loss(&same).unwrap(), 2.0 * single);
        let ab = SilhouettePair::new(a.clone(), b.clone(), "ab").unwrap();
        let ba = SilhouettePair::new(b, a, "ba").unwrap();
        assert!((ae.pair_loss(&ab).unwrap() - ae.pair_loss(&ba).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.bin");
        let mut ae = Autoencoder::<f32>::new(small(), 4).unwrap();
        ae.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let mut back = Autoencoder::<f32>::load(&path).unwrap();
        assert_eq!(back.config(), ae.config());
        assert_eq!(back.state_vector(), ae.state_vector());
        let img = disk(32, 9.0);
        assert_eq!(back.encode(&img).unwrap(), ae.encode(&img).unwrap());

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(Autoencoder::<f32>::load(&path).is_err());
        fs::write(&path, b"garbage").unwrap();
        assert!(Autoencoder::<f32>::load(&path).is_err());
    }
}
