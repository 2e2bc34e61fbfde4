//! Network layers with hand-written backward passes. Each layer caches what
//! its backward pass needs during a training forward pass; evaluation-mode
//! forward passes take `&self` and cache nothing.

use rand::Rng;

use super::tensor::{Real, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Glorot-uniform draw in ±sqrt(6 / (fan_in + fan_out)).
fn glorot<T: Real, R: Rng>(rng: &mut R, len: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| T::lit(rng.random_range(-limit..limit))).collect()
}

/// Square convolution, stride 1, "same" zero padding, odd kernel size.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `(out, in, ky, kx)`
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
    pub grad_weight: Vec<T>,
    pub grad_bias: Option<Vec<T>>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng>(rng: &mut R, in_channels: usize, out_channels: usize, kernel: usize, with_bias: bool) -> Self {
        let kk = kernel * kernel;
        let len = out_channels * in_channels * kk;
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: glorot(rng, len, in_channels * kk, out_channels * kk),
            bias: with_bias.then(|| vec![T::zero(); out_channels]),
            grad_weight: vec![T::zero(); len],
            grad_bias: with_bias.then(|| vec![T::zero(); out_channels]),
            input: None,
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Unfolds one item `(in, h, w)` into `(in·k·k, h·w)` columns.
    fn im2col(&self, x: &[T], h: usize, w: usize, col: &mut [T]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &x[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((c * k + ky) * k + kx) * hw..][..hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        let out = &mut row[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            out.fill(T::zero());
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        for (x, o) in out.iter_mut().enumerate() {
                            let sx = x as isize + dx;
                            *o = if sx < 0 || sx >= w as isize { T::zero() } else { src[sx as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[T], h: usize, w: usize, dx: &mut [T]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &mut dx[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((c * k + ky) * k + kx) * hw..][..hw];
                    let oy = ky as isize - pad;
                    let ox = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + oy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                        for (x, &g) in row[y * w..(y + 1) * w].iter().enumerate() {
                            let sx = x as isize + ox;
                            if sx >= 0 && sx < w as isize {
                                dst[sx as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Tensor<T> {
        let [n, c, h, w] = x.shape;
        assert_eq!(c, self.in_channels, "conv input channels");
        let hw = h * w;
        let kl = self.patch_len();
        let mut out = Tensor::zeros([n, self.out_channels, h, w]);
        let mut col = if self.kernel == 1 { Vec::new() } else { vec![T::zero(); kl * hw] };
        for i in 0..n {
            let src = x.item(i);
            let cols: &[T] = if self.kernel == 1 {
                src
            } else {
                self.im2col(src, h, w, &mut col);
                &col
            };
            let dst = &mut out.data[i * self.out_channels * hw..(i + 1) * self.out_channels * hw];
            T::gemm_raw(self.out_channels, kl, hw, &self.weight, kl, 1, cols, hw, 1, T::zero(), dst, hw);
            if let Some(b) = &self.bias {
                for (o, &bv) in dst.chunks_mut(hw).zip(b) {
                    o.iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        out
    }

    pub fn forward_train(&mut self, x: Tensor<T>) -> Tensor<T> {
        let out = self.forward_eval(&x);
        self.input = Some(x);
        out
    }

    pub fn backward(&mut self, dy: Tensor<T>) -> Tensor<T> {
        let x = self.input.take().expect("conv backward without forward");
        let [n, _, h, w] = x.shape;
        let hw = h * w;
        let kl = self.patch_len();
        let oc = self.out_channels;
        let mut dx = Tensor::zeros(x.shape);
        let mut col = if self.kernel == 1 { Vec::new() } else { vec![T::zero(); kl * hw] };
        let mut dcol = vec![T::zero(); kl * hw];
        for i in 0..n {
            let g = &dy.data[i * oc * hw..(i + 1) * oc * hw];
            let cols: &[T] = if self.kernel == 1 {
                x.item(i)
            } else {
                self.im2col(x.item(i), h, w, &mut col);
                &col
            };
            // dW += dY · colsᵀ
            T::gemm_raw(oc, hw, kl, g, hw, 1, cols, 1, hw, T::one(), &mut self.grad_weight, kl);
            if let Some(gb) = &mut self.grad_bias {
                for (b, row) in gb.iter_mut().zip(g.chunks(hw)) {
                    *b += row.iter().copied().sum::<T>();
                }
            }
            // dcols = Wᵀ · dY
            let dst = &mut dx.data[i * self.in_channels * hw..(i + 1) * self.in_channels * hw];
            if self.kernel == 1 {
                T::gemm_raw(kl, oc, hw, &self.weight, 1, kl, g, hw, 1, T::zero(), dst, hw);
            } else {
                T::gemm_raw(kl, oc, hw, &self.weight, 1, kl, g, hw, 1, T::zero(), &mut dcol, hw);
                self.col2im(&dcol, h, w, dst);
            }
        }
        dx
    }
}

/// Per-channel batch normalization.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub channels: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub grad_gamma: Vec<T>,
    pub grad_beta: Vec<T>,
    normalized: Option<Tensor<T>>,
    inv_std: Vec<T>,
    /// Batch mean and unbiased variance of the last training pass.
    batch_stats: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            grad_gamma: vec![T::zero(); channels],
            grad_beta: vec![T::zero(); channels],
            normalized: None,
            inv_std: Vec::new(),
            batch_stats: None,
        }
    }

    fn apply(&self, mut x: Tensor<T>, mean: &[T], inv_std: &[T]) -> Tensor<T> {
        let plane = x.plane();
        for (idx, chunk) in x.data.chunks_mut(plane).enumerate() {
            let c = idx % self.channels;
            let (m, s, g, b) = (mean[c], inv_std[c], self.gamma[c], self.beta[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) * s * g + b);
        }
        x
    }

    pub fn forward_eval(&self, x: Tensor<T>) -> Tensor<T> {
        let eps = T::lit(BN_EPS);
        let inv: Vec<T> = self.running_var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        self.apply(x, &self.running_mean.clone(), &inv)
    }

    pub fn forward_train(&mut self, mut x: Tensor<T>) -> Tensor<T> {
        let plane = x.plane();
        let count = (x.batch() * plane) as f64;
        let mut sum = vec![0.0f64; self.channels];
        let mut sq = vec![0.0f64; self.channels];
        for (idx, chunk) in x.data.chunks(plane).enumerate() {
            let c = idx % self.channels;
            sum[c] += chunk.iter().map(|v| v.f64()).sum::<f64>();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        for (idx, chunk) in x.data.chunks(plane).enumerate() {
            let c = idx % self.channels;
            sq[c] += chunk.iter().map(|v| (v.f64() - mean[c]).powi(2)).sum::<f64>();
        }
        let var: Vec<f64> = sq.iter().map(|s| s / count).collect();
        let inv_std: Vec<T> = var.iter().map(|v| T::lit(1.0 / (v + BN_EPS).sqrt())).collect();
        let unbiased = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
        self.batch_stats = Some((
            mean.iter().map(|&m| T::lit(m)).collect(),
            var.iter().map(|&v| T::lit(v * unbiased)).collect(),
        ));

        let mean_t: Vec<T> = mean.iter().map(|&m| T::lit(m)).collect();
        for (idx, chunk) in x.data.chunks_mut(plane).enumerate() {
            let c = idx % self.channels;
            let (m, s) = (mean_t[c], inv_std[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) * s);
        }
        let mut out = x.clone();
        for (idx, chunk) in out.data.chunks_mut(plane).enumerate() {
            let c = idx % self.channels;
            let (g, b) = (self.gamma[c], self.beta[c]);
            chunk.iter_mut().for_each(|v| *v = *v * g + b);
        }
        self.normalized = Some(x);
        self.inv_std = inv_std;
        out
    }

    /// Folds the last training batch's statistics into the running averages.
    pub fn update_running_stats(&mut self) {
        if let Some((mean, var)) = self.batch_stats.take() {
            let mom = T::lit(BN_MOMENTUM);
            let keep = T::one() - mom;
            for c in 0..self.channels {
                self.running_mean[c] = keep * self.running_mean[c] + mom * mean[c];
                self.running_var[c] = keep * self.running_var[c] + mom * var[c];
            }
        }
    }

    pub fn backward(&mut self, mut dy: Tensor<T>) -> Tensor<T> {
        let xhat = self.normalized.take().expect("batchnorm backward without forward");
        let plane = dy.plane();
        let count = (dy.batch() * plane) as f64;
        let mut sum_dy = vec![0.0f64; self.channels];
        let mut sum_dy_xhat = vec![0.0f64; self.channels];
        for (idx, (g, xh)) in dy.data.chunks(plane).zip(xhat.data.chunks(plane)).enumerate() {
            let c = idx % self.channels;
            sum_dy[c] += g.iter().map(|v| v.f64()).sum::<f64>();
            sum_dy_xhat[c] += g.iter().zip(xh).map(|(a, b)| a.f64() * b.f64()).sum::<f64>();
        }
        for c in 0..self.channels {
            self.grad_beta[c] += T::lit(sum_dy[c]);
            self.grad_gamma[c] += T::lit(sum_dy_xhat[c]);
        }
        for (idx, (g, xh)) in dy.data.chunks_mut(plane).zip(xhat.data.chunks(plane)).enumerate() {
            let c = idx % self.channels;
            let scale = self.gamma[c].f64() * self.inv_std[c].f64();
            let (m1, m2) = (sum_dy[c] / count, sum_dy_xhat[c] / count);
            for (v, &x) in g.iter_mut().zip(xh) {
                *v = T::lit(scale * (v.f64() - m1 - x.f64() * m2));
            }
        }
        dy
    }
}

/// Leaky ReLU; a slope of zero gives a plain ReLU.
#[derive(Debug, Clone)]
pub struct Rectifier {
    pub slope: f64,
    positive: Vec<bool>,
}

impl Rectifier {
    pub fn new(slope: f64) -> Self {
        Self {
            slope,
            positive: Vec::new(),
        }
    }

    pub fn forward_eval<T: Real>(&self, mut x: Tensor<T>) -> Tensor<T> {
        let s = T::lit(self.slope);
        x.data.iter_mut().for_each(|v| {
            if *v <= T::zero() {
                *v *= s
            }
        });
        x
    }

    pub fn forward_train<T: Real>(&mut self, x: Tensor<T>) -> Tensor<T> {
        self.positive = x.data.iter().map(|&v| v > T::zero()).collect();
        self.forward_eval(x)
    }

    /// Sign pattern of the last training pass.
    pub fn pattern(&self) -> &[bool] {
        &self.positive
    }

    pub fn backward<T: Real>(&mut self, mut dy: Tensor<T>) -> Tensor<T> {
        let s = T::lit(self.slope);
        for (g, &p) in dy.data.iter_mut().zip(&self.positive) {
            if !p {
                *g *= s;
            }
        }
        self.positive = Vec::new();
        dy
    }
}

/// 2×2 max pooling, stride 2. Ties go to the first element in row-major order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool {
    argmax: Vec<u8>,
    input_shape: [usize; 4],
}

impl MaxPool {
    fn pool<T: Real>(x: &Tensor<T>, mut record: Option<&mut Vec<u8>>) -> Tensor<T> {
        let [n, c, h, w] = x.shape;
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        for p in 0..n * c {
            let src = &x.data[p * h * w..(p + 1) * h * w];
            let dst = &mut out.data[p * oh * ow..(p + 1) * oh * ow];
            for y in 0..oh {
                for xx in 0..ow {
                    let base = 2 * y * w + 2 * xx;
                    let cand = [src[base], src[base + 1], src[base + w], src[base + w + 1]];
                    let mut best = 0;
                    for k in 1..4 {
                        if cand[k] > cand[best] {
                            best = k;
                        }
                    }
                    dst[y * ow + xx] = cand[best];
                    if let Some(r) = record.as_deref_mut() {
                        r.push(best as u8);
                    }
                }
            }
        }
        out
    }

    pub fn forward_eval<T: Real>(&self, x: &Tensor<T>) -> Tensor<T> {
        Self::pool(x, None)
    }

    pub fn forward_train<T: Real>(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let mut argmax = Vec::with_capacity(x.data.len() / 4);
        let out = Self::pool(x, Some(&mut argmax));
        self.argmax = argmax;
        self.input_shape = x.shape;
        out
    }

    /// Winning positions of the last training pass.
    pub fn pattern(&self) -> &[u8] {
        &self.argmax
    }

    pub fn backward<T: Real>(&mut self, dy: Tensor<T>) -> Tensor<T> {
        let [n, c, h, w] = self.input_shape;
        let (oh, ow) = (h / 2, w / 2);
        let mut dx = Tensor::zeros(self.input_shape);
        for p in 0..n * c {
            for y in 0..oh {
                for xx in 0..ow {
                    let o = p * oh * ow + y * ow + xx;
                    let k = self.argmax[o] as usize;
                    let (ky, kx) = (k / 2, k % 2);
                    dx.data[p * h * w + (2 * y + ky) * w + 2 * xx + kx] = dy.data[o];
                }
            }
        }
        self.argmax = Vec::new();
        dx
    }
}

/// Nearest-neighbour ×2 upsampling.
pub fn upsample<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.shape;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for p in 0..n * c {
        let src = &x.data[p * h * w..(p + 1) * h * w];
        let dst = &mut out.data[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            for xx in 0..ow {
                dst[y * ow + xx] = src[(y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let [n, c, oh, ow] = dy.shape;
    let (h, w) = (oh / 2, ow / 2);
    let mut dx = Tensor::zeros([n, c, h, w]);
    for p in 0..n * c {
        let src = &dy.data[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut dx.data[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            for xx in 0..ow {
                dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
            }
        }
    }
    dx
}

/// Fully connected layer on flattened items.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `(out, in)`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub grad_weight: Vec<T>,
    pub grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: glorot(rng, inputs * outputs, inputs, outputs),
            bias: vec![T::zero(); outputs],
            grad_weight: vec![T::zero(); inputs * outputs],
            grad_bias: vec![T::zero(); outputs],
            input: None,
        }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.batch();
        assert_eq!(x.item_len(), self.inputs, "linear input size");
        let mut out = Tensor::zeros([n, self.outputs, 1, 1]);
        for row in out.data.chunks_mut(self.outputs) {
            row.copy_from_slice(&self.bias);
        }
        T::gemm_raw(n, self.inputs, self.outputs, &x.data, self.inputs, 1, &self.weight, 1, self.inputs, T::one(), &mut out.data, self.outputs);
        out
    }

    pub fn forward_train(&mut self, x: Tensor<T>) -> Tensor<T> {
        let out = self.forward_eval(&x);
        self.input = Some(x);
        out
    }

    pub fn backward(&mut self, dy: Tensor<T>) -> Tensor<T> {
        let x = self.input.take().expect("linear backward without forward");
        let n = x.batch();
        T::gemm_raw(self.outputs, n, self.inputs, &dy.data, 1, self.outputs, &x.data, self.inputs, 1, T::one(), &mut self.grad_weight, self.inputs);
        for row in dy.data.chunks(self.outputs) {
            for (b, &g) in self.grad_bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        let mut dx = Tensor::zeros(x.shape);
        T::gemm_raw(n, self.outputs, self.inputs, &dy.data, self.outputs, 1, &self.weight, self.inputs, 1, T::zero(), &mut dx.data, self.inputs);
        dx
    }
}
