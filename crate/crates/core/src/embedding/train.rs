use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::{AeConfig, Autoencoder};
use super::tensor::Real;
use crate::error::{Error, IoContext, Result};
use crate::silhouette::SilhouettePair;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Subjects (front/side pairs) per optimizer step.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 50,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted: it leaves the weights untouched,
    /// which is useful for checking the training loop itself.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        let b_ok = |b: f64| (0.0..1.0).contains(&b);
        if !b_ok(self.adam_beta1) || !b_ok(self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::InvalidArgument("Adam betas must lie in [0, 1) and eps be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction; moment buffers follow the network's parameter order.
struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(params: &[(&mut Vec<T>, &mut Vec<T>)]) -> Self {
        Self {
            m: params.iter().map(|(p, _)| vec![T::zero(); p.len()]).collect(),
            v: params.iter().map(|(p, _)| vec![T::zero(); p.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<(&mut Vec<T>, &mut Vec<T>)>, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
        let c1 = T::lit(1.0 - cfg.adam_beta1.powi(self.t));
        let c2 = T::lit(1.0 - cfg.adam_beta2.powi(self.t));
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.adam_eps);
        let one = T::one();
        for ((p, g), (m, v)) in params.into_iter().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Autoencoder<T>,
    /// Mean training loss per epoch (pair-weighted over batches).
    pub loss_history: Vec<f64>,
}

/// Trains a freshly initialized autoencoder on the given pairs. The seed
/// fixes both the initial weights and the per-epoch shuffling, so runs are
/// bit-for-bit reproducible.
pub fn train_autoencoder<T: Real>(dataset: &[SilhouettePair], ae_config: AeConfig, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_autoencoder_with(dataset, ae_config, cfg, |_, _| {})
}

/// As [`train_autoencoder`], calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_autoencoder_with<T: Real>(
    dataset: &[SilhouettePair],
    ae_config: AeConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let mut model = Autoencoder::<T>::new(ae_config, cfg.seed)?;
    let mut adam = Adam::new(&model.params_mut());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4531);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let pairs: Vec<&SilhouettePair> = chunk.iter().map(|&i| &dataset[i]).collect();
            model.zero_grad();
            let (loss, logits, target) = model.batch_loss_train(&pairs)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx + 1,
                });
            }
            model.backward_loss(&logits, &target, pairs.len());
            adam.step(model.params_mut(), cfg);
            model.update_running_stats();
            total += loss * pairs.len() as f64;
        }
        let mean = total / dataset.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Writes `epoch,mean_loss` rows, epochs numbered from 1.
pub fn write_loss_history(history: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        writeln!(out, "{},{l}", i + 1).unwrap();
    }
    fs::write(path, out).at(path)
}
