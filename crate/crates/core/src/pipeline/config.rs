//! Flat `key = value` run configuration. Later sources override earlier
//! ones: built-in defaults, then a config file, then command-line flags.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::{AeConfig, TrainConfig};
use crate::error::{Error, IoContext, Result};
use crate::meshmetrics::{SliceSpec, DEFAULT_DENSITY};
use crate::regress::{default_hyperparams, KernelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // dataset synthesis
    pub count: usize,
    pub seed: u64,
    pub resolution: usize,
    pub shape_stddev: f64,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    // measurement
    pub density: f64,
    pub cut_spacing: f64,
    pub bust_fraction: f64,
    pub waist_fraction: f64,
    pub hip_fraction: f64,
    // autoencoder
    pub channels: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub train_seed: u64,
    // regression
    pub krr_degree: u32,
    pub krr_lambda: f64,
    pub krr_offset: f64,
    pub krr_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let slice = SliceSpec::default();
        let (kernel, lambda) = default_hyperparams();
        Self {
            count: 300,
            seed: 1,
            resolution: 64,
            shape_stddev: 1.0,
            split_seed: 2,
            train_fraction: 0.8,
            val_fraction: 0.1,
            density: DEFAULT_DENSITY,
            cut_spacing: slice.cut_spacing,
            bust_fraction: slice.bust_fraction,
            waist_fraction: slice.waist_fraction,
            hip_fraction: slice.hip_fraction,
            channels: 32,
            batch_size: train.batch_size,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            adam_beta1: train.adam_beta1,
            adam_beta2: train.adam_beta2,
            adam_eps: train.adam_eps,
            train_seed: train.seed,
            krr_degree: kernel.degree,
            krr_lambda: lambda,
            krr_offset: kernel.offset,
            krr_scale: kernel.scale,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value {value:?} for {key}")))
}

/// Field table shared by the parser and the snapshot writer.
macro_rules! fields {
    ($($name:ident),* $(,)?) => {
        impl PipelineConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($name)),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($name) => self.$name = parse_value(key, value)?,)*
                    _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
                }
                Ok(())
            }

            /// Every key with its current value, one `key = value` per line.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(writeln!(out, "{} = {}", stringify!($name), self.$name).unwrap();)*
                out
            }
        }
    };
}

fields!(
    count, seed, resolution, shape_stddev, split_seed, train_fraction, val_fraction, density, cut_spacing,
    bust_fraction, waist_fraction, hip_fraction, channels, batch_size, epochs, learning_rate, adam_beta1,
    adam_beta2, adam_eps, train_seed, krr_degree, krr_lambda, krr_offset, krr_scale,
);

impl PipelineConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).at(path)?;
        self.apply_text(&text, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).at(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        if !(self.shape_stddev > 0.0) {
            return Err(Error::InvalidArgument("shape_stddev must be positive".into()));
        }
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !frac_ok(self.train_fraction) || !frac_ok(self.val_fraction) || self.train_fraction + self.val_fraction > 1.0 {
            return Err(Error::InvalidArgument("split fractions must be in [0, 1] and sum to at most 1".into()));
        }
        if !(self.density > 0.0) {
            return Err(Error::InvalidArgument("density must be positive".into()));
        }
        self.slice_spec().validate()?;
        self.ae_config().validate()?;
        self.train_config().validate()?;
        self.kernel().validate()?;
        if !(self.krr_lambda > 0.0) {
            return Err(Error::InvalidArgument("krr_lambda must be positive".into()));
        }
        Ok(())
    }

    pub fn slice_spec(&self) -> SliceSpec {
        SliceSpec {
            cut_spacing: self.cut_spacing,
            bust_fraction: self.bust_fraction,
            waist_fraction: self.waist_fraction,
            hip_fraction: self.hip_fraction,
            ..SliceSpec::default()
        }
    }

    pub fn ae_config(&self) -> AeConfig {
        AeConfig {
            channels: self.channels,
            ..AeConfig::new(self.resolution, self.resolution)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed: self.train_seed,
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec {
            degree: self.krr_degree,
            scale: self.krr_scale,
            offset: self.krr_offset,
        }
    }
}
