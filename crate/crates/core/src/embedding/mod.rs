//! Silhouette embeddings: a PCA baseline and a convolutional autoencoder
//! trained with a two-view binary cross-entropy objective.

pub mod autoencoder;
pub mod gradcheck;
pub mod layers;
pub mod pca;
pub mod tensor;
pub mod train;

pub use autoencoder::{bce_loss, AeConfig, Autoencoder};
pub use gradcheck::{grad_check, GradCheckReport};
pub use pca::{pca_decode, pca_encode, pca_encode_values, pca_fit, PcaModel};
pub use tensor::{Real, Tensor};
pub use train::{train_autoencoder, write_loss_history, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};

/// Size of the per-image embedding used downstream.
pub const LATENT_DIM: usize = 256;

/// Finite embedding of one silhouette. Production embeddings have
/// [`LATENT_DIM`] entries; reduced test networks may use fewer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        Ok(Self { values })
    }

    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; LATENT_DIM],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
