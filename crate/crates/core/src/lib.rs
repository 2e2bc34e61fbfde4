//! Body shape and clothing measurement estimation from a front and a side
//! binary silhouette.
//!
//! The crate is organised as a pipeline:
//!
//! - [`bodymodel`]: linear shape-basis body model, shape sampling, mesh I/O
//! - [`meshmetrics`]: height, volume/weight, slice circumferences, mesh error
//! - [`silhouette`]: view rotation, orthographic rasterization, PGM I/O
//! - [`embedding`]: PCA and convolutional autoencoder silhouette embeddings
//! - [`regress`]: polynomial kernel ridge regression
//! - [`pipeline`]: dataset synthesis, training, prediction, evaluation, CLI

pub mod bodymodel;
pub mod embedding;
pub mod error;
pub mod meshmetrics;
pub mod pipeline;
pub mod regress;
pub mod silhouette;

pub use error::{Error, Result};
