//! Orchestration: dataset synthesis, training of all components,
//! prediction from a pair of silhouettes, and evaluation reports.

pub mod bundle;
pub mod config;
pub mod dataset;
pub mod eval;

pub use bundle::{mean_absolute_error, train_all, Embedder, ModelBundle, Prediction, TrainSummary};
pub use config::PipelineConfig;
pub use dataset::{synthesize_dataset, DatasetManifest, Split, SplitSpec, SubjectRecord};
pub use eval::{evaluate, score_predictor, EvalReport, SubjectScore};
