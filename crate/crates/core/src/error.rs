use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the silhouette-to-shape pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {what} (expected {expected}, got {got})")]
    Sizing {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("mesh is not watertight: boundary edge ({0}, {1})")]
    NotWatertight(usize, usize),

    #[error("inconsistent face orientation at edge ({0}, {1})")]
    Orientation(usize, usize),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("empty cross-section at height {0:.4} m")]
    EmptySection(f64),

    #[error("open cross-section loop at height {0:.4} m")]
    OpenLoop(f64),

    #[error("body model construction failed: {0}")]
    Construction(String),

    #[error("resolution mismatch: expected {expected:?}, got {got:?}")]
    Resolution {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("empty silhouette: {0}")]
    EmptySilhouette(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("Gram matrix factorization failed; try a larger lambda (current {lambda})")]
    Factorization { lambda: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
