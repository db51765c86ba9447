//! Crate-wide error type.

use std::path::PathBuf;

/// Everything that can go wrong across the library.
///
/// Variants are grouped by how a caller should react: `Usage*` errors mean the
/// request itself was malformed, `Data*`/`Io`/`Parse` mean an artifact on disk
/// is unreadable or inconsistent, and `NonFinite*` mean optimization or
/// evaluation produced NaN/inf and the run should stop rather than continue
/// with poisoned state.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("shape/value mismatch in {context}: {detail}")]
    ShapeMismatch { context: String, detail: String },

    #[error("backward pass requires a scalar root, got a tensor with {len} elements")]
    NonScalarRoot { len: usize },

    #[error("non-finite gradient in parameter block `{block}` at component {index}")]
    NonFiniteGradient { block: String, index: usize },

    #[error("non-finite loss at iteration {iter} (instance `{instance}`, state `{state}`, view {view}): {breakdown}")]
    NonFiniteLoss {
        iter: u64,
        instance: String,
        state: String,
        view: usize,
        breakdown: String,
    },

    #[error("unknown code id `{id}` in {table} table")]
    UnknownCode { table: String, id: String },

    #[error("model variant mismatch: {detail}")]
    VariantMismatch { detail: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    VersionMismatch {
        what: String,
        found: String,
        expected: String,
    },

    #[error("bad magic in {path}: not a {what} file")]
    BadMagic { what: String, path: PathBuf },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty point cloud in {context}")]
    EmptyPointCloud { context: String },

    #[error("mesh has no faces; nothing to sample")]
    EmptyMesh,

    #[error("degenerate geometry in {context}: {detail}")]
    Degenerate { context: String, detail: String },

    #[error("unknown scene `{0}` (expected laptop, drawer, or cabinet)")]
    UnknownScene(String),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Shorthand for parse failures tied to a file.
    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
