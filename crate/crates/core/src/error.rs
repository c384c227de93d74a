use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain")]
    DegenerateDomain,
    #[error("invalid spacing: h = {0}")]
    InvalidSpacing(f64),
    #[error("invalid exponent: {0}")]
    InvalidExponent(f64),
    #[error("incompatible embedding: {0}")]
    IncompatibleEmbedding(String),
    #[error("empty mollifier")]
    EmptyMollifier,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("mask file {path}: {msg}")]
    MaskFile { path: PathBuf, msg: String },
    #[error("Kato threshold undefined below d=3 (d = {0})")]
    KatoUndefined(usize),
    #[error("domain mismatch")]
    DomainMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spectral decomposition requires symmetry")]
    NotSymmetric,
    #[error("function not evaluable on spectrum (at lambda = {0})")]
    NotEvaluable(f64),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("smoothing requires p <= q")]
    SmoothingOrder,
    #[error("Young exponents incompatible")]
    YoungExponents,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("hypothesis N > d/2 required (N = {n}, d = {d})")]
    TripleNormOrder { n: u32, d: usize },
    #[error("Laplace representation diverges (Re z = {0})")]
    LaplaceDiverges(f64),
    #[error("spectrum touches the pole z/theta")]
    SpectrumHitsPole,
    #[error("decay certificate insufficient: {0}")]
    InsufficientDecay(String),
    #[error("identity requires scale-invariant setting")]
    ScaleInvariance,
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
