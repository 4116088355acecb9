use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid decay model: {0}")]
    InvalidDecay(String),
    #[error("noise level {0} dominates the signal (need epsilon < 1)")]
    NoiseDominates(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("right-hand side is zero")]
    DegenerateRhs,
    #[error("true solution has zero norm")]
    DegenerateTruth,
    #[error("matrix contains non-finite entries")]
    InvalidMatrix,
    #[error("invalid truncation index {k} (n = {n})")]
    InvalidTruncation { k: usize, n: usize },
    #[error("starting vector produces a trivial Krylov subspace")]
    DegenerateStart,
    #[error("Ritz spectrum requested at k = {requested} but bidiagonalization stopped at k = {available}")]
    TruncatedSpectrum { requested: usize, available: usize },
    #[error("spectrum contains a zero or non-finite Ritz value")]
    InvalidSpectrum,
    #[error("basis is not orthonormal (defect {0:e})")]
    InvalidBasis(f64),
    #[error("value {0} outside [0, 1]")]
    Domain(f64),
    #[error("singular values {i} and {j} coincide; multiple singular values are not supported")]
    ZeroGap { i: usize, j: usize },
    #[error("explicit Krylov matrix is numerically rank deficient at column {column} (relative residual {residual:e})")]
    RankDeficientKrylov { column: usize, residual: f64 },
    #[error("ill-posed angle: sin theta = 1, complement is zero")]
    DegenerateAngle,
    #[error("series too short: {0} entries")]
    SeriesTooShort(usize),
    #[error("bidiagonal SVD did not converge")]
    NoConvergence,
    #[error("io: {0}")]
    Io(String),
    #[error("malformed bundle: {0}")]
    Bundle(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Bundle(e.to_string())
    }
}
