use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("one-norm unavailable for this operator kind (no estimator supplied)")]
    OneNormUnavailable,

    #[error("non-finite value encountered: {0}")]
    NumericalRange(String),

    #[error("matrix dimension {dim} exceeds small-matrix cap {cap}")]
    SmallMatrixCap { dim: usize, cap: usize },

    #[error(
        "no progress: residual {residual:.3e} exceeds tolerance {tol:.3e} even at t = {time:.3e}; \
         the Krylov dimension is too small for this operator"
    )]
    NoProgress { time: f64, residual: f64, tol: f64 },

    #[error("restart budget exceeded: {restarts} restarts (cap {cap})")]
    RestartBudgetExceeded { restarts: usize, cap: usize },

    #[error("transfer extent mismatch on axis {axis}: fine {fine} is not twice coarse {coarse}")]
    ExtentMismatch {
        axis: usize,
        fine: usize,
        coarse: usize,
    },

    #[error("unsupported boundary combination: {0}")]
    UnsupportedBoundary(String),

    #[error("extent {extent} not divisible by 2^{levels_minus_one} (needed for {levels} levels)")]
    Divisibility {
        extent: usize,
        levels: usize,
        levels_minus_one: u32,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("reference vector has zero norm")]
    ZeroReference,

    #[error("at level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("matrix market parse error: {0}")]
    MatrixMarket(String),
}

impl Error {
    /// Wrap a solver error with the grid level (1 = finest) it occurred on.
    pub fn at_level(self, level: usize) -> Error {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}
