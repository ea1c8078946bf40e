use thiserror::Error;

/// Errors produced by the growth-rate library.
#[derive(Debug, Error)]
pub enum Error {
    /// `g = 0` in the principal-solution map. Only `|h| = 1` is admissible and
    /// must be built with [`CycleMatrix::parabolic`](crate::CycleMatrix::parabolic).
    #[error("degenerate cycle: g = 0 with h = {h}; build a parabolic cycle instead")]
    DegenerateCycle { h: f64 },

    #[error("matrix is not unit-determinant: det = {det}")]
    NotUnimodular { det: f64 },

    /// `M = h B` cannot be formed when `h` is (close to) zero.
    #[error("h = {h} is too small to factor M = h B; use the elliptic (theta, L) form")]
    SingularFactorization { h: f64 },

    #[error("matrix product overflowed after {count} factors")]
    NumericOverflow { count: usize },

    #[error("vanishing denominator in alpha recursion at cycle {index}")]
    SingularStep { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("elliptic rotations with different L cannot be composed ({left} vs {right})")]
    LMismatch { left: f64, right: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error(
        "integration accuracy not reached (symmetry residual {symmetry:e}, \
         wronskian residual {wronskian:e}, {steps} steps)"
    )]
    IntegrationAccuracy {
        symmetry: f64,
        wronskian: f64,
        steps: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("stream ended after {got} values, {need} required")]
    StreamTooShort { need: usize, got: usize },

    #[error("cycle {index}: {source}")]
    AtCycle {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by bad inputs or configuration rather than by
    /// the numerics. The CLI maps these to exit code 2.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidDistribution(_) | Error::Parse(_) | Error::Config(_) => true,
            Error::AtCycle { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    pub(crate) fn at_cycle(self, index: usize) -> Self {
        Error::AtCycle {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
