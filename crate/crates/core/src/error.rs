use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("channel index {index} out of range 1..={dim}")]
    ChannelIndex { index: usize, dim: usize },
    #[error("beam splitter needs two distinct channels, got ({0}, {1})")]
    DegenerateChannelPair(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter vector has length {found}, network expects {expected}")]
    ParameterLength { expected: usize, found: usize },
    #[error("parameter index {index} out of range 1..={count}")]
    ParameterIndex { index: usize, count: usize },
    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("empty stage list")]
    EmptyComposition,
    #[error("variance must be positive, got {0:e}")]
    NonPositiveVariance(f64),
    #[error("photon number must be positive, got {0}")]
    NonPositivePhotonNumber(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("Cramér-Rao bound undefined: zero Fisher prefactor")]
    UndefinedBound,
    #[error("reference gradient is zero")]
    ZeroGradient,
    #[error("singular denominator in closed-form phase")]
    SingularDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
