use thiserror::Error;

/// Errors raised by the measurement toolkit.
///
/// Most variants carry enough context (deviation sizes, atom labels) to be
/// rendered directly into a report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("columns are not isometric (deviation {deviation:.3e})")]
    NotIsometric { deviation: f64 },
    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
    #[error("invalid outcome space: {0}")]
    InvalidOutcomeSpace(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure is not absolutely continuous at atom `{atom}`")]
    NotAbsolutelyContinuous { atom: String },
    #[error("invalid projection-valued measure: {0}")]
    InvalidProjectionMeasure(String),
    #[error("not a projection family: {0}")]
    NotAProjectionFamily(String),
    #[error("empty outcome selection")]
    EmptySelection,
    #[error("incompatible outcome spaces")]
    IncompatibleOutcomeSpaces,
    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),
    #[error("unsupported base measure: {0}")]
    UnsupportedMeasure(String),
    #[error("pointer states are not orthonormal (deviation {deviation:.3e})")]
    PointerOverlap { deviation: f64 },
    #[error("ancilla dimension {dim_k} cannot hold {outcomes} orthogonal pointer states")]
    DimensionTooSmall { dim_k: usize, outcomes: usize },
    #[error("orthonormality relation violated: {0}")]
    NotOrthonormal(String),
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("gauge matrix is not unitary: {0}")]
    NotUnitaryMatrix(String),
    #[error("zero-probability event: {0}")]
    ZeroProbabilityEvent(String),
    #[error("posterior pure-state tracking requires a pure initial state")]
    MixedInitialState,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
