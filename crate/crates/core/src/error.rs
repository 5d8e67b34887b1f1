use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label class {0:+} has no members")]
    EmptyClass(i8),
    #[error("softmax normalization underflowed to zero")]
    NumericOverflow,
    #[error("atom {0} is outside the sample space")]
    AtomOutOfRange(String),
    #[error("drawn atom has density {0:e}, below the 1e-12 floor")]
    DensityUnderflow(f64),
    #[error("non-finite update of {0}")]
    NonFiniteUpdate(&'static str),
    #[error("estimate needs at least 2 samples, have {0}")]
    InsufficientSamples(u64),
    #[error("sample space has {atoms} atoms, above the enumeration budget of {budget}")]
    SpaceTooLarge { atoms: u128, budget: u128 },
    #[error("importance weight {0:e} exceeds the cap")]
    WeightOverflow(f64),
    #[error("bad IDX magic number {0:#010x}")]
    BadMagic(u32),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
