use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("field: {0}")]
    InvalidField(String),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("scheduler could not place all pairs: {0}")]
    SchedulingInfeasible(String),
    #[error("no MDS coefficients found after {attempts} seeds; field order {q} is below the sufficiency threshold {threshold}")]
    FieldTooSmall { attempts: u32, q: u64, threshold: u64 },
    #[error("no MDS coefficients found after {attempts} seeds (field order {q})")]
    MdsSearchExhausted { attempts: u32, q: u64 },
    #[error("need {need} distinct shards, got {got}")]
    NotEnoughShards { need: usize, got: usize },
    #[error("generator submatrix for nodes {0:?} is singular")]
    SingularSubmatrix(Vec<usize>),
    #[error("invalid node {node} for this operation")]
    InvalidNode { node: usize },
    #[error("repair read (node {node}, instance {instance}, row {row}) is unavailable")]
    MissingRead { node: usize, instance: usize, row: usize },
    #[error("repair plan is inconsistent: {0}")]
    SingularRepairSystem(String),
    #[error("pairing system is singular")]
    SingularPairing,
    #[error("corrupt shard header: {0}")]
    CorruptHeader(String),
    #[error("shard payload truncated: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unsupported shard version {0}")]
    UnsupportedVersion(u8),
    #[error("shard headers disagree: {0}")]
    HeaderMismatch(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
