use alloc::string::String;

/// Failures of the selection pipeline. Dataset invariant breaches are
/// reported as [`crate::Violation`] values instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("candidate index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("cannot select {requested} of {available} scored tuples")]
    SelectionTooLarge { requested: usize, available: usize },
    #[error("pool has {available} unlabeled tuples, {needed} needed")]
    InsufficientPool { needed: usize, available: usize },
    #[error("tuple {0} is already pending or labeled")]
    DuplicateId(String),
    #[error("tuple {0} is not pending")]
    NotPending(String),
    #[error("unknown tuple {0}")]
    UnknownTuple(String),
    #[error("annotation timed out in iteration {iteration}")]
    AnnotationTimeout { iteration: u64 },
    #[error("annotator failed: {0}")]
    Annotator(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
