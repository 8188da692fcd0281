use thiserror::Error;

use crate::hashing::BucketId;

/// Errors raised by engine mutations. A failed call never changes state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("a cluster needs at least one bucket")]
    EmptyCluster,
    #[error("bucket {bucket} out of range (bound {bound})")]
    OutOfRange { bucket: BucketId, bound: u32 },
    #[error("bucket {0} not working")]
    NotWorking(BucketId),
    #[error("cannot remove bucket {0}: it is the last working bucket")]
    LastWorkingBucket(BucketId),
    #[error("bucket {bucket} is not the tail (only {tail} may be removed)")]
    NonTailRemoval { bucket: BucketId, tail: BucketId },
    #[error("capacity {capacity} is exhausted")]
    CapacityExhausted { capacity: u32 },
    #[error("capacity {capacity} is smaller than the {working} initial working buckets")]
    InvalidCapacity { capacity: u32, working: u32 },
    #[error("bucket id space exhausted")]
    IdSpaceExhausted,
    #[error("internal state corrupted: {0}")]
    Corrupted(&'static str),
}
