use crate::error::EngineError;
use crate::hashing::{jump_unchecked, BucketId, KeyDigest};

use super::{Algorithm, ConsistentHasher, MemoryUsage, ProbeCounts};

/// Plain jump hash over `n` buckets. Only the tail can be removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpEngine {
    size: u32,
}

impl JumpEngine {
    pub fn new(size: u32) -> Result<Self, EngineError> {
        if size == 0 {
            return Err(EngineError::EmptyCluster);
        }
        Ok(JumpEngine { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn remove_tail(&mut self) -> Result<BucketId, EngineError> {
        let tail = BucketId(self.size - 1);
        self.remove(tail)?;
        Ok(tail)
    }
}

impl ConsistentHasher for JumpEngine {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Jump
    }

    #[inline]
    fn lookup(&self, key: KeyDigest) -> BucketId {
        BucketId(jump_unchecked(key.0, self.size))
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        (self.lookup(key), ProbeCounts::default())
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        let bucket = BucketId(self.size);
        self.size = self
            .size
            .checked_add(1)
            .ok_or(EngineError::IdSpaceExhausted)?;
        Ok(bucket)
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        if bucket.0 >= self.size {
            return Err(EngineError::OutOfRange {
                bucket,
                bound: self.size,
            });
        }
        let tail = BucketId(self.size - 1);
        if bucket != tail {
            return Err(EngineError::NonTailRemoval { bucket, tail });
        }
        if self.size == 1 {
            return Err(EngineError::LastWorkingBucket(bucket));
        }
        self.size -= 1;
        Ok(())
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        bucket.0 < self.size
    }

    fn working_count(&self) -> u32 {
        self.size
    }

    fn id_bound(&self) -> u32 {
        self.size
    }

    /// The bucket count is the whole state.
    fn memory(&self) -> MemoryUsage {
        MemoryUsage {
            entries: 1,
            bytes: 4,
        }
    }
}
