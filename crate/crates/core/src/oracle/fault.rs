use crate::engines::{Algorithm, ConsistentHasher, MemoryUsage, ProbeCounts};
use crate::error::EngineError;
use crate::hashing::{BucketId, KeyDigest};

/// Wraps an engine and misroutes one key in sixteen to a bucket derived from
/// the key alone, ignoring the cluster state. Used to prove that the
/// property suites catch a broken engine.
#[derive(Debug, Clone)]
pub struct FaultInjected<E>(pub E);

impl<E: ConsistentHasher> FaultInjected<E> {
    fn corrupt(&self, key: KeyDigest) -> Option<BucketId> {
        (key.0 % 16 == 0).then(|| BucketId(((key.0 >> 8) % u64::from(self.0.id_bound())) as u32))
    }
}

impl<E: ConsistentHasher> ConsistentHasher for FaultInjected<E> {
    fn algorithm(&self) -> Algorithm {
        self.0.algorithm()
    }

    fn lookup(&self, key: KeyDigest) -> BucketId {
        self.corrupt(key).unwrap_or_else(|| self.0.lookup(key))
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        let (bucket, counts) = self.0.lookup_counted(key);
        (self.corrupt(key).unwrap_or(bucket), counts)
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        self.0.add()
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        self.0.remove(bucket)
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        self.0.is_working(bucket)
    }

    fn working_count(&self) -> u32 {
        self.0.working_count()
    }

    fn id_bound(&self) -> u32 {
        self.0.id_bound()
    }

    fn capacity(&self) -> Option<u32> {
        self.0.capacity()
    }

    fn memory(&self) -> MemoryUsage {
        self.0.memory()
    }
}
