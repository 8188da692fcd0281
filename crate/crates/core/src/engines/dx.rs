//! DxHash: a bit array marks the working buckets among `a` slots and the
//! key seeds a pseudo-random probe sequence; the first working slot wins.

use crate::error::EngineError;
use crate::hashing::{mix64, BucketId, KeyDigest};

use super::{Algorithm, CapacityConfig, ConsistentHasher, MemoryUsage, ProbeCounts};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Probes tried before falling back to a linear scan; reaching it needs
/// `PROBE_CAP_FACTOR * a` consecutive misses.
const PROBE_CAP_FACTOR: u64 = 8;

#[derive(Debug, Clone)]
pub struct DxEngine {
    capacity: u32,
    bits: Vec<u64>,
    inactive: Vec<u32>,
    working_count: u32,
}

impl DxEngine {
    pub fn new(config: CapacityConfig) -> Self {
        let a = config.capacity;
        let mut bits = vec![0u64; (a as usize).div_ceil(64)];
        for b in 0..config.working {
            bits[(b / 64) as usize] |= 1 << (b % 64);
        }
        DxEngine {
            capacity: a,
            bits,
            inactive: (config.working..a).rev().collect(),
            working_count: config.working,
        }
    }

    #[inline]
    fn active(&self, b: u32) -> bool {
        self.bits[(b / 64) as usize] & (1 << (b % 64)) != 0
    }

    #[inline]
    fn set(&mut self, b: u32, on: bool) {
        let word = &mut self.bits[(b / 64) as usize];
        if on {
            *word |= 1 << (b % 64);
        } else {
            *word &= !(1 << (b % 64));
        }
    }

    #[inline]
    fn resolve(&self, key: KeyDigest) -> (BucketId, u32) {
        let a = u64::from(self.capacity);
        let cap = PROBE_CAP_FACTOR * a;
        let mut state = key.0;
        let mut probes = 0u64;
        let mut b;
        loop {
            state = state.wrapping_add(GOLDEN_GAMMA);
            b = (mix64(state) % a) as u32;
            probes += 1;
            if self.active(b) {
                return (BucketId(b), probes as u32);
            }
            if probes >= cap {
                break;
            }
        }
        // Pathological miss streak: scan forward to the next working slot.
        loop {
            b = (b + 1) % self.capacity;
            probes += 1;
            if self.active(b) {
                return (BucketId(b), probes.min(u64::from(u32::MAX)) as u32);
            }
        }
    }
}

impl ConsistentHasher for DxEngine {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Dx
    }

    #[inline]
    fn lookup(&self, key: KeyDigest) -> BucketId {
        self.resolve(key).0
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        let (bucket, probes) = self.resolve(key);
        (
            bucket,
            ProbeCounts {
                outer: probes,
                inner: 0,
            },
        )
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        let b = self.inactive.pop().ok_or(EngineError::CapacityExhausted {
            capacity: self.capacity,
        })?;
        self.set(b, true);
        self.working_count += 1;
        Ok(BucketId(b))
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        if bucket.0 >= self.capacity {
            return Err(EngineError::OutOfRange {
                bucket,
                bound: self.capacity,
            });
        }
        if !self.active(bucket.0) {
            return Err(EngineError::NotWorking(bucket));
        }
        if self.working_count == 1 {
            return Err(EngineError::LastWorkingBucket(bucket));
        }
        self.set(bucket.0, false);
        self.inactive.push(bucket.0);
        self.working_count -= 1;
        Ok(())
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        bucket.0 < self.capacity && self.active(bucket.0)
    }

    fn working_count(&self) -> u32 {
        self.working_count
    }

    fn id_bound(&self) -> u32 {
        self.capacity
    }

    fn capacity(&self) -> Option<u32> {
        Some(self.capacity)
    }

    /// One bit per slot, plus a `u32` stack of inactive slots sized to the
    /// capacity.
    fn memory(&self) -> MemoryUsage {
        let a = u64::from(self.capacity);
        MemoryUsage {
            entries: a,
            bytes: a.div_ceil(8) + 4 * a,
        }
    }
}
