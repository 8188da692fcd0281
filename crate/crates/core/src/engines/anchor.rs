//! In-place AnchorHash over a fixed capacity `a`.
//!
//! Four integer arrays of length `a`:
//! - `anchor[b]`: 0 while `b` works, otherwise the working count left right
//!   after `b` was removed;
//! - `working[i]` / `location[b]`: the working set as a permutation and its
//!   inverse, so removing a bucket swaps the last working one into its slot;
//! - `next[b]`: the bucket that took `b`'s slot when `b` was removed.
//!
//! Buckets `w..a` start out removed, highest first, so restorations hand out
//! `w, w+1, ...`.

use crate::error::EngineError;
use crate::hashing::{keyed_hash, mix64, BucketId, KeyDigest};

use super::{Algorithm, CapacityConfig, ConsistentHasher, MemoryUsage, ProbeCounts};

const FIRST_HASH_SALT: u64 = 0x414E_4348_4F52_0001;

#[derive(Debug, Clone)]
pub struct AnchorEngine {
    anchor: Vec<u32>,
    working: Vec<u32>,
    location: Vec<u32>,
    next: Vec<u32>,
    removed: Vec<u32>,
    working_count: u32,
}

impl AnchorEngine {
    pub fn new(config: CapacityConfig) -> Self {
        let a = config.capacity;
        let ids: Vec<u32> = (0..a).collect();
        let mut anchor = vec![0u32; a as usize];
        let mut removed = Vec::with_capacity(a as usize);
        for b in (config.working..a).rev() {
            anchor[b as usize] = b;
            removed.push(b);
        }
        AnchorEngine {
            anchor,
            working: ids.clone(),
            location: ids.clone(),
            next: ids,
            removed,
            working_count: config.working,
        }
    }

    #[inline]
    fn resolve<const COUNT: bool>(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        let a = self.anchor.len() as u64;
        let mut counts = ProbeCounts::default();
        let mut b = (mix64(key.0 ^ FIRST_HASH_SALT) % a) as u32;
        while self.anchor[b as usize] > 0 {
            let limit = self.anchor[b as usize];
            if COUNT {
                counts.outer += 1;
            }
            let mut h = (keyed_hash(key, BucketId(b)) % u64::from(limit)) as u32;
            while self.anchor[h as usize] >= limit {
                if COUNT {
                    counts.inner += 1;
                }
                h = self.next[h as usize];
            }
            b = h;
        }
        (BucketId(b), counts)
    }
}

impl ConsistentHasher for AnchorEngine {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Anchor
    }

    #[inline]
    fn lookup(&self, key: KeyDigest) -> BucketId {
        self.resolve::<false>(key).0
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        self.resolve::<true>(key)
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        let b = self.removed.pop().ok_or(EngineError::CapacityExhausted {
            capacity: self.anchor.len() as u32,
        })?;
        let n = self.working_count as usize;
        let bi = b as usize;
        self.anchor[bi] = 0;
        let moved = self.working[n];
        self.location[moved as usize] = n as u32;
        self.working[self.location[bi] as usize] = b;
        self.next[bi] = b;
        self.working_count += 1;
        Ok(BucketId(b))
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        let a = self.anchor.len() as u32;
        if bucket.0 >= a {
            return Err(EngineError::OutOfRange { bucket, bound: a });
        }
        if !self.is_working(bucket) {
            return Err(EngineError::NotWorking(bucket));
        }
        if self.working_count == 1 {
            return Err(EngineError::LastWorkingBucket(bucket));
        }
        let bi = bucket.index();
        self.removed.push(bucket.0);
        self.working_count -= 1;
        let n = self.working_count as usize;
        self.anchor[bi] = n as u32;
        let last = self.working[n];
        self.working[self.location[bi] as usize] = last;
        self.location[last as usize] = self.location[bi];
        self.next[bi] = last;
        Ok(())
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        self.anchor.get(bucket.index()).is_some_and(|&a| a == 0)
    }

    fn working_count(&self) -> u32 {
        self.working_count
    }

    fn id_bound(&self) -> u32 {
        self.anchor.len() as u32
    }

    fn capacity(&self) -> Option<u32> {
        Some(self.anchor.len() as u32)
    }

    /// Four arrays plus the removal stack, all sized to the capacity.
    fn memory(&self) -> MemoryUsage {
        let entries = 5 * self.anchor.len() as u64;
        MemoryUsage {
            entries,
            bytes: entries * 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn engine(a: u32, w: u32) -> AnchorEngine {
        AnchorEngine::new(CapacityConfig::new(a, w).unwrap())
    }

    #[test]
    fn initial_working_set() {
        let e = engine(20, 8);
        assert_eq!(e.working_count(), 8);
        assert_eq!(
            e.working_buckets(),
            (0..8).map(BucketId).collect::<Vec<_>>()
        );
        assert_eq!(e.capacity(), Some(20));
    }

    #[test]
    fn restores_lifo_and_rejects_beyond_capacity() {
        let mut e = engine(4, 2);
        assert_eq!(e.add().unwrap(), BucketId(2));
        assert_eq!(e.add().unwrap(), BucketId(3));
        assert_eq!(e.add(), Err(EngineError::CapacityExhausted { capacity: 4 }));
        e.remove(BucketId(1)).unwrap();
        assert_eq!(e.add().unwrap(), BucketId(1));
    }

    #[test]
    fn removal_errors() {
        let mut e = engine(4, 2);
        assert_eq!(
            e.remove(BucketId(3)),
            Err(EngineError::NotWorking(BucketId(3)))
        );
        assert_eq!(
            e.remove(BucketId(9)),
            Err(EngineError::OutOfRange {
                bucket: BucketId(9),
                bound: 4
            })
        );
        e.remove(BucketId(0)).unwrap();
        assert_eq!(
            e.remove(BucketId(1)),
            Err(EngineError::LastWorkingBucket(BucketId(1)))
        );
    }

    #[test]
    fn lookups_hit_working_buckets_and_restore() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut e = engine(200, 50);
        let keys: Vec<KeyDigest> = (0..5000).map(|_| KeyDigest(rng.gen())).collect();
        let mut order: Vec<u32> = (0..50).collect();
        order.shuffle(&mut rng);
        let mut history = Vec::new();
        for &b in &order[..30] {
            history.push(keys.iter().map(|&k| e.lookup(k)).collect::<Vec<_>>());
            e.remove(BucketId(b)).unwrap();
            for &k in &keys {
                assert!(e.is_working(e.lookup(k)));
            }
        }
        for &b in order[..30].iter().rev() {
            assert_eq!(e.add().unwrap(), BucketId(b));
            let restored: Vec<BucketId> = keys.iter().map(|&k| e.lookup(k)).collect();
            assert_eq!(restored, history.pop().unwrap());
        }
    }

    #[test]
    fn memory_follows_capacity() {
        let mut e = engine(1000, 100);
        let before = e.memory();
        e.remove(BucketId(5)).unwrap();
        assert_eq!(e.memory(), before);
        assert_eq!(before.entries, 5000);
    }
}
