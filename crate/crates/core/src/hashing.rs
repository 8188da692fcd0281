//! Deterministic 64-bit hashing primitives shared by every engine.
//!
//! Keys are digested with FNV-1a 64 followed by the splitmix64 finalizer so
//! that independent implementations agree bit-for-bit on every lookup. The
//! rehash used while resolving removed buckets folds the bucket id in through
//! a second finalizer round. All output is 64 bits wide.

use std::fmt;
use std::hash::{BuildHasher, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const FNV_OFFSET_BASIS: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// Multiplier of the linear congruential generator driving jump hash.
const JUMP_LCG_MULTIPLIER: u64 = 2_862_933_555_777_941_757;

/// 64-bit digest of an arbitrary byte-string key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyDigest(pub u64);

impl KeyDigest {
    pub fn of(key: impl AsRef<[u8]>) -> Self {
        digest_key(key.as_ref())
    }
}

impl fmt::Display for KeyDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#018x}", self.0)
    }
}

/// Index of a bucket in the b-array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BucketId(pub u32);

impl BucketId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BucketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for BucketId {
    fn from(value: u32) -> Self {
        BucketId(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HashError {
    #[error("jump hash needs at least one bucket")]
    NoBuckets,
}

/// The splitmix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a 64 over `key`, finished with [`mix64`].
pub fn digest_key(key: &[u8]) -> KeyDigest {
    let fnv = key.iter().fold(FNV_OFFSET_BASIS, |h, &byte| {
        (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME)
    });
    KeyDigest(mix64(fnv))
}

/// Rehash of `key` salted with bucket `b`; used to pick a slot among the
/// buckets that were working when `b` was removed.
#[inline]
pub fn keyed_hash(key: KeyDigest, b: BucketId) -> u64 {
    mix64(key.0 ^ mix64(u64::from(b.0)))
}

/// Lamping-Veach jump consistent hash: maps `key` to a bucket in `[0, n)`.
pub fn jump(key: KeyDigest, n: u32) -> Result<BucketId, HashError> {
    if n == 0 {
        return Err(HashError::NoBuckets);
    }
    Ok(BucketId(jump_unchecked(key.0, n)))
}

/// Callers guarantee `n >= 1`.
#[inline]
pub(crate) fn jump_unchecked(mut key: u64, n: u32) -> u32 {
    debug_assert!(n > 0);
    let n = i64::from(n);
    let mut b: i64 = -1;
    let mut j: i64 = 0;
    while j < n {
        b = j;
        key = key.wrapping_mul(JUMP_LCG_MULTIPLIER).wrapping_add(1);
        j = ((b + 1) as f64 * ((1u64 << 31) as f64 / ((key >> 33) + 1) as f64)) as i64;
    }
    b as u32
}

/// `BuildHasher` for tables keyed by small integers such as bucket ids.
///
/// The standard SipHash is needlessly slow on the lookup path; a single
/// finalizer round is enough to spread consecutive ids.
#[derive(Debug, Clone, Copy, Default)]
pub struct BucketHashBuilder;

impl BuildHasher for BucketHashBuilder {
    type Hasher = BucketHasher;

    fn build_hasher(&self) -> BucketHasher {
        BucketHasher(0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BucketHasher(u64);

impl Hasher for BucketHasher {
    fn finish(&self) -> u64 {
        mix64(self.0)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &byte in bytes {
            self.0 = (self.0 ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
        }
    }

    fn write_u32(&mut self, i: u32) {
        self.0 = self.0.rotate_left(32) ^ u64::from(i);
    }

    fn write_u64(&mut self, i: u64) {
        self.0 = self.0.rotate_left(32) ^ i;
    }

    fn write_usize(&mut self, i: usize) {
        self.write_u64(i as u64);
    }
}
