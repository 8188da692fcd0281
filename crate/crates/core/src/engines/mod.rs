//! Common interface over MementoHash and the baseline engines.

mod anchor;
mod dx;
mod jump;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::hashing::{BucketId, KeyDigest};
use crate::memento::MementoState;

pub use anchor::AnchorEngine;
pub use dx::DxEngine;
pub use jump::JumpEngine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Memento,
    Jump,
    Anchor,
    Dx,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Memento,
        Algorithm::Jump,
        Algorithm::Anchor,
        Algorithm::Dx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Memento => "memento",
            Algorithm::Jump => "jump",
            Algorithm::Anchor => "anchor",
            Algorithm::Dx => "dx",
        }
    }

    /// Anchor and Dx need a fixed overall capacity up front.
    pub fn is_capacity_bound(self) -> bool {
        matches!(self, Algorithm::Anchor | Algorithm::Dx)
    }

    /// Whether arbitrary (non-tail) buckets can be removed.
    pub fn supports_random_removal(self) -> bool {
        !matches!(self, Algorithm::Jump)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "memento" => Ok(Algorithm::Memento),
            "jump" => Ok(Algorithm::Jump),
            "anchor" => Ok(Algorithm::Anchor),
            "dx" => Ok(Algorithm::Dx),
            other => Err(format!(
                "unknown algorithm `{other}` (expected memento, jump, anchor or dx)"
            )),
        }
    }
}

/// Overall capacity `a` and initial working buckets `w` for Anchor and Dx.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub capacity: u32,
    pub working: u32,
}

impl CapacityConfig {
    pub fn new(capacity: u32, working: u32) -> Result<Self, EngineError> {
        if working == 0 {
            return Err(EngineError::EmptyCluster);
        }
        if capacity < working {
            return Err(EngineError::InvalidCapacity { capacity, working });
        }
        Ok(CapacityConfig { capacity, working })
    }

    /// `a = ratio * w`.
    pub fn with_ratio(working: u32, ratio: u32) -> Result<Self, EngineError> {
        let capacity = working
            .checked_mul(ratio)
            .ok_or(EngineError::InvalidCapacity {
                capacity: u32::MAX,
                working,
            })?;
        Self::new(capacity, working)
    }
}

/// Per-lookup iteration counters.
///
/// For Memento `outer` is the external-loop count and `inner` the internal
/// hops; for Anchor the same two loops; for Dx `outer` counts probes into the
/// bit array; Jump reports zero for both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCounts {
    pub outer: u32,
    pub inner: u32,
}

impl ProbeCounts {
    /// Total loop steps spent resolving the key.
    pub fn work(self) -> u32 {
        self.outer + self.inner
    }
}

/// Implementation-independent memory footprint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryUsage {
    pub entries: u64,
    pub bytes: u64,
}

/// A consistent hash engine: lookups are pure, mutations need `&mut`.
pub trait ConsistentHasher {
    fn algorithm(&self) -> Algorithm;

    fn lookup(&self, key: KeyDigest) -> BucketId;

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts);

    /// Makes one more bucket working and returns it.
    fn add(&mut self) -> Result<BucketId, EngineError>;

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError>;

    fn is_working(&self, bucket: BucketId) -> bool;

    fn working_count(&self) -> u32;

    /// Exclusive upper bound of every bucket id the engine may return.
    fn id_bound(&self) -> u32;

    /// Overall capacity for capacity-bound engines.
    fn capacity(&self) -> Option<u32> {
        None
    }

    fn memory(&self) -> MemoryUsage;

    fn working_buckets(&self) -> Vec<BucketId> {
        (0..self.id_bound())
            .map(BucketId)
            .filter(|&b| self.is_working(b))
            .collect()
    }
}

impl<T: ConsistentHasher + ?Sized> ConsistentHasher for Box<T> {
    fn algorithm(&self) -> Algorithm {
        (**self).algorithm()
    }

    fn lookup(&self, key: KeyDigest) -> BucketId {
        (**self).lookup(key)
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        (**self).lookup_counted(key)
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        (**self).add()
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        (**self).remove(bucket)
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        (**self).is_working(bucket)
    }

    fn working_count(&self) -> u32 {
        (**self).working_count()
    }

    fn id_bound(&self) -> u32 {
        (**self).id_bound()
    }

    fn capacity(&self) -> Option<u32> {
        (**self).capacity()
    }

    fn memory(&self) -> MemoryUsage {
        (**self).memory()
    }

    fn working_buckets(&self) -> Vec<BucketId> {
        (**self).working_buckets()
    }
}

/// Bytes per stored replacement: a `u32` key, two `u32` fields and one
/// control byte of the hash table, rounded up.
pub const MEMENTO_BYTES_PER_ENTRY: u64 = 16;

impl ConsistentHasher for MementoState {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Memento
    }

    #[inline]
    fn lookup(&self, key: KeyDigest) -> BucketId {
        MementoState::lookup(self, key)
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        let (bucket, trace) = self.lookup_traced(key);
        (
            bucket,
            ProbeCounts {
                outer: trace.external_iterations,
                inner: trace.internal_iterations_total,
            },
        )
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        MementoState::add(self)
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        MementoState::remove(self, bucket)
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        MementoState::is_working(self, bucket)
    }

    fn working_count(&self) -> u32 {
        MementoState::working_count(self)
    }

    fn id_bound(&self) -> u32 {
        self.size()
    }

    fn memory(&self) -> MemoryUsage {
        let entries = u64::from(self.removed_count());
        MemoryUsage {
            entries,
            bytes: entries * MEMENTO_BYTES_PER_ENTRY,
        }
    }
}

/// Engine chosen at runtime.
#[derive(Debug, Clone)]
pub enum AnyEngine {
    Memento(MementoState),
    Jump(JumpEngine),
    Anchor(AnchorEngine),
    Dx(DxEngine),
}

impl AnyEngine {
    /// Builds `algorithm` with `working` buckets; `ratio` sets `a = ratio * w`
    /// for Anchor and Dx and is ignored otherwise.
    pub fn build(algorithm: Algorithm, working: u32, ratio: u32) -> Result<Self, EngineError> {
        Ok(match algorithm {
            Algorithm::Memento => AnyEngine::Memento(MementoState::new(working)?),
            Algorithm::Jump => AnyEngine::Jump(JumpEngine::new(working)?),
            Algorithm::Anchor => AnyEngine::Anchor(AnchorEngine::new(CapacityConfig::with_ratio(
                working, ratio,
            )?)),
            Algorithm::Dx => {
                AnyEngine::Dx(DxEngine::new(CapacityConfig::with_ratio(working, ratio)?))
            }
        })
    }

    fn inner(&self) -> &dyn ConsistentHasher {
        match self {
            AnyEngine::Memento(e) => e,
            AnyEngine::Jump(e) => e,
            AnyEngine::Anchor(e) => e,
            AnyEngine::Dx(e) => e,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn ConsistentHasher {
        match self {
            AnyEngine::Memento(e) => e,
            AnyEngine::Jump(e) => e,
            AnyEngine::Anchor(e) => e,
            AnyEngine::Dx(e) => e,
        }
    }
}

impl ConsistentHasher for AnyEngine {
    fn algorithm(&self) -> Algorithm {
        self.inner().algorithm()
    }

    #[inline]
    fn lookup(&self, key: KeyDigest) -> BucketId {
        match self {
            AnyEngine::Memento(e) => e.lookup(key),
            AnyEngine::Jump(e) => e.lookup(key),
            AnyEngine::Anchor(e) => e.lookup(key),
            AnyEngine::Dx(e) => e.lookup(key),
        }
    }

    fn lookup_counted(&self, key: KeyDigest) -> (BucketId, ProbeCounts) {
        self.inner().lookup_counted(key)
    }

    fn add(&mut self) -> Result<BucketId, EngineError> {
        self.inner_mut().add()
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        self.inner_mut().remove(bucket)
    }

    fn is_working(&self, bucket: BucketId) -> bool {
        self.inner().is_working(bucket)
    }

    fn working_count(&self) -> u32 {
        self.inner().working_count()
    }

    fn id_bound(&self) -> u32 {
        self.inner().id_bound()
    }

    fn capacity(&self) -> Option<u32> {
        self.inner().capacity()
    }

    fn memory(&self) -> MemoryUsage {
        self.inner().memory()
    }
}
