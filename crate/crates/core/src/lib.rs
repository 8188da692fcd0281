//! MementoHash consistent hashing.
//!
//! [`MementoState`] stores only the buckets removed out of LIFO order and
//! otherwise behaves exactly like jump hash. The crate also carries the
//! Jump, Anchor and Dx baselines behind [`ConsistentHasher`], an independent
//! reference model with property checkers ([`oracle`]) and a benchmark
//! harness ([`bench`]).
//!
//! ```
//! use mementohash::{BucketId, KeyDigest, MementoState};
//!
//! let mut state = MementoState::new(10).unwrap();
//! state.remove(BucketId(5)).unwrap();
//! let bucket = state.lookup(KeyDigest::of("user:42"));
//! assert_ne!(bucket, BucketId(5));
//! assert_eq!(state.add().unwrap(), BucketId(5));
//! ```

pub mod bench;
pub mod engines;
mod error;
pub mod hashing;
pub mod memento;
pub mod oracle;

pub use engines::{
    Algorithm, AnchorEngine, AnyEngine, CapacityConfig, ConsistentHasher, DxEngine, JumpEngine,
    MemoryUsage, ProbeCounts,
};
pub use error::EngineError;
pub use hashing::{digest_key, jump, keyed_hash, mix64, BucketId, HashError, KeyDigest};
pub use memento::{
    LookupObserver, LookupStep, LookupTrace, MementoState, Replacement, SnapshotError,
};
