//! The MementoHash state machine.
//!
//! A cluster is a b-array of size `n` whose first `w` positions always hold
//! the working buckets. Instead of storing the array, the state only records
//! how it differs from the identity layout: one [`Replacement`] per bucket
//! removed out of LIFO order, linked into a stack through the `previous`
//! field. When every removal happens at the tail the table stays empty and
//! lookups reduce to plain jump hash.

mod snapshot;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::hashing::{jump_unchecked, keyed_hash, BucketHashBuilder, BucketId, KeyDigest};

pub use snapshot::{SnapshotError, SNAPSHOT_VERSION};

/// `⟨b → c, p⟩`: bucket `removed` is replaced by `replacer`, and `previous`
/// is the bucket removed just before it (or the b-array size at the time of
/// the first removal).
///
/// `replacer` doubles as the number of working buckets left right after the
/// removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Replacement {
    pub removed: BucketId,
    pub replacer: BucketId,
    pub previous: BucketId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    replacer: u32,
    previous: u32,
}

/// Complete MementoHash state `⟨n, R, l⟩`.
#[derive(Debug, Clone)]
pub struct MementoState {
    size: u32,
    last_removed: u32,
    replacements: HashMap<u32, Slot, BucketHashBuilder>,
}

/// Iteration counters of a single lookup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupTrace {
    /// Passes through the external loop. Zero when jump lands on a working
    /// bucket.
    pub external_iterations: u32,
    /// Replacement hops taken by the internal loop, summed over all passes.
    pub internal_iterations_total: u32,
    /// Nested-loop steps: one per external pass plus every internal hop.
    pub product_work: u32,
}

/// One step of a lookup, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum LookupStep {
    /// Initial jump over the whole b-array.
    Jump {
        bucket: BucketId,
        size: u32,
    },
    /// `from` is removed; the key is rehashed into `[0, working)`.
    Rehash {
        from: BucketId,
        working: u32,
        slot: BucketId,
    },
    /// Followed `⟨from → to⟩` because `to` was still inside the range.
    Hop {
        from: BucketId,
        to: BucketId,
    },
    /// Stopped following at `at`: its replacer lies below the range.
    Halt {
        at: BucketId,
        replacer: BucketId,
    },
    Done {
        bucket: BucketId,
    },
}

/// Receives every [`LookupStep`] of a lookup. The unit type ignores them.
pub trait LookupObserver {
    fn observe(&mut self, step: LookupStep);
}

impl LookupObserver for () {
    #[inline(always)]
    fn observe(&mut self, _step: LookupStep) {}
}

impl LookupObserver for LookupTrace {
    #[inline]
    fn observe(&mut self, step: LookupStep) {
        match step {
            LookupStep::Rehash { .. } => {
                self.external_iterations += 1;
                self.product_work += 1;
            }
            LookupStep::Hop { .. } => {
                self.internal_iterations_total += 1;
                self.product_work += 1;
            }
            _ => {}
        }
    }
}

impl LookupObserver for Vec<LookupStep> {
    fn observe(&mut self, step: LookupStep) {
        self.push(step);
    }
}

impl MementoState {
    /// A cluster of `initial_node_count` working buckets and no removals.
    pub fn new(initial_node_count: u32) -> Result<Self, EngineError> {
        if initial_node_count == 0 {
            return Err(EngineError::EmptyCluster);
        }
        Ok(MementoState {
            size: initial_node_count,
            last_removed: initial_node_count,
            replacements: HashMap::default(),
        })
    }

    /// Size of the b-array, `n`.
    pub fn size(&self) -> u32 {
        self.size
    }

    /// Working buckets, `w = n - r`.
    pub fn working_count(&self) -> u32 {
        self.size - self.removed_count()
    }

    /// Number of stored replacements, `r`.
    pub fn removed_count(&self) -> u32 {
        self.replacements.len() as u32
    }

    /// Last removed bucket `l`; equals `n` when nothing is removed.
    pub fn last_removed(&self) -> BucketId {
        BucketId(self.last_removed)
    }

    pub fn is_working(&self, bucket: BucketId) -> bool {
        bucket.0 < self.size && !self.replacements.contains_key(&bucket.0)
    }

    pub fn replacement(&self, bucket: BucketId) -> Option<Replacement> {
        self.replacements.get(&bucket.0).map(|slot| Replacement {
            removed: bucket,
            replacer: BucketId(slot.replacer),
            previous: BucketId(slot.previous),
        })
    }

    /// Replacements from the most recent removal back to the first one.
    pub fn removal_stack(&self) -> Vec<Replacement> {
        let mut out = Vec::with_capacity(self.replacements.len());
        let mut cursor = self.last_removed;
        while let Some(entry) = self.replacement(BucketId(cursor)) {
            out.push(entry);
            cursor = entry.previous.0;
            if out.len() > self.replacements.len() {
                break;
            }
        }
        out
    }

    /// Removes working bucket `bucket`.
    ///
    /// Removing the tail of an untouched b-array just shrinks it; any other
    /// removal records `⟨b → w-1, l⟩`.
    pub fn remove(&mut self, bucket: BucketId) -> Result<(), EngineError> {
        let b = bucket.0;
        if b >= self.size {
            return Err(EngineError::OutOfRange {
                bucket,
                bound: self.size,
            });
        }
        if self.replacements.contains_key(&b) {
            return Err(EngineError::NotWorking(bucket));
        }
        if self.working_count() == 1 {
            return Err(EngineError::LastWorkingBucket(bucket));
        }
        if b == self.size - 1 && self.replacements.is_empty() {
            self.size -= 1;
        } else {
            let working = self.working_count();
            self.replacements.insert(
                b,
                Slot {
                    replacer: working - 1,
                    previous: self.last_removed,
                },
            );
        }
        self.last_removed = b;
        Ok(())
    }

    /// Restores the last removed bucket, or grows the b-array at the tail
    /// when nothing is removed. Returns the bucket that became working.
    pub fn add(&mut self) -> Result<BucketId, EngineError> {
        if self.replacements.is_empty() {
            let bucket = self.size;
            self.size = self
                .size
                .checked_add(1)
                .ok_or(EngineError::IdSpaceExhausted)?;
            self.last_removed = self.size;
            return Ok(BucketId(bucket));
        }
        let bucket = self.last_removed;
        let slot = self
            .replacements
            .remove(&bucket)
            .ok_or(EngineError::Corrupted(
                "last removed bucket has no replacement",
            ))?;
        self.last_removed = slot.previous;
        Ok(BucketId(bucket))
    }

    /// Maps `key` to a working bucket.
    #[inline]
    pub fn lookup(&self, key: KeyDigest) -> BucketId {
        self.lookup_with(key, &mut ())
            .expect("replacement chains of a validated state always terminate")
    }

    pub fn lookup_traced(&self, key: KeyDigest) -> (BucketId, LookupTrace) {
        let mut trace = LookupTrace::default();
        let bucket = self
            .lookup_with(key, &mut trace)
            .expect("replacement chains of a validated state always terminate");
        (bucket, trace)
    }

    /// Lookup reporting each step to `observer`.
    ///
    /// Both loops are capped at `n` iterations; exceeding the cap means the
    /// replacement table is corrupted.
    pub fn lookup_with<O: LookupObserver>(
        &self,
        key: KeyDigest,
        observer: &mut O,
    ) -> Result<BucketId, EngineError> {
        let mut b = jump_unchecked(key.0, self.size);
        observer.observe(LookupStep::Jump {
            bucket: BucketId(b),
            size: self.size,
        });
        if self.replacements.is_empty() {
            observer.observe(LookupStep::Done {
                bucket: BucketId(b),
            });
            return Ok(BucketId(b));
        }

        let mut passes = 0u32;
        while let Some(slot) = self.replacements.get(&b) {
            passes += 1;
            if passes > self.size {
                return Err(EngineError::Corrupted(
                    "external loop exceeded the b-array size",
                ));
            }
            let working = slot.replacer;
            if working == 0 {
                return Err(EngineError::Corrupted(
                    "replacement leaves no working bucket",
                ));
            }
            let mut d = (keyed_hash(key, BucketId(b)) % u64::from(working)) as u32;
            observer.observe(LookupStep::Rehash {
                from: BucketId(b),
                working,
                slot: BucketId(d),
            });

            let mut hops = 0u32;
            while let Some(next) = self.replacements.get(&d) {
                if next.replacer < working {
                    observer.observe(LookupStep::Halt {
                        at: BucketId(d),
                        replacer: BucketId(next.replacer),
                    });
                    break;
                }
                hops += 1;
                if hops > self.size {
                    return Err(EngineError::Corrupted(
                        "internal loop exceeded the b-array size",
                    ));
                }
                observer.observe(LookupStep::Hop {
                    from: BucketId(d),
                    to: BucketId(next.replacer),
                });
                d = next.replacer;
            }
            b = d;
        }
        observer.observe(LookupStep::Done {
            bucket: BucketId(b),
        });
        Ok(BucketId(b))
    }

    pub(crate) fn from_parts(
        size: u32,
        last_removed: u32,
        entries: impl IntoIterator<Item = Replacement>,
    ) -> Self {
        let replacements = entries
            .into_iter()
            .map(|r| {
                (
                    r.removed.0,
                    Slot {
                        replacer: r.replacer.0,
                        previous: r.previous.0,
                    },
                )
            })
            .collect();
        MementoState {
            size,
            last_removed,
            replacements,
        }
    }
}

impl PartialEq for MementoState {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.last_removed == other.last_removed
            && self.replacements == other.replacements
    }
}

impl Eq for MementoState {}
