//! Versioned text snapshot of a [`MementoState`].
//!
//! `{"version":1,"n":<int>,"l":<int>,"replacements":[[b,c,p],...]}`
//!
//! Entries may appear in any order. Loading rebuilds the removal stack from
//! `l` and rejects anything that removals and additions could not have
//! produced.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MementoState, Replacement};
use crate::hashing::BucketId;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("malformed snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("b-array size must be positive")]
    EmptyCluster,
    #[error("duplicate replacement for bucket {0}")]
    DuplicateBucket(u32),
    #[error("bucket {bucket} outside the b-array of size {size}")]
    OutOfRange { bucket: u32, size: u32 },
    #[error("last removed bucket {last} inconsistent with {entries} replacements and size {size}")]
    BadLastRemoved {
        last: u32,
        entries: usize,
        size: u32,
    },
    #[error("removal chain broken at bucket {0}")]
    BrokenChain(u32),
    #[error("replacement for bucket {bucket} has replacer {found}, expected {expected}")]
    InconsistentReplacer {
        bucket: u32,
        found: u32,
        expected: u32,
    },
    #[error("first removal must point back to the b-array size {size}, found {found}")]
    BadSentinel { found: u32, size: u32 },
    #[error("first removal of tail bucket {0} should have shrunk the b-array")]
    UnreachableTailEntry(u32),
}

#[derive(Serialize, Deserialize)]
struct SnapshotV1 {
    version: u32,
    n: u32,
    l: u32,
    replacements: Vec<[u32; 3]>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

impl MementoState {
    /// Serializes the state, entries listed oldest removal first.
    pub fn save_state(&self) -> Vec<u8> {
        let mut stack = self.removal_stack();
        stack.reverse();
        let snapshot = SnapshotV1 {
            version: SNAPSHOT_VERSION,
            n: self.size,
            l: self.last_removed,
            replacements: stack
                .iter()
                .map(|r| [r.removed.0, r.replacer.0, r.previous.0])
                .collect(),
        };
        serde_json::to_vec(&snapshot).expect("snapshot serialization cannot fail")
    }

    pub fn load_state(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let probe: VersionProbe = serde_json::from_slice(bytes)?;
        if probe.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(probe.version));
        }
        let snapshot: SnapshotV1 = serde_json::from_slice(bytes)?;
        validate(&snapshot)?;
        Ok(MementoState::from_parts(
            snapshot.n,
            snapshot.l,
            snapshot.replacements.iter().map(|&[b, c, p]| Replacement {
                removed: BucketId(b),
                replacer: BucketId(c),
                previous: BucketId(p),
            }),
        ))
    }
}

fn validate(snapshot: &SnapshotV1) -> Result<(), SnapshotError> {
    let size = snapshot.n;
    if size == 0 {
        return Err(SnapshotError::EmptyCluster);
    }
    let mut table: HashMap<u32, (u32, u32)> = HashMap::with_capacity(snapshot.replacements.len());
    for &[b, c, p] in &snapshot.replacements {
        if b >= size {
            return Err(SnapshotError::OutOfRange { bucket: b, size });
        }
        if table.insert(b, (c, p)).is_some() {
            return Err(SnapshotError::DuplicateBucket(b));
        }
    }

    let removed = table.len();
    let bad_last = SnapshotError::BadLastRemoved {
        last: snapshot.l,
        entries: removed,
        size,
    };
    if removed == 0 {
        return if snapshot.l == size {
            Ok(())
        } else {
            Err(bad_last)
        };
    }
    if snapshot.l >= size || removed >= size as usize {
        return Err(bad_last);
    }

    // Walk newest to oldest: the i-th step back left n - r + i working buckets.
    let working = size - removed as u32;
    let mut cursor = snapshot.l;
    for depth in 0..removed as u32 {
        let (replacer, previous) = table
            .remove(&cursor)
            .ok_or(SnapshotError::BrokenChain(cursor))?;
        let expected = working + depth;
        if replacer != expected {
            return Err(SnapshotError::InconsistentReplacer {
                bucket: cursor,
                found: replacer,
                expected,
            });
        }
        if depth + 1 == removed as u32 {
            if previous != size {
                return Err(SnapshotError::BadSentinel {
                    found: previous,
                    size,
                });
            }
            if cursor == size - 1 {
                return Err(SnapshotError::UnreachableTailEntry(cursor));
            }
        }
        cursor = previous;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::KeyDigest;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn load(text: &str) -> Result<MementoState, SnapshotError> {
        MementoState::load_state(text.as_bytes())
    }

    #[test]
    fn empty_state_round_trip() {
        let s = MementoState::new(5).unwrap();
        let bytes = s.save_state();
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            r#"{"version":1,"n":5,"l":5,"replacements":[]}"#
        );
        let loaded = MementoState::load_state(&bytes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let key = KeyDigest(rng.gen());
            assert_eq!(loaded.lookup(key), s.lookup(key));
        }
    }

    #[test]
    fn worked_state_round_trip() {
        let mut s = MementoState::new(10).unwrap();
        for b in [9, 5, 1] {
            s.remove(BucketId(b)).unwrap();
        }
        let text = String::from_utf8(s.save_state()).unwrap();
        assert_eq!(
            text,
            r#"{"version":1,"n":9,"l":1,"replacements":[[5,8,9],[1,7,5]]}"#
        );
        let loaded = load(&text).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.size(), 9);
        assert_eq!(loaded.last_removed(), BucketId(1));
    }

    #[test]
    fn entries_in_any_order() {
        let loaded = load(r#"{"version":1,"n":9,"l":1,"replacements":[[1,7,5],[5,8,9]]}"#).unwrap();
        assert_eq!(loaded.working_count(), 7);
    }

    #[test]
    fn rejects_duplicates() {
        let err =
            load(r#"{"version":1,"n":9,"l":5,"replacements":[[5,8,9],[5,8,9]]}"#).unwrap_err();
        assert!(matches!(err, SnapshotError::DuplicateBucket(5)));
    }

    #[test]
    fn rejects_unknown_version() {
        let err = load(r#"{"version":2,"n":9,"l":9,"replacements":[]}"#).unwrap_err();
        assert!(matches!(err, SnapshotError::UnsupportedVersion(2)));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(load("{"), Err(SnapshotError::Malformed(_))));
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":9,"replacements":[[1,2]]}"#),
            Err(SnapshotError::Malformed(_))
        ));
    }

    #[test]
    fn rejects_inconsistent_entries() {
        // wrong replacer
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":1,"replacements":[[5,8,9],[1,6,5]]}"#),
            Err(SnapshotError::InconsistentReplacer {
                bucket: 1,
                found: 6,
                expected: 7
            })
        ));
        // chain skips an entry
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":1,"replacements":[[5,8,9],[1,7,9]]}"#),
            Err(SnapshotError::BrokenChain(9))
        ));
        // l not removed
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":2,"replacements":[[5,8,9],[1,7,5]]}"#),
            Err(SnapshotError::BrokenChain(2))
        ));
        // l must equal n when nothing is removed
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":3,"replacements":[]}"#),
            Err(SnapshotError::BadLastRemoved { .. })
        ));
        // first removal at the tail would have shrunk the array
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":8,"replacements":[[8,8,9]]}"#),
            Err(SnapshotError::UnreachableTailEntry(8))
        ));
        assert!(matches!(
            load(r#"{"version":1,"n":0,"l":0,"replacements":[]}"#),
            Err(SnapshotError::EmptyCluster)
        ));
        assert!(matches!(
            load(r#"{"version":1,"n":9,"l":1,"replacements":[[5,8,9],[12,7,5]]}"#),
            Err(SnapshotError::OutOfRange {
                bucket: 12,
                size: 9
            })
        ));
    }

    #[test]
    fn self_replacement_round_trip() {
        let mut s = MementoState::new(3).unwrap();
        s.remove(BucketId(0)).unwrap();
        s.remove(BucketId(1)).unwrap();
        let loaded = MementoState::load_state(&s.save_state()).unwrap();
        assert_eq!(loaded, s);
    }
}
