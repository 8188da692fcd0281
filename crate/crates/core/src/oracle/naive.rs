//! Reference model that keeps the b-array explicitly.
//!
//! Every position of the b-array is materialized. Removing a bucket out of
//! LIFO order overwrites each position holding it with the content of
//! position `w - 1`, and the model stores a copy of the dense prefix
//! `[0, w - 1)` taken right after the removal. A lookup that lands on a
//! removed bucket picks a position of that copy. Nothing here uses the
//! replacement table of [`MementoState`](crate::MementoState); all searches
//! are linear scans.

use super::log::{Event, EventLog};
use super::OracleError;
use crate::hashing::{jump, keyed_hash, BucketId, KeyDigest};

#[derive(Debug, Clone)]
struct Removal {
    bucket: BucketId,
    layout_before: Vec<BucketId>,
    dense_after: Vec<BucketId>,
}

#[derive(Debug, Clone)]
pub struct NaiveModel {
    size: u32,
    layout: Vec<BucketId>,
    removals: Vec<Removal>,
}

impl NaiveModel {
    pub fn new(size: u32) -> Result<Self, OracleError> {
        if size == 0 {
            return Err(OracleError::InvalidLog(
                "initial size must be positive".into(),
            ));
        }
        Ok(NaiveModel {
            size,
            layout: (0..size).map(BucketId).collect(),
            removals: Vec::new(),
        })
    }

    pub fn replay(log: &EventLog) -> Result<Self, OracleError> {
        let mut model = NaiveModel::new(log.initial_size()?)?;
        for &event in log.mutations() {
            model.apply(event)?;
        }
        Ok(model)
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn working_count(&self) -> u32 {
        self.size - self.removals.len() as u32
    }

    pub fn is_working(&self, bucket: BucketId) -> bool {
        bucket.0 < self.size && !self.removals.iter().any(|r| r.bucket == bucket)
    }

    pub fn working_buckets(&self) -> Vec<BucketId> {
        (0..self.size)
            .map(BucketId)
            .filter(|&b| self.is_working(b))
            .collect()
    }

    pub fn apply(&mut self, event: Event) -> Result<(), OracleError> {
        match event {
            Event::Init { .. } => Err(OracleError::InvalidLog("init may only appear first".into())),
            Event::Remove { bucket } => self.remove(bucket),
            Event::Add => {
                self.add();
                Ok(())
            }
        }
    }

    fn remove(&mut self, bucket: BucketId) -> Result<(), OracleError> {
        if !self.is_working(bucket) {
            return Err(OracleError::InvalidLog(format!(
                "bucket {bucket} is not working"
            )));
        }
        if self.working_count() == 1 {
            return Err(OracleError::InvalidLog(format!(
                "bucket {bucket} is the last working bucket"
            )));
        }
        if self.removals.is_empty() && bucket.0 == self.size - 1 {
            self.size -= 1;
            self.layout.pop();
            return Ok(());
        }
        let working = self.working_count() as usize;
        let layout_before = self.layout.clone();
        let filler = self.layout[working - 1];
        for slot in self.layout.iter_mut() {
            if *slot == bucket {
                *slot = filler;
            }
        }
        let dense_after = self.layout[..working - 1].to_vec();
        self.removals.push(Removal {
            bucket,
            layout_before,
            dense_after,
        });
        Ok(())
    }

    fn add(&mut self) -> BucketId {
        match self.removals.pop() {
            Some(removal) => {
                self.layout = removal.layout_before;
                removal.bucket
            }
            None => {
                let bucket = BucketId(self.size);
                self.layout.push(bucket);
                self.size += 1;
                bucket
            }
        }
    }

    pub fn lookup(&self, key: KeyDigest) -> BucketId {
        let mut bucket = jump(key, self.size).expect("size is positive");
        for _ in 0..=self.removals.len() {
            let Some(removal) = self.removals.iter().rev().find(|r| r.bucket == bucket) else {
                return bucket;
            };
            let slot = keyed_hash(key, bucket) % removal.dense_after.len() as u64;
            bucket = removal.dense_after[slot as usize];
        }
        panic!("reference lookup visited more removed buckets than exist");
    }
}

/// Looks `key` up in the cluster described by `log`.
pub fn naive_lookup(log: &EventLog, key: KeyDigest) -> Result<BucketId, OracleError> {
    Ok(NaiveModel::replay(log)?.lookup(key))
}
