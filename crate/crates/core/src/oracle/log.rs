use rand::Rng;
use serde::{Deserialize, Serialize};

use super::naive::NaiveModel;
use super::OracleError;
use crate::engines::ConsistentHasher;
use crate::error::EngineError;
use crate::hashing::BucketId;
use crate::memento::MementoState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Event {
    Init { n: u32 },
    Remove { bucket: BucketId },
    Add,
}

/// Full mutation history of a cluster, starting with exactly one `Init`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new(initial_size: u32) -> Self {
        EventLog {
            events: vec![Event::Init { n: initial_size }],
        }
    }

    pub fn from_events(events: Vec<Event>) -> Result<Self, OracleError> {
        let log = EventLog { events };
        NaiveModel::replay(&log)?;
        Ok(log)
    }

    pub fn remove(mut self, bucket: u32) -> Self {
        self.events.push(Event::Remove {
            bucket: BucketId(bucket),
        });
        self
    }

    pub fn add(mut self) -> Self {
        self.events.push(Event::Add);
        self
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events after the leading `Init`.
    pub fn mutations(&self) -> &[Event] {
        self.events.get(1..).unwrap_or(&[])
    }

    pub fn initial_size(&self) -> Result<u32, OracleError> {
        match self.events.first() {
            Some(Event::Init { n }) => Ok(*n),
            _ => Err(OracleError::InvalidLog("log must start with init".into())),
        }
    }

    pub fn prefix(&self, len: usize) -> EventLog {
        EventLog {
            events: self.events[..len.min(self.events.len())].to_vec(),
        }
    }

    /// Replays the log on a fresh Memento state.
    pub fn replay(&self) -> Result<MementoState, OracleError> {
        self.replay_on(MementoState::new)
    }

    /// Replays the log on an engine produced by `build(initial_size)`.
    pub fn replay_on<E, F>(&self, build: F) -> Result<E, OracleError>
    where
        E: ConsistentHasher,
        F: FnOnce(u32) -> Result<E, EngineError>,
    {
        let mut engine = build(self.initial_size()?)?;
        for event in self.mutations() {
            apply(&mut engine, *event)?;
        }
        Ok(engine)
    }

    /// A random valid history: initial size in `[1, max_size]` and up to
    /// `max_events` removals and additions. About a fifth of the removals
    /// target the highest working bucket so the tail-shrink path is covered.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_size: u32, max_events: usize) -> EventLog {
        let n = rng.gen_range(1..=max_size.max(1));
        let mut log = EventLog::new(n);
        let mut model = NaiveModel::new(n).expect("positive size");
        let events = rng.gen_range(0..=max_events);
        for _ in 0..events {
            let working = model.working_buckets();
            let event = if working.len() > 1 && rng.gen_bool(0.6) {
                let bucket = if rng.gen_bool(0.2) {
                    *working.last().expect("non-empty")
                } else {
                    working[rng.gen_range(0..working.len())]
                };
                Event::Remove { bucket }
            } else {
                Event::Add
            };
            model.apply(event).expect("generated events are valid");
            log.push(event);
        }
        log
    }
}

pub(crate) fn apply<E: ConsistentHasher + ?Sized>(
    engine: &mut E,
    event: Event,
) -> Result<(), OracleError> {
    match event {
        Event::Init { .. } => Err(OracleError::InvalidLog("init may only appear first".into())),
        Event::Remove { bucket } => Ok(engine.remove(bucket)?),
        Event::Add => engine.add().map(|_| ()).map_err(OracleError::from),
    }
}
