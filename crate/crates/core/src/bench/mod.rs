//! Desk-scale evaluation scenarios: stable clusters, one-shot and
//! incremental removals, and the capacity-ratio sweep. Every figure except
//! wall-clock latency is reproducible from the seed.

use std::fmt;
use std::hint::black_box;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::{Algorithm, AnyEngine, ConsistentHasher, MemoryUsage};
use crate::error::EngineError;
use crate::hashing::{BucketId, KeyDigest};

/// Removal fractions swept by the incremental scenario.
pub const INCREMENTAL_FRACTIONS: [f64; 18] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80,
    0.85, 0.90,
];
/// Capacity ratios swept by the sensitivity scenario.
pub const SENSITIVITY_RATIOS: [u32; 5] = [5, 10, 20, 50, 100];
pub const DEFAULT_KEYS: usize = 100_000;
pub const DEFAULT_REPETITIONS: u32 = 5;
pub const DEFAULT_CAPACITY_RATIO: u32 = 10;

const TIMING_BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Stable,
    Oneshot,
    Incremental,
    Sensitivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalOrder {
    Lifo,
    Random,
}

macro_rules! text_enum {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
    };
}

text_enum!(Scenario, Stable => "stable", Oneshot => "oneshot", Incremental => "incremental", Sensitivity => "sensitivity");
text_enum!(RemovalOrder, Lifo => "lifo", Random => "random");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub algorithms: Vec<Algorithm>,
    pub initial_size: u32,
    /// Used by the one-shot scenario; stable ignores it and the sweeps
    /// supply their own grids.
    pub removal_fraction: f64,
    pub removal_order: RemovalOrder,
    pub capacity_ratio: u32,
    pub key_count: usize,
    pub seed: u64,
    pub repetitions: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Stable,
            algorithms: Algorithm::ALL.to_vec(),
            initial_size: 10_000,
            removal_fraction: 0.9,
            removal_order: RemovalOrder::Lifo,
            capacity_ratio: DEFAULT_CAPACITY_RATIO,
            key_count: DEFAULT_KEYS,
            seed: 0,
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let invalid = |msg: String| Err(BenchError::InvalidConfig(msg));
        if self.algorithms.is_empty() {
            return invalid("at least one algorithm is required".into());
        }
        if self.initial_size == 0 {
            return invalid("initial size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.removal_fraction) {
            return invalid(format!(
                "removal fraction {} is outside [0, 1)",
                self.removal_fraction
            ));
        }
        if self.capacity_ratio < 1 {
            return invalid("capacity ratio must be at least 1".into());
        }
        if self.key_count == 0 || self.repetitions == 0 {
            return invalid("key count and repetitions must be positive".into());
        }
        let removes = self.scenario != Scenario::Stable;
        if removes && self.removal_order == RemovalOrder::Random {
            if let Some(alg) = self
                .algorithms
                .iter()
                .find(|a| !a.supports_random_removal())
            {
                return invalid(format!(
                    "{alg} can only remove the last bucket; use --order lifo"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    LookupNsMedian,
    LookupNsP99,
    ExtIterMean,
    IntIterMean,
    MemoryEntries,
    MemoryBytesEst,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::LookupNsMedian,
        Metric::LookupNsP99,
        Metric::ExtIterMean,
        Metric::IntIterMean,
        Metric::MemoryEntries,
        Metric::MemoryBytesEst,
    ];

    pub fn unit(self) -> &'static str {
        match self {
            Metric::LookupNsMedian | Metric::LookupNsP99 => "ns",
            Metric::ExtIterMean | Metric::IntIterMean => "iterations",
            Metric::MemoryEntries => "entries",
            Metric::MemoryBytesEst => "bytes",
        }
    }
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub algorithm: Algorithm,
    pub scenario: Scenario,
    pub w_initial: u32,
    pub removed_count: u32,
    pub removal_order: RemovalOrder,
    /// Only set for capacity-bound engines.
    pub capacity_ratio: Option<u32>,
    pub metric: Metric,
    pub value: f64,
    pub unit: String,
    pub seed: u64,
    pub repetition: u32,
}

/// Per-lookup timing of one pass over the keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latency {
    pub median_ns: f64,
    pub p99_ns: f64,
}

/// Mean loop counters over a key set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMeans {
    pub outer: f64,
    pub inner: f64,
    pub work: f64,
}

/// Times batches of lookups with the monotonic clock after one discarded
/// warmup pass. Returns the per-lookup median and 99th percentile over all
/// batches of all repetitions.
pub fn measure_lookup_latency<E: ConsistentHasher + ?Sized>(
    engine: &E,
    keys: &[KeyDigest],
    repetitions: u32,
) -> Latency {
    for &key in keys {
        black_box(engine.lookup(black_box(key)));
    }
    let mut samples = Vec::with_capacity(keys.len().div_ceil(TIMING_BATCH) * repetitions as usize);
    for _ in 0..repetitions.max(1) {
        for batch in keys.chunks(TIMING_BATCH) {
            let start = Instant::now();
            for &key in batch {
                black_box(engine.lookup(black_box(key)));
            }
            samples.push(start.elapsed().as_nanos() as f64 / batch.len() as f64);
        }
    }
    samples.sort_by(f64::total_cmp);
    Latency {
        median_ns: percentile(&samples, 0.5),
        p99_ns: percentile(&samples, 0.99),
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

pub fn measure_memory<E: ConsistentHasher + ?Sized>(engine: &E) -> MemoryUsage {
    engine.memory()
}

pub fn measure_iterations<E: ConsistentHasher + ?Sized>(
    engine: &E,
    keys: &[KeyDigest],
) -> IterationMeans {
    let (mut outer, mut inner) = (0u64, 0u64);
    for &key in keys {
        let (_, counts) = engine.lookup_counted(key);
        outer += u64::from(counts.outer);
        inner += u64::from(counts.inner);
    }
    let n = keys.len().max(1) as f64;
    IterationMeans {
        outer: outer as f64 / n,
        inner: inner as f64 / n,
        work: (outer + inner) as f64 / n,
    }
}

/// The order in which `w` initial buckets are removed: highest first for
/// LIFO, a seeded shuffle otherwise. Every algorithm sees the same order.
pub fn removal_sequence(w: u32, order: RemovalOrder, seed: u64) -> Vec<BucketId> {
    let mut buckets: Vec<BucketId> = (0..w).rev().map(BucketId).collect();
    if order == RemovalOrder::Random {
        buckets.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    buckets
}

fn removal_count(w: u32, fraction: f64) -> u32 {
    ((f64::from(w) * fraction).round() as u32).min(w - 1)
}

struct Point {
    algorithm: Algorithm,
    ratio: u32,
    removed: u32,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<MetricRecord>, BenchError> {
    run_scenario_with_progress(config, |_| {})
}

/// Like [`run_scenario`], reporting a line per measured point to `progress`.
pub fn run_scenario_with_progress(
    config: &ScenarioConfig,
    mut progress: impl FnMut(&str),
) -> Result<Vec<MetricRecord>, BenchError> {
    config.validate()?;
    let w = config.initial_size;
    let one_shot = [removal_count(w, config.removal_fraction)];
    let sweep: Vec<u32> = INCREMENTAL_FRACTIONS
        .iter()
        .map(|&f| removal_count(w, f))
        .collect();
    let removal_points: &[u32] = match config.scenario {
        Scenario::Stable | Scenario::Sensitivity => &[0],
        Scenario::Oneshot => &one_shot,
        Scenario::Incremental => &sweep,
    };
    let mut points = Vec::new();
    for &algorithm in &config.algorithms {
        let ratios: &[u32] = match (config.scenario, algorithm.is_capacity_bound()) {
            (Scenario::Sensitivity, true) => &SENSITIVITY_RATIOS,
            _ => std::slice::from_ref(&config.capacity_ratio),
        };
        for &ratio in ratios {
            for &removed in removal_points {
                points.push(Point {
                    algorithm,
                    ratio,
                    removed,
                });
            }
        }
    }

    let order = if config.scenario == Scenario::Stable {
        RemovalOrder::Lifo
    } else {
        config.removal_order
    };
    let sequence = removal_sequence(w, order, config.seed);
    let mut records = Vec::new();
    for point in &points {
        let mut engine = AnyEngine::build(point.algorithm, w, point.ratio)?;
        for &bucket in &sequence[..point.removed as usize] {
            engine.remove(bucket)?;
        }
        let iterations = measure_iterations(&engine, &random_keys(config.seed, config.key_count));
        let memory = measure_memory(&engine);
        for repetition in 0..config.repetitions {
            let keys = random_keys(
                config.seed ^ (u64::from(repetition + 1) << 32),
                config.key_count,
            );
            let latency = measure_lookup_latency(&engine, &keys, 1);
            let values = [
                latency.median_ns,
                latency.p99_ns,
                iterations.outer,
                iterations.inner,
                memory.entries as f64,
                memory.bytes as f64,
            ];
            for (metric, value) in Metric::ALL.into_iter().zip(values) {
                records.push(MetricRecord {
                    algorithm: point.algorithm,
                    scenario: config.scenario,
                    w_initial: w,
                    removed_count: point.removed,
                    removal_order: order,
                    capacity_ratio: point.algorithm.is_capacity_bound().then_some(point.ratio),
                    metric,
                    value,
                    unit: metric.unit().into(),
                    seed: config.seed,
                    repetition,
                });
            }
        }
        progress(&format!(
            "{} removed={} ratio={} ext_iter_mean={:.3} entries={}",
            point.algorithm, point.removed, point.ratio, iterations.outer, memory.entries
        ));
    }
    Ok(records)
}

fn random_keys(seed: u64, count: usize) -> Vec<KeyDigest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| KeyDigest(rng.gen())).collect()
}

const HEADER: [&str; 11] = [
    "algorithm",
    "scenario",
    "w_initial",
    "removed_count",
    "removal_order",
    "capacity_ratio",
    "metric",
    "value",
    "unit",
    "seed",
    "repetition",
];

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Writes a header and one row per record; returns the bytes written.
pub fn emit_csv<W: Write>(records: &[MetricRecord], destination: W) -> Result<u64, BenchError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Counting {
            inner: destination,
            written: 0,
        });
    writer.write_record(HEADER)?;
    for record in records {
        writer.serialize(record)?;
    }
    let counting = writer
        .into_inner()
        .map_err(|e| BenchError::Io(e.into_error()))?;
    Ok(counting.written)
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<MetricRecord>, BenchError> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(BenchError::InvalidConfig(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scenario: Scenario, algorithms: &[Algorithm]) -> ScenarioConfig {
        ScenarioConfig {
            scenario,
            algorithms: algorithms.to_vec(),
            initial_size: 1_000,
            key_count: 2_000,
            repetitions: 2,
            seed: 7,
            ..ScenarioConfig::default()
        }
    }

    fn values(records: &[MetricRecord], alg: Algorithm, metric: Metric) -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.algorithm == alg && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    #[test]
    fn validation_rules() {
        let mut c = config(Scenario::Oneshot, &[Algorithm::Jump]);
        c.removal_order = RemovalOrder::Random;
        assert!(c.validate().is_err());
        c.scenario = Scenario::Stable;
        assert!(c.validate().is_ok());
        let mut c = config(Scenario::Oneshot, &[Algorithm::Memento]);
        c.removal_fraction = 1.0;
        assert!(c.validate().is_err());
        c.removal_fraction = 0.5;
        c.capacity_ratio = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn stable_memento_has_no_entries() {
        let records = run_scenario(&config(
            Scenario::Stable,
            &[Algorithm::Memento, Algorithm::Jump],
        ))
        .unwrap();
        assert_eq!(records.len(), 2 * 2 * Metric::ALL.len());
        assert!(values(&records, Algorithm::Memento, Metric::MemoryEntries)
            .iter()
            .all(|&v| v == 0.0));
        assert!(values(&records, Algorithm::Jump, Metric::MemoryEntries)
            .iter()
            .all(|&v| v == 1.0));
        assert!(records
            .iter()
            .all(|r| r.value >= 0.0 && r.capacity_ratio.is_none()));
    }

    #[test]
    fn oneshot_memory() {
        let lifo = run_scenario(&config(Scenario::Oneshot, &[Algorithm::Memento])).unwrap();
        assert!(values(&lifo, Algorithm::Memento, Metric::MemoryEntries)
            .iter()
            .all(|&v| v == 0.0));
        let mut c = config(Scenario::Oneshot, &[Algorithm::Memento, Algorithm::Anchor]);
        c.removal_order = RemovalOrder::Random;
        let random = run_scenario(&c).unwrap();
        assert!(values(&random, Algorithm::Memento, Metric::MemoryEntries)
            .iter()
            .all(|&v| v == 900.0));
        assert!(values(&random, Algorithm::Anchor, Metric::MemoryEntries)
            .iter()
            .all(|&v| v == 50_000.0));
    }

    #[test]
    fn incremental_sweeps_fractions() {
        let mut c = config(Scenario::Incremental, &[Algorithm::Memento]);
        c.repetitions = 1;
        let records = run_scenario(&c).unwrap();
        let mut removed: Vec<u32> = records.iter().map(|r| r.removed_count).collect();
        removed.dedup();
        assert_eq!(removed.len(), 18);
        assert_eq!((removed[0], removed[17]), (50, 900));
    }

    #[test]
    fn sensitivity_sweeps_ratios() {
        let mut c = config(
            Scenario::Sensitivity,
            &[Algorithm::Anchor, Algorithm::Dx, Algorithm::Memento],
        );
        c.repetitions = 1;
        let records = run_scenario(&c).unwrap();
        for alg in [Algorithm::Anchor, Algorithm::Dx] {
            let mut ratios: Vec<u32> = records
                .iter()
                .filter(|r| r.algorithm == alg)
                .filter_map(|r| r.capacity_ratio)
                .collect();
            ratios.dedup();
            assert_eq!(ratios, SENSITIVITY_RATIOS);
        }
        assert_eq!(
            values(&records, Algorithm::Memento, Metric::MemoryEntries).len(),
            1
        );
    }

    #[test]
    fn counters_are_deterministic() {
        let mut c = config(Scenario::Oneshot, &[Algorithm::Memento, Algorithm::Dx]);
        c.removal_order = RemovalOrder::Random;
        let strip = |records: Vec<MetricRecord>| -> Vec<MetricRecord> {
            records.into_iter().filter(|r| r.unit != "ns").collect()
        };
        assert_eq!(
            strip(run_scenario(&c).unwrap()),
            strip(run_scenario(&c).unwrap())
        );
    }

    #[test]
    fn removal_sequences() {
        assert_eq!(
            removal_sequence(3, RemovalOrder::Lifo, 0),
            vec![BucketId(2), BucketId(1), BucketId(0)]
        );
        let a = removal_sequence(100, RemovalOrder::Random, 4);
        assert_eq!(a, removal_sequence(100, RemovalOrder::Random, 4));
        assert_ne!(a, removal_sequence(100, RemovalOrder::Random, 5));
    }

    #[test]
    fn csv_header_only_and_row_count() {
        let mut out = Vec::new();
        let bytes = emit_csv(&[], &mut out).unwrap();
        assert_eq!(bytes as usize, out.len());
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "algorithm,scenario,w_initial,removed_count,removal_order,capacity_ratio,metric,value,unit,seed,repetition\n"
        );
        let records: Vec<MetricRecord> =
            run_scenario(&config(Scenario::Stable, &[Algorithm::Anchor]))
                .unwrap()
                .into_iter()
                .take(3)
                .collect();
        let mut out = Vec::new();
        emit_csv(&records, &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("anchor,stable,1000,0,lifo,10,lookup_ns_median,"));
        assert_eq!(read_csv(out.as_slice()).unwrap(), records);
    }

    #[test]
    fn csv_quotes_fields() {
        let mut out = Vec::new();
        let record = MetricRecord {
            algorithm: Algorithm::Jump,
            scenario: Scenario::Stable,
            w_initial: 1,
            removed_count: 0,
            removal_order: RemovalOrder::Lifo,
            capacity_ratio: None,
            metric: Metric::MemoryBytesEst,
            value: 4.0,
            unit: "bytes, est".into(),
            seed: 0,
            repetition: 0,
        };
        emit_csv(std::slice::from_ref(&record), &mut out).unwrap();
        assert!(String::from_utf8(out.clone())
            .unwrap()
            .contains("\"bytes, est\""));
        assert_eq!(read_csv(out.as_slice()).unwrap(), vec![record]);
    }
}
