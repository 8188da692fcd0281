//! Property checkers and the seeded suites that drive them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::log::{apply, Event, EventLog};
use super::naive::NaiveModel;
use super::stats::{binomial_sigma, chi_square_quantile, chi_square_statistic, Moments};
use super::OracleError;
use crate::engines::ConsistentHasher;
use crate::error::EngineError;
use crate::hashing::{mix64, BucketId, KeyDigest};
use crate::memento::MementoState;

/// One observed statistic compared against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub ok: bool,
    /// Informational measurements are reported but never fail the check.
    pub gating: bool,
}

impl Measurement {
    fn upper(name: &str, observed: f64, bound: f64) -> Self {
        Measurement {
            name: name.into(),
            observed,
            bound,
            ok: observed <= bound,
            gating: true,
        }
    }

    fn info(name: &str, observed: f64, bound: f64) -> Self {
        Measurement {
            name: name.into(),
            observed,
            bound,
            ok: observed.abs() <= bound,
            gating: false,
        }
    }
}

/// Everything needed to replay a failing case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub seed: u64,
    pub history: EventLog,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub histories: u64,
    /// Mutations checked; zero for checks on a single fixed state.
    pub events: u64,
    pub keys: u64,
    pub violations: u64,
    pub measurements: Vec<Measurement>,
    pub passed: bool,
    pub reproduction: Option<Reproduction>,
}

impl PropertyReport {
    fn new(property: &str, histories: u64, keys: u64) -> Self {
        PropertyReport {
            property: property.into(),
            histories,
            events: 0,
            keys,
            violations: 0,
            measurements: Vec::new(),
            passed: true,
            reproduction: None,
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.violations == 0 && self.measurements.iter().all(|m| m.ok || !m.gating);
        self
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }

    /// The report as a single JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// `count` uniformly random key digests from `seed`.
pub fn random_keys(seed: u64, count: usize) -> Vec<KeyDigest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| KeyDigest(rng.gen())).collect()
}

fn map_keys<E: ConsistentHasher + ?Sized>(engine: &E, keys: &[KeyDigest]) -> Vec<BucketId> {
    keys.iter().map(|&k| engine.lookup(k)).collect()
}

/// Keys whose mapping changed must be exactly the keys that were on
/// `removed`. Returns the violation count and how many keys moved.
fn disruption_violations(before: &[BucketId], after: &[BucketId], removed: BucketId) -> (u64, u64) {
    let mut violations = 0;
    let mut moved = 0;
    for (&b, &a) in before.iter().zip(after) {
        let changed = a != b;
        moved += u64::from(changed);
        if changed != (b == removed) || a == removed {
            violations += 1;
        }
    }
    (violations, moved)
}

/// Keys whose mapping changed must all land on `added`.
fn monotonicity_violations(before: &[BucketId], after: &[BucketId], added: BucketId) -> (u64, u64) {
    let mut violations = 0;
    let mut moved = 0;
    for (&b, &a) in before.iter().zip(after) {
        if a != b {
            moved += 1;
            violations += u64::from(a != added);
        }
    }
    (violations, moved)
}

fn z_score(moved: u64, trials: u64, p: f64) -> f64 {
    let sigma = binomial_sigma(trials, p);
    if sigma == 0.0 {
        0.0
    } else {
        (moved as f64 - trials as f64 * p) / sigma
    }
}

/// Removes `bucket` from `engine` and checks that exactly its keys moved.
/// The moved fraction is reported as a z-score against binomial(k, 1/w).
pub fn check_minimal_disruption<E: ConsistentHasher + ?Sized>(
    engine: &mut E,
    bucket: BucketId,
    keys: &[KeyDigest],
) -> Result<PropertyReport, EngineError> {
    let working = engine.working_count();
    let before = map_keys(engine, keys);
    engine.remove(bucket)?;
    let after = map_keys(engine, keys);
    let (violations, moved) = disruption_violations(&before, &after, bucket);
    let mut report = PropertyReport::new("minimal_disruption", 1, keys.len() as u64);
    report.events = 1;
    report.violations = violations;
    report.measurements.push(Measurement::info(
        "moved_fraction_z",
        z_score(moved, keys.len() as u64, 1.0 / f64::from(working)),
        3.0,
    ));
    Ok(report.finish())
}

/// Adds a bucket to `engine` and checks that every moved key landed on it.
pub fn check_monotonicity<E: ConsistentHasher + ?Sized>(
    engine: &mut E,
    keys: &[KeyDigest],
) -> Result<PropertyReport, EngineError> {
    let before = map_keys(engine, keys);
    let added = engine.add()?;
    let after = map_keys(engine, keys);
    let (violations, moved) = monotonicity_violations(&before, &after, added);
    let mut report = PropertyReport::new("monotonicity", 1, keys.len() as u64);
    report.events = 1;
    report.violations = violations;
    report.measurements.push(Measurement::info(
        "moved_fraction_z",
        z_score(
            moved,
            keys.len() as u64,
            1.0 / f64::from(engine.working_count()),
        ),
        3.0,
    ));
    Ok(report.finish())
}

/// Maps `k` seeded keys and checks every working bucket against
/// `k/w ± 6·√(k/w)` and the whole histogram against the 99.9% chi-square
/// quantile. Keys on a non-working bucket count as violations.
pub fn check_balance<E: ConsistentHasher + ?Sized>(
    engine: &E,
    k: usize,
    seed: u64,
) -> PropertyReport {
    let mut counts = vec![0u64; engine.id_bound() as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..k {
        counts[engine.lookup(KeyDigest(rng.gen())).index()] += 1;
    }
    let mut report = PropertyReport::new("balance", 1, k as u64);
    let mut working_counts = Vec::with_capacity(engine.working_count() as usize);
    for (bucket, &count) in counts.iter().enumerate() {
        if engine.is_working(BucketId(bucket as u32)) {
            working_counts.push(count);
        } else if count > 0 {
            report.violations += 1;
        }
    }
    let w = working_counts.len() as f64;
    let expected = k as f64 / w;
    let envelope = 6.0 * expected.sqrt();
    let max_dev = working_counts
        .iter()
        .map(|&c| (c as f64 - expected).abs())
        .fold(0.0, f64::max);
    report
        .measurements
        .push(Measurement::upper("max_abs_deviation", max_dev, envelope));
    if working_counts.len() > 1 {
        let chi = chi_square_statistic(&working_counts, expected);
        let quantile = chi_square_quantile(working_counts.len() as u64 - 1, 0.999);
        report
            .measurements
            .push(Measurement::upper("chi_square", chi, quantile));
    }
    report.finish()
}

/// Instrumented lookups of `k` seeded keys against the loop bounds, with
/// `L = ln(n/w)`:
///
/// * external iterations: mean ≤ 1 + L + 3·SE and sd ≤ √L + 3·SE;
/// * nested-loop work: mean ≤ (1 + L)² + 3·SE and sd ≤ (1 + L)^{3/2} + 3·SE.
///
/// A lookup that resolves on the first jump counts as one external
/// iteration.
pub fn check_iteration_bounds(state: &MementoState, k: usize, seed: u64) -> PropertyReport {
    let mut tau = Moments::default();
    let mut work = Moments::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..k {
        let (_, trace) = state.lookup_traced(KeyDigest(rng.gen()));
        tau.push(f64::from(trace.external_iterations.max(1)));
        work.push(f64::from(trace.product_work.max(1)));
    }
    let l = (f64::from(state.size()) / f64::from(state.working_count())).ln();
    let mut report = PropertyReport::new("iteration_bounds", 1, k as u64);
    report.measurements.push(Measurement::upper(
        "tau_mean",
        tau.mean(),
        1.0 + l + 3.0 * tau.std_error_of_mean(),
    ));
    report.measurements.push(Measurement::upper(
        "tau_std_dev",
        tau.std_dev(),
        l.sqrt() + 3.0 * tau.std_error_of_std_dev(),
    ));
    report.measurements.push(Measurement::upper(
        "work_mean",
        work.mean(),
        (1.0 + l).powi(2) + 3.0 * work.std_error_of_mean(),
    ));
    report.measurements.push(Measurement::upper(
        "work_std_dev",
        work.std_dev(),
        (1.0 + l).powf(1.5) + 3.0 * work.std_error_of_std_dev(),
    ));
    report.finish()
}

fn history_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(1)))
}

/// Differential check: every random log is replayed on the engine built by
/// `build` and on the naive model, and both must agree on every key.
pub fn run_equivalence<E, F>(
    build: F,
    histories: u64,
    max_size: u32,
    max_events: usize,
    keys_per_history: usize,
    seed: u64,
) -> Result<PropertyReport, OracleError>
where
    E: ConsistentHasher,
    F: Fn(u32) -> Result<E, EngineError>,
{
    let mut report = PropertyReport::new("equivalence", histories, keys_per_history as u64);
    for index in 0..histories {
        let case_seed = history_seed(seed, index);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let log = EventLog::random(&mut rng, max_size, max_events);
        let engine = log.replay_on(&build)?;
        report.events += log.mutations().len() as u64;
        let model = NaiveModel::replay(&log)?;
        let keys = random_keys(rng.gen(), keys_per_history);
        let mut first_bad = None;
        for &key in &keys {
            let (fast, slow) = (engine.lookup(key), model.lookup(key));
            if fast != slow {
                report.violations += 1;
                first_bad.get_or_insert((key, fast, slow));
            }
        }
        if let (Some((key, fast, slow)), None) = (first_bad, &report.reproduction) {
            report.reproduction = Some(Reproduction {
                seed: case_seed,
                history: log,
                note: format!("key {key}: engine {fast}, reference {slow}"),
            });
        }
    }
    Ok(report.finish())
}

/// Reports of one pass of [`run_history_properties`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySuite {
    pub disruption: PropertyReport,
    pub monotonicity: PropertyReport,
}

/// Replays seeded random histories step by step, checking minimal
/// disruption after every removal and monotonicity after every addition.
///
/// The moved-key counts of all additions are pooled into one binomial
/// z-score so the 3σ statistical check has a fixed false-failure rate for
/// the whole suite. Structural violations are exact.
pub fn run_history_properties<E, F>(
    build: F,
    histories: u64,
    max_size: u32,
    max_events: usize,
    keys_per_history: usize,
    seed: u64,
) -> Result<HistorySuite, OracleError>
where
    E: ConsistentHasher,
    F: Fn(u32) -> Result<E, EngineError>,
{
    let keys_u = keys_per_history as u64;
    let mut disruption = PropertyReport::new("minimal_disruption", histories, keys_u);
    let mut monotonicity = PropertyReport::new("monotonicity", histories, keys_u);
    let (mut removal_moved, mut removal_expected, mut removal_var) = (0u64, 0.0, 0.0);
    let (mut add_moved, mut add_expected, mut add_var) = (0u64, 0.0, 0.0);
    let (mut removals, mut adds) = (0u64, 0u64);

    for index in 0..histories {
        let case_seed = history_seed(seed, index);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let log = EventLog::random(&mut rng, max_size, max_events);
        let keys = random_keys(rng.gen(), keys_per_history);
        let mut engine = build(log.initial_size()?)?;
        let mut before = map_keys(&engine, &keys);

        for (step, &event) in log.mutations().iter().enumerate() {
            let working_before = engine.working_count();
            let added = match event {
                Event::Add => Some(engine.add()?),
                _ => {
                    apply(&mut engine, event)?;
                    None
                }
            };
            let after = map_keys(&engine, &keys);
            let (report, violations) = match (event, added) {
                (Event::Remove { bucket }, _) => {
                    let (violations, moved) = disruption_violations(&before, &after, bucket);
                    let p = 1.0 / f64::from(working_before);
                    removals += 1;
                    removal_moved += moved;
                    removal_expected += keys_u as f64 * p;
                    removal_var += keys_u as f64 * p * (1.0 - p);
                    (&mut disruption, violations)
                }
                (_, Some(bucket)) => {
                    let (violations, moved) = monotonicity_violations(&before, &after, bucket);
                    let p = 1.0 / f64::from(engine.working_count());
                    adds += 1;
                    add_moved += moved;
                    add_expected += keys_u as f64 * p;
                    add_var += keys_u as f64 * p * (1.0 - p);
                    (&mut monotonicity, violations)
                }
                _ => unreachable!("mutations are removals or additions"),
            };
            if violations > 0 {
                report.violations += violations;
                if report.reproduction.is_none() {
                    report.reproduction = Some(Reproduction {
                        seed: case_seed,
                        history: log.prefix(step + 2),
                        note: format!(
                            "{violations} keys violate the property after the last event"
                        ),
                    });
                }
            }
            before = after;
        }
    }

    let pooled_z = |moved: u64, expected: f64, var: f64| {
        if var == 0.0 {
            0.0
        } else {
            (moved as f64 - expected) / var.sqrt()
        }
    };
    disruption.events = removals;
    disruption.measurements.push(Measurement::info(
        "moved_fraction_z",
        pooled_z(removal_moved, removal_expected, removal_var),
        3.0,
    ));
    monotonicity.events = adds;
    let z = pooled_z(add_moved, add_expected, add_var);
    monotonicity.measurements.push(Measurement {
        gating: true,
        ..Measurement::info("moved_fraction_z", z, 3.0)
    });
    Ok(HistorySuite {
        disruption: disruption.finish(),
        monotonicity: monotonicity.finish(),
    })
}

/// Memento's entry count must equal the number of non-tail removals still
/// outstanding, at every step of every random history. The expected count
/// is derived from the naive model, not from the engine.
pub fn run_memory_accounting(
    histories: u64,
    max_size: u32,
    max_events: usize,
    seed: u64,
) -> Result<PropertyReport, OracleError> {
    let mut report = PropertyReport::new("memory_accounting", histories, 0);
    for index in 0..histories {
        let case_seed = history_seed(seed, index);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let log = EventLog::random(&mut rng, max_size, max_events);
        let n = log.initial_size()?;
        let mut state = MementoState::new(n)?;
        report.events += log.mutations().len() as u64;
        let mut model = NaiveModel::new(n)?;
        let mut outstanding = 0u64;
        for (step, &event) in log.mutations().iter().enumerate() {
            match event {
                Event::Remove { bucket } => {
                    let tail =
                        model.working_count() == model.size() && bucket.0 == model.size() - 1;
                    outstanding += u64::from(!tail);
                }
                _ => outstanding = outstanding.saturating_sub(1),
            }
            model.apply(event)?;
            apply(&mut state, event)?;
            let entries = state.memory().entries;
            if entries != outstanding {
                report.violations += 1;
                report.reproduction.get_or_insert_with(|| Reproduction {
                    seed: case_seed,
                    history: log.prefix(step + 2),
                    note: format!("{entries} entries, expected {outstanding}"),
                });
            }
        }
    }
    Ok(report.finish())
}

/// Balance of Memento at `size` buckets after removing
/// `floor(size * fraction)` random buckets.
pub fn run_balance(
    size: u32,
    removal_fraction: f64,
    k: usize,
    seed: u64,
) -> Result<PropertyReport, OracleError> {
    let state = random_removals(size, removal_fraction, seed)?;
    Ok(check_balance(&state, k, seed ^ 0xBA1A_9CE5))
}

/// Iteration bounds at `size` buckets for each removal fraction.
pub fn run_iteration_bounds(
    size: u32,
    fractions: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<PropertyReport>, OracleError> {
    fractions
        .iter()
        .map(|&fraction| {
            let state = random_removals(size, fraction, seed)?;
            let mut report = check_iteration_bounds(&state, k, seed ^ 0x17E2_A710);
            report.property = format!("iteration_bounds@{:.0}%", fraction * 100.0);
            Ok(report)
        })
        .collect()
}

/// A Memento state of `size` buckets with `floor(size * fraction)` buckets
/// removed in seeded random order.
pub fn random_removals(size: u32, fraction: f64, seed: u64) -> Result<MementoState, EngineError> {
    use rand::seq::SliceRandom;
    let mut state = MementoState::new(size)?;
    let mut order: Vec<u32> = (0..size).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let count = ((f64::from(size) * fraction) as usize).min(size as usize - 1);
    for &bucket in &order[..count] {
        state.remove(BucketId(bucket))?;
    }
    Ok(state)
}
