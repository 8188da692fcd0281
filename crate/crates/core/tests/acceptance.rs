//! Acceptance suite: one pass/fail line per criterion, each checked at its
//! stated tolerance and time budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mementohash::bench::{measure_iterations, removal_sequence, RemovalOrder};
use mementohash::oracle::stats::binomial_sigma;
use mementohash::oracle::{
    random_keys, run_balance, run_equivalence, run_history_properties, run_iteration_bounds,
    run_memory_accounting, EventLog, HistorySuite, PropertyReport,
};
use mementohash::{
    jump, Algorithm, AnyEngine, BucketId, ConsistentHasher, JumpEngine, MementoState, Replacement,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_101;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn from_report(report: &PropertyReport) -> Outcome {
    let mut detail = format!("{} events, {} violations", report.events, report.violations);
    for m in &report.measurements {
        detail.push_str(&format!(
            ", {}={:.4} (bound {:.4})",
            m.name, m.observed, m.bound
        ));
    }
    if let Some(repro) = &report.reproduction {
        detail.push_str(&format!(", reproduce with seed {}", repro.seed));
    }
    outcome(report.passed, detail)
}

fn replacement(removed: u32, replacer: u32, previous: u32) -> Replacement {
    Replacement {
        removed: BucketId(removed),
        replacer: BucketId(replacer),
        previous: BucketId(previous),
    }
}

fn worked_example() -> Outcome {
    let mut state = MementoState::new(10).unwrap();
    for b in [9, 5, 1] {
        state.remove(BucketId(b)).unwrap();
    }
    let stack = state.removal_stack();
    let first = stack == [replacement(1, 7, 5), replacement(5, 8, 9)]
        && state.last_removed() == BucketId(1)
        && state.working_count() == 7
        && state.size() == 9;
    state.remove(BucketId(8)).unwrap();
    let second = state.replacement(BucketId(8)) == Some(replacement(8, 6, 1))
        && state.replacement(BucketId(5)).map(|r| r.replacer) == Some(BucketId(8))
        && state.last_removed() == BucketId(8);
    outcome(
        first && second,
        format!(
            "R after 9,5,1 = {stack:?}; chain 5 -> 8 -> 6 {}",
            if second { "present" } else { "missing" }
        ),
    )
}

fn six_bucket_distribution() -> Outcome {
    let mut state = MementoState::new(6).unwrap();
    for b in [0, 3, 5] {
        state.remove(BucketId(b)).unwrap();
    }
    let k = 1_000_000;
    let mut counts = [0u64; 6];
    for key in random_keys(SEED, k) {
        counts[state.lookup(key).index()] += 1;
    }
    let expected = k as f64 / 3.0;
    let tolerance = 6.0 * binomial_sigma(k as u64, 1.0 / 3.0);
    let ok = [1, 2, 4]
        .iter()
        .all(|&b| (counts[b] as f64 - expected).abs() <= tolerance)
        && [0, 3, 5].iter().all(|&b| counts[b] == 0);
    outcome(
        ok,
        format!("counts {counts:?}, expected {expected:.0} ± {tolerance:.0}"),
    )
}

fn jump_equivalence() -> Outcome {
    let keys = random_keys(SEED + 3, 100_000);
    let mut states: Vec<MementoState> = [1, 2, 10, 1_000, 65_536, 1_000_000]
        .iter()
        .map(|&n| MementoState::new(n).unwrap())
        .collect();
    let mut regrown = EventLog::new(10)
        .remove(9)
        .remove(8)
        .add()
        .replay()
        .unwrap();
    regrown.add().unwrap();
    states.push(regrown);
    let mut cleared = EventLog::new(20)
        .remove(3)
        .remove(11)
        .add()
        .add()
        .replay()
        .unwrap();
    cleared.add().unwrap();
    states.push(cleared);
    let mut mismatches = 0;
    for state in &states {
        assert_eq!(state.removed_count(), 0);
        mismatches += keys
            .iter()
            .filter(|&&k| state.lookup(k) != jump(k, state.size()).unwrap())
            .count();
    }
    outcome(
        mismatches == 0,
        format!(
            "{} states x {} keys, {mismatches} mismatches",
            states.len(),
            keys.len()
        ),
    )
}

fn history_suite() -> HistorySuite {
    run_history_properties(MementoState::new, 1_000, 64, 32, 10_000, SEED + 4).unwrap()
}

fn balance() -> Outcome {
    from_report(&run_balance(10_000, 0.2, 1_000_000, SEED + 6).unwrap())
}

fn external_loop_bound() -> Outcome {
    let reports = run_iteration_bounds(1_000, &[0.2, 0.5, 0.65, 0.9], 100_000, SEED + 7).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for report in &reports {
        for name in ["tau_mean", "tau_std_dev"] {
            let m = report.measurement(name).unwrap();
            passed &= m.ok;
            detail.push(format!(
                "{} {name}={:.3}<={:.3}",
                report.property, m.observed, m.bound
            ));
        }
    }
    outcome(passed, detail.join(", "))
}

fn differential_oracle() -> Outcome {
    from_report(&run_equivalence(MementoState::new, 1_000, 32, 20, 10_000, SEED + 8).unwrap())
}

fn memory_scaling() -> Outcome {
    let memento = run_memory_accounting(1_000, 64, 40, SEED + 9).unwrap();

    let mut jump_engine = JumpEngine::new(1_000_000).unwrap();
    let mut jump_constant = jump_engine.memory().entries == 1;
    for _ in 0..1_000 {
        jump_engine.remove_tail().unwrap();
        jump_constant &= jump_engine.memory().entries == 1;
    }

    let w = 1_000;
    let mut per_slot = Vec::new();
    for ratio in [5, 10, 20, 50, 100] {
        for alg in [Algorithm::Anchor, Algorithm::Dx] {
            let mut engine = AnyEngine::build(alg, w, ratio).unwrap();
            let before = engine.memory().entries;
            for b in (0..w).step_by(3) {
                engine.remove(BucketId(b)).unwrap();
            }
            let a = f64::from(engine.capacity().unwrap());
            per_slot.push((
                alg,
                before == engine.memory().entries,
                engine.memory().entries as f64 / a,
            ));
        }
    }
    let proportional = [Algorithm::Anchor, Algorithm::Dx].iter().all(|&alg| {
        let ratios: Vec<f64> = per_slot
            .iter()
            .filter(|p| p.0 == alg)
            .map(|p| p.2)
            .collect();
        ratios.iter().all(|&r| r == ratios[0])
    }) && per_slot.iter().all(|p| p.1);
    outcome(
        memento.passed && jump_constant && proportional,
        format!(
            "memento {} step violations; jump constant {jump_constant}; anchor/dx entries per slot constant {proportional}",
            memento.violations
        ),
    )
}

fn mean_work(alg: Algorithm, removed_fraction: f64) -> f64 {
    let w = 10_000;
    let mut engine = AnyEngine::build(alg, w, 10).unwrap();
    let count = (f64::from(w) * removed_fraction).round() as usize;
    for &b in &removal_sequence(w, RemovalOrder::Random, SEED + 10)[..count] {
        engine.remove(b).unwrap();
    }
    measure_iterations(&engine, &random_keys(SEED + 11, 100_000)).work
}

fn trend() -> Outcome {
    let (memento_20, dx_20) = (
        mean_work(Algorithm::Memento, 0.2),
        mean_work(Algorithm::Dx, 0.2),
    );
    let (memento_65, anchor_65) = (
        mean_work(Algorithm::Memento, 0.65),
        mean_work(Algorithm::Anchor, 0.65),
    );
    outcome(
        memento_20 < dx_20 && memento_65 <= 2.0 * anchor_65,
        format!(
            "20%: memento {memento_20:.3} vs dx {dx_20:.3}; 65%: memento {memento_65:.3} vs anchor {anchor_65:.3}"
        ),
    )
}

fn snapshot_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 12);
    let mut mismatches = 0;
    let mut errors = 0;
    for i in 0..1_000u64 {
        let log = EventLog::random(&mut rng, 1_000, 300);
        let state = log.replay().unwrap();
        match MementoState::load_state(&state.save_state()) {
            Ok(loaded) => {
                mismatches += random_keys(SEED ^ i, 1_000)
                    .iter()
                    .filter(|&&k| loaded.lookup(k) != state.lookup(k))
                    .count();
            }
            Err(_) => errors += 1,
        }
    }
    outcome(
        mismatches == 0 && errors == 0,
        format!("1000 states, {errors} load errors, {mismatches} mismatches"),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, Duration, Duration)> = Vec::new();
    let secs = Duration::from_secs;

    let (o, t) = timed(worked_example);
    results.push((
        1,
        "worked-example conformance",
        o,
        t,
        Duration::from_millis(1),
    ));
    let (o, t) = timed(six_bucket_distribution);
    results.push((2, "six-bucket distribution", o, t, secs(5)));
    let (o, t) = timed(jump_equivalence);
    results.push((3, "jump equivalence", o, t, secs(1)));
    let (suite, t) = timed(history_suite);
    results.push((
        4,
        "minimal disruption",
        from_report(&suite.disruption),
        t,
        secs(60),
    ));
    results.push((
        5,
        "monotonicity",
        from_report(&suite.monotonicity),
        t,
        secs(60),
    ));
    let (o, t) = timed(balance);
    results.push((6, "balance", o, t, secs(30)));
    let (o, t) = timed(external_loop_bound);
    results.push((7, "external-loop bound", o, t, secs(30)));
    let (o, t) = timed(differential_oracle);
    results.push((8, "differential oracle", o, t, secs(60)));
    let (o, t) = timed(memory_scaling);
    results.push((9, "memory scaling", o, t, secs(10)));
    let (o, t) = timed(trend);
    results.push((10, "trend reproduction", o, t, secs(120)));
    let (o, t) = timed(snapshot_round_trip);
    results.push((11, "snapshot round trip", o, t, secs(10)));

    let mut failures = 0;
    for (id, name, o, elapsed, budget) in &results {
        let in_time = elapsed <= budget;
        let passed = o.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "criterion {id:>2} {name}: {} in {:.3?} (budget {budget:?}{}) {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed,
            if in_time { "" } else { ", exceeded" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failures,
        results.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
