use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mementohash::bench::{self, RemovalOrder, Scenario, ScenarioConfig};
use mementohash::oracle::{self, PropertyReport};
use mementohash::{
    digest_key, Algorithm, AnchorEngine, BucketId, CapacityConfig, ConsistentHasher, DxEngine,
    EngineError, KeyDigest, LookupStep, MementoState,
};

/// Sizes above this need `--full-scale`.
const DESK_SCALE_LIMIT: u32 = 100_000;
const FULL_SCALE_LIMIT: u32 = 1_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "mementohash",
    version,
    about = "Consistent hashing with MementoHash and baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an evaluation scenario and write CSV records.
    Bench(BenchArgs),
    /// Run property suites against the engines.
    Verify(VerifyArgs),
    /// Create and mutate a persisted Memento state.
    State(StateArgs),
    /// Narrate every step of a lookup.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "stable")]
    scenario: Scenario,
    /// Comma-separated subset of memento, jump, anchor, dx.
    #[arg(long, value_delimiter = ',', default_value = "memento,jump,anchor,dx")]
    algos: Vec<Algorithm>,
    /// Initial number of working buckets.
    #[arg(long, default_value_t = 10_000)]
    size: u32,
    /// Fraction of buckets removed by the one-shot scenario.
    #[arg(long, default_value_t = 0.9)]
    remove_fraction: f64,
    #[arg(long, default_value = "lifo")]
    order: RemovalOrder,
    /// Overall capacity over working buckets for anchor and dx.
    #[arg(long, default_value_t = bench::DEFAULT_CAPACITY_RATIO)]
    capacity_ratio: u32,
    #[arg(long, default_value_t = bench::DEFAULT_KEYS)]
    keys: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = bench::DEFAULT_REPETITIONS)]
    reps: u32,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow sizes up to one million.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Balance,
    Disruption,
    Monotonicity,
    Equivalence,
    IterationBounds,
    All,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Cluster size; for the randomized suites the largest initial size.
    #[arg(long)]
    size: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
struct StateArgs {
    #[command(subcommand)]
    action: StateAction,
    #[arg(long, global = true, default_value = "memento-state.json")]
    file: PathBuf,
}

#[derive(Debug, Subcommand)]
enum StateAction {
    /// Start a cluster of N working buckets.
    Init { n: u32 },
    /// Remove a working bucket.
    Remove { bucket: u32 },
    /// Restore the last removed bucket or grow the cluster.
    Add,
    /// Print n, w, r, l and the replacements.
    Show,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("key_input").required(true))]
struct TraceArgs {
    #[arg(long, default_value = "memento-state.json")]
    file: PathBuf,
    /// Key as a UTF-8 string, digested before lookup.
    #[arg(long, group = "key_input")]
    key: Option<String>,
    /// Key digest in hex, used as is.
    #[arg(long, group = "key_input", value_parser = parse_hex_digest)]
    key_hex: Option<u64>,
}

fn parse_hex_digest(text: &str) -> Result<u64, String> {
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .unwrap_or(text);
    u64::from_str_radix(digits, 16).map_err(|e| format!("invalid hex digest `{text}`: {e}"))
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Bench(args) => run_bench(args),
        Command::Verify(args) => run_verify(args),
        Command::State(args) => run_state(args),
        Command::Trace(args) => run_trace(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run_bench(args: BenchArgs) -> Outcome {
    let limit = if args.full_scale {
        FULL_SCALE_LIMIT
    } else {
        DESK_SCALE_LIMIT
    };
    if args.size > limit {
        return Err(Failure::Usage(anyhow!(
            "size {} exceeds {limit}; pass --full-scale for up to {FULL_SCALE_LIMIT}",
            args.size
        )));
    }
    let config = ScenarioConfig {
        scenario: args.scenario,
        algorithms: args.algos,
        initial_size: args.size,
        removal_fraction: args.remove_fraction,
        removal_order: args.order,
        capacity_ratio: args.capacity_ratio,
        key_count: args.keys,
        seed: args.seed,
        repetitions: args.reps,
    };
    config.validate().map_err(|e| Failure::Usage(e.into()))?;
    eprintln!(
        "config: {}",
        serde_json::to_string(&config).expect("config serializes")
    );
    let records = bench::run_scenario_with_progress(&config, |line| eprintln!("{line}"))
        .map_err(|e| Failure::Runtime(e.into()))?;
    let written = match &args.out {
        Some(path) => {
            let file =
                fs::File::create(path).with_context(|| format!("cannot write {}", path.display()));
            let file = file.map_err(Failure::Runtime)?;
            bench::emit_csv(&records, io::BufWriter::new(file))
        }
        None => bench::emit_csv(&records, io::stdout().lock()),
    }
    .map_err(|e| Failure::Runtime(e.into()))?;
    eprintln!("wrote {} records ({written} bytes)", records.len());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Outcome {
    let suites: &[Suite] = match args.suite {
        Suite::All => &[
            Suite::Equivalence,
            Suite::Disruption,
            Suite::Monotonicity,
            Suite::Balance,
            Suite::IterationBounds,
        ],
        ref one => std::slice::from_ref(one),
    };
    if args.size == Some(0) {
        return Err(Failure::Usage(anyhow!("size must be positive")));
    }
    let suite_name = args
        .suite
        .to_possible_value()
        .expect("suites are named")
        .get_name()
        .to_string();
    eprintln!(
        "config: {}",
        serde_json::json!({
            "suite": suite_name,
            "size": args.size,
            "seed": args.seed,
            "inject_fault": args.inject_fault,
        })
    );
    let mut reports = Vec::new();
    for &suite in suites {
        reports.extend(
            run_suite(suite, args.size, args.seed, args.inject_fault).map_err(Failure::Runtime)?,
        );
    }
    let mut stdout = io::stdout().lock();
    let mut failed = 0;
    for report in &reports {
        writeln!(stdout, "{}", report.to_json_line())?;
        if !report.passed {
            failed += 1;
            eprintln!("FAIL {}: {} violations", report.property, report.violations);
            if let Some(repro) = &report.reproduction {
                eprintln!(
                    "  reproduce with seed {}: {} ({})",
                    repro.seed,
                    serde_json::to_string(&repro.history).expect("logs serialize"),
                    repro.note
                );
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(anyhow!(
            "{failed} of {} property reports failed",
            reports.len()
        )));
    }
    eprintln!("all {} property reports passed", reports.len());
    Ok(())
}

fn memento(n: u32, fault: bool) -> Result<Box<dyn ConsistentHasher>, EngineError> {
    let state = MementoState::new(n)?;
    Ok(if fault {
        Box::new(oracle::FaultInjected(state))
    } else {
        Box::new(state)
    })
}

fn run_suite(
    suite: Suite,
    size: Option<u32>,
    seed: u64,
    fault: bool,
) -> anyhow::Result<Vec<PropertyReport>> {
    let build = |n: u32| memento(n, fault);
    Ok(match suite {
        Suite::Equivalence => {
            vec![oracle::run_equivalence(
                build,
                1_000,
                size.unwrap_or(32),
                20,
                10_000,
                seed,
            )?]
        }
        Suite::Disruption | Suite::Monotonicity => {
            let max_size = size.unwrap_or(64);
            let mut reports = Vec::new();
            let memento = oracle::run_history_properties(build, 200, max_size, 32, 10_000, seed)?;
            let anchor = oracle::run_history_properties(
                |n| CapacityConfig::new(n + 32, n).map(AnchorEngine::new),
                50,
                max_size,
                32,
                10_000,
                seed,
            )?;
            let dx = oracle::run_history_properties(
                |n| CapacityConfig::new(n + 32, n).map(DxEngine::new),
                50,
                max_size,
                32,
                10_000,
                seed,
            )?;
            for (engine, mut suite_reports) in
                [("memento", memento), ("anchor", anchor), ("dx", dx)]
            {
                let report = match suite {
                    Suite::Disruption => &mut suite_reports.disruption,
                    _ => &mut suite_reports.monotonicity,
                };
                report.property = format!("{}[{engine}]", report.property);
                reports.push(report.clone());
            }
            reports
        }
        Suite::Balance => {
            let n = size.unwrap_or(10_000);
            let state = oracle::random_removals(n, 0.2, seed)?;
            let report = if fault {
                oracle::check_balance(&oracle::FaultInjected(state), 1_000_000, seed)
            } else {
                oracle::check_balance(&state, 1_000_000, seed)
            };
            vec![report]
        }
        Suite::IterationBounds => oracle::run_iteration_bounds(
            size.unwrap_or(1_000),
            &[0.2, 0.5, 0.65, 0.9],
            100_000,
            seed,
        )?,
        Suite::All => unreachable!("expanded by the caller"),
    })
}

fn load_state(path: &Path) -> Result<MementoState, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Usage)?;
    MementoState::load_state(&bytes)
        .with_context(|| format!("invalid state file {}", path.display()))
        .map_err(Failure::Usage)
}

fn save_state(path: &Path, state: &MementoState) -> Outcome {
    fs::write(path, state.save_state())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn run_state(args: StateArgs) -> Outcome {
    eprintln!(
        "config: {}",
        serde_json::json!({ "file": args.file.display().to_string(), "action": format!("{:?}", args.action) })
    );
    let path = args.file.as_path();
    let engine_error = |e: EngineError| Failure::Runtime(e.into());
    match args.action {
        StateAction::Init { n } => {
            let state = MementoState::new(n).map_err(|e| Failure::Usage(e.into()))?;
            save_state(path, &state)?;
            show(&state)
        }
        StateAction::Remove { bucket } => {
            let mut state = load_state(path)?;
            state.remove(BucketId(bucket)).map_err(engine_error)?;
            save_state(path, &state)?;
            show(&state)
        }
        StateAction::Add => {
            let mut state = load_state(path)?;
            let added = state.add().map_err(engine_error)?;
            save_state(path, &state)?;
            println!("added {added}");
            show(&state)
        }
        StateAction::Show => show(&load_state(path)?),
    }
}

fn show(state: &MementoState) -> Outcome {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "n={} w={} r={} l={}",
        state.size(),
        state.working_count(),
        state.removed_count(),
        state.last_removed()
    )?;
    let mut stack = state.removal_stack();
    if stack.is_empty() {
        writeln!(out, "R empty")?;
    }
    stack.reverse();
    for entry in stack {
        writeln!(
            out,
            "<{} -> {}, {}>",
            entry.removed, entry.replacer, entry.previous
        )?;
    }
    Ok(())
}

fn run_trace(args: TraceArgs) -> Outcome {
    let state = load_state(&args.file)?;
    let key = match (&args.key, args.key_hex) {
        (Some(text), _) => digest_key(text.as_bytes()),
        (None, Some(raw)) => KeyDigest(raw),
        (None, None) => {
            return Err(Failure::Usage(anyhow!(
                "one of --key or --key-hex is required"
            )))
        }
    };
    eprintln!(
        "config: {}",
        serde_json::json!({ "file": args.file.display().to_string(), "key": args.key, "digest": key.to_string() })
    );
    let mut steps: Vec<LookupStep> = Vec::new();
    let bucket = state
        .lookup_with(key, &mut steps)
        .map_err(|e| Failure::Runtime(e.into()))?;
    let (_, trace) = state.lookup_traced(key);
    let mut out = io::stdout().lock();
    writeln!(out, "key digest {key}")?;
    for step in steps {
        match step {
            LookupStep::Jump { bucket, size } => {
                writeln!(out, "jump over {size} buckets -> {bucket}")?
            }
            LookupStep::Rehash {
                from,
                working,
                slot,
            } => writeln!(out, "{from} removed: rehash into [0, {working}) -> {slot}")?,
            LookupStep::Hop { from, to } => writeln!(out, "  {from} replaced by {to}")?,
            LookupStep::Halt { at, replacer } => writeln!(
                out,
                "  {at} replaced by {replacer}: stop, outside the range"
            )?,
            LookupStep::Done { bucket } => writeln!(out, "result {bucket}")?,
        }
    }
    debug_assert_eq!(bucket, state.lookup(key));
    writeln!(
        out,
        "tau={} internal_iterations={} work={}",
        trace.external_iterations, trace.internal_iterations_total, trace.product_work
    )?;
    Ok(())
}
