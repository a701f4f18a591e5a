use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, TimeDelta, Utc};
use pverify::backend::{
    Backend, BackendConfig, BackendKind, HttpBackend, ReasoningEffort, ScriptedBackend, SimulatorBackend,
    SimulatorParams, DEFAULT_TEMPERATURE, PLANTED_ERROR_MARKER,
};
use pverify::dataset::{load_dataset, DatasetManifest};
use pverify::metrics::{MetricsReport, Rational, DEFAULT_INPUT_WEIGHT};
use pverify::model::{LabelAdapter, ProblemRecord};
use pverify::runlog::{
    config_hash, read_run, resume_filter, Clock, RunHeader, RunRecord, RunWriter, SteppingClock, SystemClock,
    SCHEMA_VERSION,
};
use pverify::strategy::run_strategy;
use pverify::verifier::{ReviewSettings, Verifier};
use pverify::{parse_strategy_spec, StrategySpec};
use serde_json::json;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendChoice {
    Http,
    Scripted,
    Simulator,
}

impl From<BackendChoice> for BackendKind {
    fn from(choice: BackendChoice) -> Self {
        match choice {
            BackendChoice::Http => BackendKind::Http,
            BackendChoice::Scripted => BackendKind::Scripted,
            BackendChoice::Simulator => BackendKind::Simulator,
        }
    }
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// Dataset JSONL with default field names.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    dataset: Option<PathBuf>,
    /// TOML dataset manifest (field map, adapter, subset).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Label adapter for `--dataset`: imo-grading or binary.
    #[arg(long, default_value = "binary", value_parser = parse_adapter)]
    adapter: LabelAdapter,
    /// single, maj@N, pes@N, vp@L or prog@N/L.
    #[arg(long, value_parser = parse_strategy)]
    strategy: StrategySpec,
    #[arg(long, value_enum)]
    backend: BackendChoice,
    /// Reply script for the scripted backend.
    #[arg(long, required_if_eq("backend", "scripted"))]
    script: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, required_if_eq("backend", "http"))]
    endpoint: Option<String>,
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value = "gpt-5-mini")]
    model: String,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long)]
    reasoning_effort: Option<ReasoningEffort>,
    /// Forward `--reasoning-effort` to the API.
    #[arg(long)]
    supports_reasoning_effort: bool,
    #[arg(long, default_value_t = Rational::from_integer(DEFAULT_INPUT_WEIGHT), value_parser = crate::parse_weight)]
    input_weight: Rational,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run file to write.
    #[arg(long, short)]
    output: PathBuf,
    /// Skip records already present in the run file and append the rest.
    #[arg(long)]
    resume: bool,
    /// Concurrent backend calls (always 1 for the scripted backend).
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    max_in_flight: u64,
    #[arg(long, default_value_t = 2)]
    retry_limit: u32,
    #[arg(long, default_value_t = 500)]
    retry_backoff_ms: u64,
    #[arg(long, default_value_t = 600)]
    request_timeout_secs: u64,
    /// Timestamp records from this instant, advancing `--clock-step-ms` per reading.
    #[arg(long)]
    fixed_clock: Option<DateTime<Utc>>,
    #[arg(long, default_value_t = 1000)]
    clock_step_ms: i64,
    /// Simulator: chance a full-proof review of an incorrect proof is negative.
    #[arg(long, default_value_t = 0.3)]
    p_detect: f64,
    /// Simulator: chance a review of error-free material is negative.
    #[arg(long, default_value_t = 0.02)]
    p_false_alarm: f64,
    /// Simulator: chance a review of the chunk holding the error is negative.
    #[arg(long)]
    p_detect_in_chunk: Option<f64>,
    /// Simulator: error line for incorrect proofs without a planted marker.
    #[arg(long)]
    chunk_error_location: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<StrategySpec, String> {
    parse_strategy_spec(s).map_err(|e| e.to_string())
}

fn parse_adapter(s: &str) -> Result<LabelAdapter, String> {
    LabelAdapter::from_name(s).map_err(|e| e.to_string())
}

/// Error line used by the simulator for an incorrect proof: the planted
/// marker, else the configured location, else a line picked from the seed.
fn simulated_error_line(record: &ProblemRecord, fallback: Option<usize>, seed: u64) -> usize {
    let lines: Vec<&str> = record.proof.split('\n').collect();
    if let Some(i) = lines.iter().position(|l| l.contains(PLANTED_ERROR_MARKER)) {
        return i;
    }
    if let Some(line) = fallback {
        return line.min(lines.len() - 1);
    }
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for b in record.id.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    (h % lines.len() as u64) as usize
}

fn build_backend(args: &RunArgs, config: &BackendConfig, records: &[ProblemRecord]) -> Result<Arc<dyn Backend>> {
    Ok(match args.backend {
        BackendChoice::Http => Arc::new(HttpBackend::from_config(config)?),
        BackendChoice::Scripted => {
            let path = args.script.as_ref().expect("clap requires --script");
            Arc::new(ScriptedBackend::from_jsonl_file(path)?)
        }
        BackendChoice::Simulator => {
            let mut params = SimulatorParams::new(args.p_detect, args.p_false_alarm, args.seed);
            params.p_detect_in_chunk = args.p_detect_in_chunk.unwrap_or(args.p_detect);
            params.validate().map_err(anyhow::Error::msg)?;
            let mut sim = SimulatorBackend::new(params);
            for r in records {
                let truth = (!r.gt_label).then(|| simulated_error_line(r, args.chunk_error_location, args.seed));
                sim.register(r.proof.clone(), truth);
            }
            Arc::new(sim)
        }
    })
}

pub fn cmd_run(args: RunArgs) -> Result<()> {
    let manifest = match (&args.manifest, &args.dataset) {
        (Some(path), _) => DatasetManifest::from_toml_file(path)?,
        (None, Some(path)) => DatasetManifest::for_jsonl(path, args.adapter),
        (None, None) => unreachable!("clap requires a dataset"),
    };

    let mut config = BackendConfig::new(args.backend.into());
    config.endpoint_url = args.endpoint.clone();
    config.api_key_env = args.api_key_env.clone();
    // Scripted replies are consumed in order, which is only reproducible serially.
    config.max_in_flight = match args.backend {
        BackendChoice::Scripted => 1,
        _ => args.max_in_flight as usize,
    };
    config.retry_limit = args.retry_limit;
    config.retry_backoff_base = Duration::from_millis(args.retry_backoff_ms);
    config.request_timeout = Duration::from_secs(args.request_timeout_secs);
    config.supports_reasoning_effort = args.supports_reasoning_effort;
    config.validate()?;
    if !(0.0..=2.0).contains(&args.temperature) {
        bail!("temperature {} is outside 0..=2", args.temperature);
    }

    let header = RunHeader {
        schema_version: SCHEMA_VERSION,
        strategy: args.strategy,
        model: args.model.clone(),
        dataset: manifest.name.clone(),
        seed: args.seed,
        config_hash: config_hash(&json!({
            "dataset": manifest,
            "strategy": args.strategy,
            "backend": config,
            "model": args.model,
            "temperature": args.temperature,
            "reasoning_effort": args.reasoning_effort,
            "input_weight": args.input_weight.to_string(),
            "seed": args.seed,
        })),
    };

    let dataset = load_dataset(&manifest)?;
    let pending = if args.resume {
        resume_filter(dataset.clone(), &args.output, args.strategy, &args.model)?
    } else {
        dataset.clone()
    };
    let backend = build_backend(&args, &config, &dataset)?;
    let verifier = Verifier::new(backend, &config).with_settings(ReviewSettings {
        model: args.model.clone(),
        temperature: args.temperature,
        reasoning_effort: args.reasoning_effort,
    });
    let clock: Box<dyn Clock> = match args.fixed_clock {
        Some(start) => Box::new(SteppingClock::new(start, TimeDelta::milliseconds(args.clock_step_ms))),
        None => Box::new(SystemClock),
    };

    let mut writer = if args.resume {
        RunWriter::resume(&args.output, &header)?
    } else {
        RunWriter::create(&args.output, &header)?
    };
    let skipped = dataset.len() - pending.len();
    if skipped > 0 {
        eprintln!("resuming: {skipped} of {} records already done", dataset.len());
    }
    let total = pending.len();
    for (i, record) in pending.iter().enumerate() {
        let started_at = clock.now();
        let result = run_strategy(&args.strategy, record, &verifier)
            .with_context(|| format!("record {} failed; {} records written", record.id, writer.written()))?;
        let finished_at = clock.now();
        let reviews = result.reviews_issued;
        let run_record = RunRecord::from_result(record, args.strategy, &args.model, result, started_at, finished_at);
        writer.append(&run_record)?;
        eprintln!(
            "[{}/{total}] {} {}: {} ({reviews} reviews)",
            i + 1,
            record.id,
            args.strategy,
            run_record.verdict
        );
    }
    drop(writer);

    let file = read_run(&args.output)?;
    let report = MetricsReport::from_outcomes(
        file.records
            .iter()
            .filter(|r| r.strategy == args.strategy && r.model == args.model)
            .map(|r| (r.gt_label, r.verdict, r.usage_total)),
        args.input_weight,
    )?;
    println!("{report}");
    Ok(())
}
