//! `pverify`: run verification strategies over datasets, score run files,
//! sweep the simulator and inspect individual verdicts.

mod inspect;
mod run;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pverify::metrics::{MetricsReport, Rational, DEFAULT_INPUT_WEIGHT};
use pverify::runlog::read_run;

#[derive(Parser)]
#[command(name = "pverify", version, about = "Pessimistic verification of mathematical proofs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a strategy over every record of a dataset and stream a run file.
    Run(run::RunArgs),
    /// Score one or more run files.
    Metrics(MetricsArgs),
    /// Sweep the Bernoulli reviewer simulator over a strategy grid.
    Simulate(simulate::SimulateArgs),
    /// List and annotate records of a run file.
    Inspect(inspect::InspectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(clap::Args)]
struct MetricsArgs {
    /// Run files; records from all of them are merged.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Input tokens per equivalent output token.
    #[arg(long, default_value_t = Rational::from_integer(DEFAULT_INPUT_WEIGHT), value_parser = parse_weight)]
    input_weight: Rational,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

/// Accepts `8`, `15/2` or `7.5`.
pub(crate) fn parse_weight(s: &str) -> Result<Rational, String> {
    let weight = match s.split_once('.') {
        Some((whole, frac)) if !frac.is_empty() && frac.len() <= 12 => {
            let digits = format!("{whole}{frac}");
            let numer: i128 = digits.parse().map_err(|_| format!("`{s}` is not a number"))?;
            Rational::new(numer, 10i128.pow(frac.len() as u32))
        }
        _ => s.parse::<Rational>().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if weight <= Rational::from_integer(0) {
        return Err("input weight must be positive".into());
    }
    Ok(weight)
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let mut outcomes = Vec::new();
    for path in &args.runs {
        let file = read_run(path).with_context(|| format!("reading run file {}", path.display()))?;
        if file.truncated_tail {
            eprintln!("warning: {} ends in a partial line; it was ignored", path.display());
        }
        outcomes.extend(file.records.into_iter().map(|r| (r.gt_label, r.verdict, r.usage_total)));
    }
    let report = MetricsReport::from_outcomes(outcomes, args.input_weight)?;
    let json = report.to_json();
    if let Some(path) = &args.json_out {
        std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    match args.format {
        ReportFormat::Table => println!("{report}"),
        ReportFormat::Json => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Simulate(args) => simulate::cmd_simulate(args),
        Command::Inspect(args) => inspect::cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
