use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use pverify::simulate::{default_grid, monte_carlo_curve, write_curve_csv, EnsembleModel, MonteCarloConfig};
use pverify::{parse_strategy_spec, StrategySpec};

#[derive(clap::Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.3)]
    p_detect: f64,
    #[arg(long, default_value_t = 0.02)]
    p_false_alarm: f64,
    /// Defaults to `--p-detect`.
    #[arg(long)]
    p_detect_in_chunk: Option<f64>,
    /// Trials per class (incorrect and correct proofs).
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 48)]
    proof_lines: usize,
    /// Comma-separated strategy specs; defaults to the standard grid.
    #[arg(long, value_delimiter = ',', value_parser = |s: &str| parse_strategy_spec(s).map_err(|e| e.to_string()))]
    strategies: Vec<StrategySpec>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    for (name, p) in [("p-detect", args.p_detect), ("p-false-alarm", args.p_false_alarm)]
        .into_iter()
        .chain(args.p_detect_in_chunk.map(|p| ("p-detect-in-chunk", p)))
    {
        if !(0.0..=1.0).contains(&p) {
            bail!("--{name} {p} is not a probability");
        }
    }
    let grid = if args.strategies.is_empty() { default_grid() } else { args.strategies.clone() };
    let mut config = MonteCarloConfig::new(args.trials, args.seed);
    config.proof_lines = args.proof_lines;
    config.p_detect_in_chunk = args.p_detect_in_chunk;
    let points: Vec<_> = grid
        .iter()
        .map(|spec| {
            let model = EnsembleModel {
                p_detect: args.p_detect,
                p_false_alarm: args.p_false_alarm,
                n: spec.n().unwrap_or(1),
            };
            let point = monte_carlo_curve(&model, spec, &config);
            eprintln!("{spec}: f1 {:.4}", point.f1);
            point
        })
        .collect();
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            write_curve_csv(&points, &mut out)?;
            out.flush()?;
        }
        None => write_curve_csv(&points, io::stdout().lock())?,
    }
    Ok(())
}
