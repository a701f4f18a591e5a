use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pverify::dataset::{load_dataset, DatasetManifest};
use pverify::model::{LabelAdapter, ReviewScope};
use pverify::runlog::{append_annotation, read_annotations, read_run, AnnotationLine, FnAnnotation, RunRecord};
use pverify::ProofLabel;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Filter {
    /// Correct proofs judged incorrect.
    Fn,
    /// Incorrect proofs judged correct.
    Fp,
    Undecided,
}

#[derive(clap::Args)]
pub struct InspectArgs {
    run: PathBuf,
    #[arg(long, value_enum)]
    filter: Option<Filter>,
    /// Dataset JSONL to show problem statements alongside verdicts.
    #[arg(long, conflicts_with = "manifest")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "binary", value_parser = |s: &str| LabelAdapter::from_name(s).map_err(|e| e.to_string()))]
    adapter: LabelAdapter,
    /// Attach a false-negative annotation: `ID=critical|minor|nonsense`.
    #[arg(long, value_parser = parse_annotation)]
    annotate: Vec<AnnotationLine>,
    /// Annotation sidecar; defaults to `<run>.annotations.jsonl`.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Characters of each raw response to show.
    #[arg(long, default_value_t = 160)]
    excerpt: usize,
}

fn parse_annotation(s: &str) -> Result<AnnotationLine, String> {
    let (id, label) = s.split_once('=').ok_or("expected ID=LABEL")?;
    Ok(AnnotationLine {
        id: id.to_string(),
        fn_annotation: label.parse::<FnAnnotation>().map_err(|e| e.to_string())?,
    })
}

fn sidecar_path(run: &Path) -> PathBuf {
    let mut name = run.as_os_str().to_owned();
    name.push(".annotations.jsonl");
    PathBuf::from(name)
}

fn matches(filter: Option<Filter>, r: &RunRecord) -> bool {
    match filter {
        None => true,
        Some(Filter::Fn) => r.is_false_negative(),
        Some(Filter::Fp) => r.is_false_positive(),
        Some(Filter::Undecided) => r.verdict == ProofLabel::Undecided,
    }
}

fn excerpt(text: &str, limit: usize) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match flat.char_indices().nth(limit) {
        Some((cut, _)) => format!("{}…", &flat[..cut]),
        None => flat,
    }
}

pub fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let file = read_run(&args.run).with_context(|| format!("reading {}", args.run.display()))?;
    let sidecar = args.sidecar.clone().unwrap_or_else(|| sidecar_path(&args.run));

    for line in &args.annotate {
        let mut record = file
            .records
            .iter()
            .find(|r| r.record_id == line.id)
            .cloned()
            .ok_or_else(|| anyhow!("unknown record id `{}` in {}", line.id, args.run.display()))?;
        record.annotate(line.fn_annotation)?;
        append_annotation(&sidecar, line)?;
        eprintln!("annotated {} as {}", line.id, line.fn_annotation);
    }

    let annotations: HashMap<String, FnAnnotation> = read_annotations(&sidecar)?
        .into_iter()
        .map(|a| (a.id, a.fn_annotation))
        .collect();
    let manifest = match (&args.manifest, &args.dataset) {
        (Some(path), _) => Some(DatasetManifest::from_toml_file(path)?),
        (None, Some(path)) => Some(DatasetManifest::for_jsonl(path, args.adapter)),
        (None, None) => None,
    };
    let problems: HashMap<String, String> = match manifest {
        Some(m) => load_dataset(&m)?.into_iter().map(|r| (r.id, r.problem)).collect(),
        None => HashMap::new(),
    };

    let selected: Vec<&RunRecord> = file.records.iter().filter(|r| matches(args.filter, r)).collect();
    for r in &selected {
        let gt = if r.gt_label { "correct" } else { "incorrect" };
        let note = annotations
            .get(&r.record_id)
            .or(r.fn_annotation.as_ref())
            .map(|a| format!("  annotation={a}"))
            .unwrap_or_default();
        println!(
            "{}  gt={gt}  verdict={}  strategy={}  reviews={}{note}",
            r.record_id,
            r.verdict,
            r.strategy,
            r.reviews.len()
        );
        if let Some(problem) = problems.get(&r.record_id) {
            println!("  problem: {}", excerpt(problem, args.excerpt));
        } else if manifest_given(&args) {
            bail!("record `{}` is not in the dataset", r.record_id);
        }
        if let Some(explanation) = &r.deciding_explanation {
            println!("  deciding: {}", excerpt(explanation, args.excerpt));
        }
        for review in &r.reviews {
            let scope = match &review.scope {
                ReviewScope::FullProof => "full proof".to_string(),
                ReviewScope::Chunk { segment, chunk_index } => {
                    format!("chunk {chunk_index} lines {}..{}", segment.start_line, segment.end_line)
                }
            };
            println!(
                "  #{} {scope}: {:?} | {}",
                review.task_index,
                review.verdict,
                excerpt(&review.raw_response, args.excerpt)
            );
        }
    }
    eprintln!("{} of {} records", selected.len(), file.records.len());
    Ok(())
}

fn manifest_given(args: &InspectArgs) -> bool {
    args.dataset.is_some() || args.manifest.is_some()
}
