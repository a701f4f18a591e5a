//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Every tolerance and time budget is pinned below.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pverify::backend::{
    Backend, BackendCall, BackendConfig, BackendError, BackendKind, BackendReply, ReviewRequest, ScriptEntry,
    ScriptedBackend,
};
use pverify::metrics::{balanced_f1, equivalent_output_tokens, Rational};
use pverify::model::{
    aggregate_majority, aggregate_pessimistic, LabelAdapter, ProblemRecord, ProofLabel, ProofVerdict, ReviewScope,
    ReviewVerdict, StrategySpec, TokenUsage, Verdict,
};
use pverify::prompt::{render_chunk_prompt, render_single_pass_prompt};
use pverify::segment::ProofLines;
use pverify::simulate::{monte_carlo_curve, synthetic_proof, EnsembleModel, MonteCarloConfig};
use pverify::strategy::run_progressive;
use pverify::verdict::parse_verdict;
use pverify::verifier::Verifier;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const PASS: &str = "<verification>true</verification>";
const FAIL: &str = "<verification>false</verification> Step 1 does not follow.";

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn verifier(backend: impl Backend + 'static, max_in_flight: usize) -> Verifier {
    let mut config = BackendConfig::new(BackendKind::Scripted);
    config.max_in_flight = max_in_flight;
    config.retry_backoff_base = Duration::ZERO;
    Verifier::new(Arc::new(backend), &config)
}

fn record(proof: String) -> ProblemRecord {
    ProblemRecord {
        id: "a".into(),
        problem: "Prove the statement.".into(),
        proof,
        gt_label: true,
        source: "acceptance".into(),
        raw_score: None,
    }
}

// 1. Aggregation oracle ------------------------------------------------------

fn oracle_pessimistic(v: &[Verdict]) -> (ProofLabel, Option<usize>) {
    if let Some(i) = v.iter().position(|x| *x == Verdict::Negative) {
        (ProofLabel::Incorrect, Some(i))
    } else if v.contains(&Verdict::Positive) {
        (ProofLabel::Correct, None)
    } else {
        (ProofLabel::Undecided, None)
    }
}

fn oracle_majority(v: &[Verdict]) -> ProofLabel {
    let neg = v.iter().filter(|x| **x == Verdict::Negative).count();
    let pos = v.iter().filter(|x| **x == Verdict::Positive).count();
    match (pos + neg, neg > pos) {
        (0, _) => ProofLabel::Undecided,
        (_, true) => ProofLabel::Incorrect,
        (_, false) => ProofLabel::Correct,
    }
}

fn review(task_index: usize, verdict: Verdict) -> ReviewVerdict {
    ReviewVerdict {
        task_index,
        scope: ReviewScope::FullProof,
        verdict,
        explanation: if verdict == Verdict::Negative { "x".into() } else { String::new() },
        raw_response: String::new(),
        usage: TokenUsage::ZERO,
        attempts: 1,
    }
}

fn criterion_1() -> Outcome {
    const ALL: [Verdict; 3] = [Verdict::Positive, Verdict::Negative, Verdict::Invalid];
    let mut cases = 0usize;
    for k in 0..=8u32 {
        for code in 0..3usize.pow(k) {
            let v: Vec<Verdict> = (0..k).map(|i| ALL[code / 3usize.pow(i) % 3]).collect();
            let indexed = || v.iter().copied().enumerate();
            let pes = aggregate_pessimistic(indexed());
            let maj = aggregate_majority(indexed());
            let via_reviews = ProofVerdict::pessimistic(v.iter().enumerate().map(|(i, x)| review(i, *x)).collect());
            if pes != oracle_pessimistic(&v)
                || maj.0 != oracle_majority(&v)
                || (via_reviews.label, via_reviews.deciding_review) != pes
            {
                return Err(format!("mismatch on {v:?}"));
            }
            cases += 1;
        }
    }
    check(cases == 9841, format!("{cases} vectors, k = 0..=8"))
}

// 2. Progressive budget bound -------------------------------------------------

struct AlwaysPass;

impl Backend for AlwaysPass {
    fn complete(&self, _: &BackendCall<'_>) -> Result<BackendReply, BackendError> {
        Ok(BackendReply {
            content: PASS.into(),
            usage: TokenUsage::new(1, 1),
        })
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = verifier(AlwaysPass, 4);
    let mut equality_cases = 0;
    for _ in 0..500 {
        let lines = rng.gen_range(1..=200usize);
        let n = rng.gen_range(1..=5u32);
        let l = [1u32, 3, 6, 12][rng.gen_range(0..4)];
        let proof = synthetic_proof(lines, None);
        let result = run_progressive(&record(proof), n as usize, l as usize, &v).map_err(|e| e.to_string())?;
        let bound = (1usize << n) - 1;
        if result.reviews_issued > bound {
            return Err(format!("{lines} lines, prog@{n}/{l}: {} > {bound}", result.reviews_issued));
        }
        if lines > l as usize * (1 << (n - 1)) {
            equality_cases += 1;
            if result.reviews_issued != bound {
                return Err(format!("{lines} lines, prog@{n}/{l}: {} != {bound}", result.reviews_issued));
            }
        }
    }
    Ok(format!("500 proofs, {equality_cases} at the bound"))
}

// 3. Pruning soundness ----------------------------------------------------------

fn criterion_3() -> Outcome {
    let proof = synthetic_proof(48, None);
    let script = |replies: &[&str]| {
        ScriptedBackend::keyed(replies.iter().enumerate().map(|(i, r)| (i, vec![ScriptEntry::text(*r)])))
    };
    let level0 = verifier(script(&[FAIL, PASS, PASS, PASS, PASS, PASS, PASS]), 4);
    let r0 = run_progressive(&record(proof.clone()), 3, 6, &level0).map_err(|e| e.to_string())?;
    let level1 = verifier(script(&[PASS, FAIL, PASS, PASS, PASS, PASS, PASS]), 4);
    let r1 = run_progressive(&record(proof), 3, 6, &level1).map_err(|e| e.to_string())?;
    let calls = (level0.call_log().len(), level1.call_log().len());
    check(
        calls == (1, 3) && r0.verdict.label == ProofLabel::Incorrect && r1.verdict.label == ProofLabel::Incorrect,
        format!("backend calls: level-0 negative {}, level-1 negative {}", calls.0, calls.1),
    )
}

// 4. Simulator convergence ------------------------------------------------------

fn criterion_4() -> Outcome {
    const TOLERANCE: f64 = 0.02;
    let cfg = MonteCarloConfig::new(10_000, 4);
    let tnr = |spec: StrategySpec, n| {
        let model = EnsembleModel {
            p_detect: 0.3,
            p_false_alarm: 0.0,
            n,
        };
        let point = monte_carlo_curve(&model, &spec, &cfg);
        assert_eq!(point.counts.negatives(), 10_000);
        point.tnr
    };
    let pes = tnr(StrategySpec::SimplePessimistic { n: 8 }, 8);
    let maj = tnr(StrategySpec::Majority { n: 9 }, 9);
    check(
        (pes - 0.94235199).abs() <= TOLERANCE && (maj - 0.09880866).abs() <= TOLERANCE,
        format!("pes@8 TNR {pes:.4} vs 0.9424, maj@9 TNR {maj:.4} vs 0.0988 (±{TOLERANCE})"),
    )
}

// 5. Scaling shape at p = 0.3, q = 0.02 ------------------------------------------

fn criterion_5() -> Outcome {
    const MAJORITY_SPREAD: f64 = 0.03;
    let cfg = MonteCarloConfig::new(4_000, 5);
    let f1 = |spec: StrategySpec, n| {
        let model = EnsembleModel {
            p_detect: 0.3,
            p_false_alarm: 0.02,
            n,
        };
        monte_carlo_curve(&model, &spec, &cfg).f1
    };
    let budgets = [1u32, 2, 4, 8];
    let pes: Vec<f64> = budgets.iter().map(|&n| f1(StrategySpec::SimplePessimistic { n }, n)).collect();
    let maj: Vec<f64> = budgets.iter().map(|&n| f1(StrategySpec::Majority { n }, n)).collect();
    let increasing = pes.windows(2).all(|w| w[1] > w[0]);
    let spread = maj.iter().cloned().fold(f64::MIN, f64::max) - maj.iter().cloned().fold(f64::MAX, f64::min);
    check(
        increasing && spread < MAJORITY_SPREAD,
        format!(
            "pes F1 {pes:.3?} increasing: {increasing}; maj F1 {maj:.3?} spread {spread:.3} (< {MAJORITY_SPREAD} required)"
        ),
    )
}

// 6. Metrics exactness --------------------------------------------------------------

fn criterion_6() -> Outcome {
    let f1 = balanced_f1(Rational::new(4, 5), Rational::new(3, 5));
    let tokens = equivalent_output_tokens(TokenUsage::new(800, 100), Rational::from_integer(8)).map_err(|e| e.to_string())?;
    check(
        f1 == Rational::new(24, 35) && tokens == Rational::from_integer(200),
        format!("F1(0.8, 0.6) = {f1}, equivalent tokens = {tokens}"),
    )
}

// 7. Prompt fidelity -------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let fixture: Value = serde_json::from_str(include_str!("../../core/tests/golden/fixture.json")).unwrap();
    let field = |k: &str| fixture[k].as_str().unwrap().to_string();
    let index = |k: &str| fixture[k].as_u64().unwrap() as usize;
    let request = ReviewRequest::new(field("problem"), field("proof"));
    let single = render_single_pass_prompt(&request).map_err(|e| e.to_string())?;
    let lines = ProofLines::new(&request.full_proof).map_err(|e| e.to_string())?;
    let segment = lines.segment(index("chunk_start"), index("chunk_end"), 1, 1);
    let chunk = render_chunk_prompt(&request.clone().with_scope(ReviewScope::Chunk {
        segment,
        chunk_index: index("chunk_index"),
    }))
    .map_err(|e| e.to_string())?;
    let matches = [
        single.system == include_str!("../../core/tests/golden/single_pass.system.txt"),
        single.user == include_str!("../../core/tests/golden/single_pass.user.txt"),
        chunk.system == include_str!("../../core/tests/golden/chunk.system.txt"),
        chunk.user == include_str!("../../core/tests/golden/chunk.user.txt"),
    ];
    check(matches.iter().all(|m| *m), format!("single system/user, chunk system/user identical: {matches:?}"))
}

// 8. End-to-end determinism -------------------------------------------------------------

fn pverify(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pverify"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = dir.path();
    let mut data = String::new();
    for i in 0..12 {
        let proof = synthetic_proof(10 + 3 * i, None);
        data.push_str(&format!("{}\n", json!({"id": format!("h{i}"), "problem": "Show it.", "proof": proof, "label": i % 3 != 0})));
    }
    std::fs::write(dir.join("h2v.jsonl"), data).unwrap();
    let replies: String = (0..200).map(|i| format!("{}\n", json!(if i % 7 == 4 { FAIL } else { PASS }))).collect();
    std::fs::write(dir.join("replies.jsonl"), replies).unwrap();
    for name in ["a", "b"] {
        let run = format!("{name}.jsonl");
        let report = format!("{name}.json");
        pverify(
            &[
                "run", "--dataset", "h2v.jsonl", "--strategy", "prog@3/6", "--backend", "scripted", "--script",
                "replies.jsonl", "--seed", "42", "--fixed-clock", "2025-10-01T00:00:00Z", "--output", &run,
            ],
            dir,
        )?;
        pverify(&["metrics", &run, "--format", "json", "--json-out", &report], dir)?;
    }
    let read = |f: &str| std::fs::read(dir.join(f)).unwrap();
    let (runs_equal, reports_equal) = (read("a.jsonl") == read("b.jsonl"), read("a.json") == read("b.json"));
    check(
        runs_equal && reports_equal && !read("a.jsonl").is_empty(),
        format!("run files identical: {runs_equal}, JSON reports identical: {reports_equal}"),
    )
}

// 9. Parser robustness ---------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let corpus = include_str!("../../core/tests/data/verdict_corpus.jsonl");
    let mut agree = 0;
    let mut total = 0;
    for line in corpus.lines() {
        let case: Value = serde_json::from_str(line).unwrap();
        let got = match parse_verdict(case["response"].as_str().unwrap()) {
            Ok(p) if p.verdict == Verdict::Positive => "positive",
            Ok(_) => "negative",
            Err(_) => "fail",
        };
        total += 1;
        agree += usize::from(got == case["label"].as_str().unwrap());
    }
    // Pathological inputs must return promptly.
    let hostile = [
        "<verification>".repeat(20_000),
        format!("<verification>{}</verification>", " ".repeat(100_000)),
        "<".repeat(200_000),
        format!("{}<verification>true</verification>", "<verification>tru".repeat(10_000)),
    ];
    for input in &hostile {
        let _ = parse_verdict(input);
    }
    check(total == 200 && agree == total, format!("{agree}/{total} labels agree; hostile inputs terminated"))
}

// 10. Seven-point label adapter ----------------------------------------------------------------

fn criterion_10() -> Outcome {
    let adapter = LabelAdapter::SevenPoint;
    let mapped: Vec<bool> = (0..=7).map(|s| adapter.label(s)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let expected = [false, false, false, false, false, false, false, true];
    let out_of_range = [-1, 8].iter().all(|s| adapter.label(*s).is_err());
    check(
        mapped == expected && out_of_range,
        format!("0..=6 -> false, 7 -> true: {}; -1 and 8 rejected: {out_of_range}", mapped == expected),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("aggregation oracle", Duration::from_secs(1), criterion_1),
        ("progressive budget bound", Duration::from_secs(5), criterion_2),
        ("pruning soundness", Duration::from_secs(1), criterion_3),
        ("simulator convergence", Duration::from_secs(30), criterion_4),
        ("budget scaling shape", Duration::from_secs(60), criterion_5),
        ("metrics exactness", Duration::from_secs(1), criterion_6),
        ("prompt fidelity", Duration::from_secs(1), criterion_7),
        ("end-to-end determinism", Duration::from_secs(5), criterion_8),
        ("parser robustness", Duration::from_secs(1), criterion_9),
        ("seven-point label adapter", Duration::from_secs(1), criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
