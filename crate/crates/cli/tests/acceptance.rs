//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs offline against the bundled fixtures.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use phee_core::corpus::{load_dataset, revise_subject_disorder, Dataset, Instance};
use phee_core::filtering::{
    augment_filter, read_scores, train_filter, ScoreRecord, ScoreSplit, ScoreStats, StatsMode, VarianceConvention,
};
use phee_core::metrics::{em_f1, f_test_variance, token_f1, EvalOptions, Tail};
use phee_core::prompting::{
    build_pipeline_stage2, build_synthesis_prompt, build_zero_shot, render_synthesis_output, stage2_question,
    ConstraintPair, PromptStrategy, Stage1Fields, SynthesisCategory,
};
use phee_core::retrieval::{jaccard, tree_kernel_similarity, Bm25Index, Bm25Params, DEFAULT_MAX_PATH};
use phee_core::schema::{linearize, parse_linearized, Argument, ArgumentKind, Event, EventType, Span};
use phee_core::text::tokenize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..50 {
        let (gold, pred) = random_corpus_pair(&mut rng);
        ensure!(gold.len() <= 10, "corpus {case} has {} instances", gold.len());
        ensure!(gold.values().all(|es| es.len() <= 3), "corpus {case} has an instance with more than 3 events");
        let opts = EvalOptions::default();
        let em = em_f1(&pred, &gold, opts).map_err(|e| e.to_string())?;
        let tok = token_f1(&pred, &gold, opts).map_err(|e| e.to_string())?;
        for (name, rep, brute) in [("em", &em, brute_em(&pred, &gold)), ("token", &tok, brute_token(&pred, &gold))] {
            for (part, got) in [("main", rep.main.f1), ("sub", rep.sub.f1), ("overall", rep.overall.f1)] {
                let want = brute_f1(&brute, part);
                ensure!(close(got, want, 1e-12), "corpus {case} {name}.{part}: {got} vs {want}");
            }
            for kind in ArgumentKind::ALL {
                let (got, want) = (rep.kind(kind).f1, brute_f1(&brute, kind.name()));
                ensure!(close(got, want, 1e-12), "corpus {case} {name}.{kind}: {got} vs {want}");
            }
        }
    }
    Ok(())
}

fn linearization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut special = 0;
    for case in 0..1000 {
        let events = random_linearizable(&mut rng);
        let text = linearize(&events, true);
        if events.iter().flat_map(Event::spans).any(|s| s.text.contains(['[', ']', '\\'])) {
            special += 1;
        }
        let back = parse_linearized(&text).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back == events, "case {case}: {text:?} did not round-trip");
    }
    ensure!(special > 0, "no generated span contained bracket or backslash characters");
    Ok(())
}

fn bm25() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let params = Bm25Params::default();
    for case in 0..100 {
        let (docs, query) = random_bm25_corpus(&mut rng);
        ensure!(docs.len() <= 20, "corpus {case} has {} documents", docs.len());
        let index = Bm25Index::build(docs.iter().map(|(i, t)| (i.clone(), t.as_str())), params)
            .map_err(|e| e.to_string())?;
        for (id, _) in &docs {
            let got = index.score(&tokenize(&query), id).map_err(|e| e.to_string())?;
            let want = brute_bm25(&docs, &query, id, params.k1, params.b);
            ensure!(close(got, want, 1e-9), "corpus {case} doc {id}: {got} vs {want}");
        }
    }
    let docs = [("d1".to_string(), "drug rash"), ("d2".to_string(), "drug")];
    let index = Bm25Index::build(docs.iter().map(|(i, t)| (i.clone(), *t)), params).map_err(|e| e.to_string())?;
    // N=2, df(rash)=1, |d1|=2, avgdl=1.5, tf=1, k1=1.2, b=0.75
    let idf = ((2.0f64 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0).ln();
    let hand = idf * (1.0 * 2.2) / (1.0 + 1.2 * (1.0 - 0.75 + 0.75 * 2.0 / 1.5));
    let q = vec!["rash".to_string()];
    let got = index.score(&q, "d1").map_err(|e| e.to_string())?;
    ensure!(close(got, hand, 1e-12), "two-document example: {got} vs {hand}");
    ensure!(index.score(&q, "d2").map_err(|e| e.to_string())? == 0.0, "d2 has no query term but scored");
    Ok(())
}

fn tree_kernel() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for i in 0..200 {
        let a = random_tree(&mut rng, &format!("a{i}"));
        let b = random_tree(&mut rng, &format!("b{i}"));
        let ab = tree_kernel_similarity(&a, &b, DEFAULT_MAX_PATH);
        let ba = tree_kernel_similarity(&b, &a, DEFAULT_MAX_PATH);
        ensure!(ab == ba, "pair {i}: asymmetric {ab} vs {ba}");
        ensure!((0.0..=1.0).contains(&ab), "pair {i}: {ab} outside [0,1]");
        let aa = tree_kernel_similarity(&a, &a, DEFAULT_MAX_PATH);
        ensure!(aa == 1.0, "tree {i}: self-similarity {aa}");
    }
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let j = jaccard(&set(&["p", "q"]), &set(&["q", "r"]));
    ensure!(close(j, 1.0 / 3.0, 1e-15), "{{p,q}} vs {{q,r}}: {j}");
    Ok(())
}

fn filters() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for case in 0..1000 {
        let n = rng.random_range(1..30);
        let recs: Vec<ScoreRecord> = (0..n)
            .map(|i| {
                let g = if rng.random_bool(0.3) { rng.random_range(0..=4) as f64 / 4.0 } else { rng.random::<f64>() };
                ScoreRecord::new(format!("r{i}"), g, Some(rng.random::<f64>()), ScoreSplit::Augmented)
            })
            .collect();
        let m = recs.iter().map(|r| r.s_gold).sum::<f64>() / n as f64;
        let want: BTreeSet<String> = recs.iter().filter(|r| r.s_gold >= m).map(|r| r.id.clone()).collect();
        ensure!(train_filter(&recs).map_err(|e| e.to_string())? == want, "table {case}: train filter differs");

        let st = ScoreStats {
            gold_mean: rng.random(),
            gold_std: rng.random_range(0.01..0.5),
            pred_mean: rng.random(),
            pred_std: rng.random_range(0.01..0.5),
            n: 50,
            variance_convention: VarianceConvention::Population,
        };
        let want: BTreeSet<String> = recs
            .iter()
            .filter(|r| {
                let zg = (r.s_gold - st.gold_mean) / st.gold_std;
                let zp = (r.s_pred.unwrap() - st.pred_mean) / st.pred_std;
                zg >= 0.0 && zg >= zp
            })
            .map(|r| r.id.clone())
            .collect();
        let got = augment_filter(&recs, &st, StatsMode::PerQuantity).map_err(|e| e.to_string())?;
        ensure!(got == want, "table {case}: augment filter differs");
    }
    let boundary: Vec<ScoreRecord> = [0.25, 0.75, 0.5]
        .iter()
        .enumerate()
        .map(|(i, &g)| ScoreRecord::new(format!("b{i}"), g, None, ScoreSplit::Train))
        .collect();
    ensure!(train_filter(&boundary).map_err(|e| e.to_string())?.contains("b2"), "s_gold == mean was dropped");

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/train_scores.jsonl");
    let recs = read_scores(&path).map_err(|e| e.to_string())?;
    let kept = train_filter(&recs).map_err(|e| e.to_string())?;
    ensure!(recs.len() == 2897 && kept.len() == 1873, "fixture kept {} of {}", kept.len(), recs.len());
    let ratio = kept.len() as f64 / recs.len() as f64;
    ensure!(close(ratio, 0.647, 5e-4), "fixture retention ratio {ratio:.4}");
    Ok(())
}

fn f_test() -> Check {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 4.0, 6.0, 8.0, 10.0];
    let same = f_test_variance(&a, &a, Tail::TwoSided).map_err(|e| e.to_string())?;
    ensure!(same.f == 1.0 && same.p == 1.0, "F = {} gave p = {}", same.f, same.p);
    let shifted: Vec<f64> = a.iter().map(|x| x + 7.0).collect();
    let t = f_test_variance(&a, &shifted, Tail::TwoSided).map_err(|e| e.to_string())?;
    ensure!(t.p == 1.0, "equal variances gave p = {}", t.p);
    let got = f_test_variance(&a, &b, Tail::TwoSided).map_err(|e| e.to_string())?;
    let (f, p) = f_test_oracle(&a, &b);
    ensure!(close(got.f, f, 1e-12), "F {} vs {f}", got.f);
    ensure!(close(got.p, p, 1e-6), "p {} vs oracle {p}", got.p);
    Ok(())
}

fn offline_end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path().join("run");
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
        }
        fs::create_dir(&dir).map_err(|e| e.to_string())?;
        support::offline_pipeline(&dir)?;
        snapshots.push(support::snapshot(&dir));
    }
    let corpus = load_dataset(&support::corpus()).map_err(|e| e.to_string())?;
    ensure!(corpus.len() == 20, "fixture corpus has {} instances", corpus.len());
    let (first, second) = (&snapshots[0], &snapshots[1]);
    ensure!(first.keys().eq(second.keys()), "runs wrote different file sets");
    for (path, bytes) in first {
        ensure!(second[path] == *bytes, "{} differs between runs", path.display());
    }
    ensure!(first.contains_key(&PathBuf::from("report/report.txt")), "no report written");

    let stats = support::read_json(&dir.join("pl/extract_stats.json"));
    let preds = fs::read_to_string(dir.join("pl/predictions.jsonl")).map_err(|e| e.to_string())?;
    for line in preds.lines() {
        let p: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let id = p["id"].as_str().unwrap_or_default();
        ensure!(p.get("error").is_none(), "{id} failed: {}", p["error"]);
        let events = p["events"].as_array().map_or(0, Vec::len) as u64;
        let requests = stats["per_instance"][id]["requests"].as_u64().unwrap_or(0);
        ensure!(requests == 1 + 13 * events, "{id}: {requests} requests for {events} stage-1 events");
    }
    for run in ["zs", "fs", "pl"] {
        let s = support::read_json(&dir.join(run).join("extract_stats.json"));
        ensure!(s["failures"] == 0, "{run}: {} failures", s["failures"]);
        ensure!(s["cache_hits"] == s["requests"], "{run}: not every request was served from the cache");
    }
    Ok(())
}

fn golden(name: &str) -> Result<String, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn prompt_fidelity() -> Check {
    let sentences = [
        "He got a rash from drug X.",
        "Ménière's disease improved with betahistine 16 mg \"twice daily\".",
        "A 46-year-old female developed panniculitis after glatiramer acetate {injection}.",
    ];
    for (strategy, file) in [
        (PromptStrategy::Schema, "schema.txt"),
        (PromptStrategy::Code, "code.txt"),
        (PromptStrategy::Explanation, "explanation.txt"),
        (PromptStrategy::Pipeline, "pipeline_stage1.txt"),
    ] {
        let gold = golden(file)?;
        for s in sentences {
            let built = build_zero_shot(strategy, s);
            ensure!(built.prompt() == gold.replace("<SENTENCE>", s), "{file} differs for {s:?}");
        }
    }
    let stage2 = golden("pipeline_stage2.txt")?;
    let fields = Stage1Fields {
        event_type: "adverse event".into(),
        subject: "A 46-year-old female".into(),
        treatment: "glatiramer acetate".into(),
        effect: "panniculitis".into(),
    };
    for kind in ArgumentKind::SUB {
        let question = golden(&format!("questions/{}.txt", kind.prompt_name()))?;
        ensure!(stage2_question(kind) == Some(question.as_str()), "question for {kind} differs");
        let want = stage2
            .replace("<SENTENCE>", sentences[2])
            .replace("<EVENT_TYPE>", &fields.event_type)
            .replace("<SUBJECT>", &fields.subject)
            .replace("<TREATMENT>", &fields.treatment)
            .replace("<EFFECT>", &fields.effect)
            .replace("<QUESTION>", &question);
        let built = build_pipeline_stage2(sentences[2], &fields, kind).map_err(|e| e.to_string())?;
        ensure!(built.prompt() == want, "stage-2 prompt for {kind} differs");
    }

    let text = "We report two patients with acne vulgaris with minocycline-induced pigmentation.";
    let mut event = Event::new(EventType::AdverseEvent);
    event.trigger = Some(Span::ungrounded("induced"));
    event.arguments = vec![
        Argument::new(ArgumentKind::Subject, Span::ungrounded("two patients with acne vulgaris")),
        Argument::with_subs(
            ArgumentKind::Treatment,
            Span::ungrounded("minocycline"),
            vec![Argument::new(ArgumentKind::Drug, Span::ungrounded("minocycline"))],
        ),
        Argument::new(ArgumentKind::Effect, Span::ungrounded("pigmentation")),
    ];
    let inst = Instance::new("tpl", text, vec![event]);
    let output = render_synthesis_output(&inst.events);
    let full = ConstraintPair { drug: "doxycycline".into(), effect: Some("hyperpigmentation".into()), source_id: None };
    let drug_only = ConstraintPair { effect: None, ..full.clone() };
    for (category, file, constraint) in [
        (SynthesisCategory::Adverse, "synthesis_adverse.txt", Some(&full)),
        (SynthesisCategory::Therapeutic, "synthesis_therapeutic.txt", Some(&drug_only)),
        (SynthesisCategory::MultiEvent, "synthesis_multi_event.txt", None),
    ] {
        let gold = golden(file)?;
        let mut want = gold.replace("<SENTENCE>", text).replace("<OUTPUT>", &output);
        if let Some(c) = constraint {
            want = want.replace("<CONST_DRUG>", &c.drug);
            if let Some(e) = &c.effect {
                want = want.replace("<CONST_EFFECT>", e);
            }
        }
        ensure!(!want.contains("<CONST_"), "{file} has a placeholder the variant does not fill");
        let built = build_synthesis_prompt(&inst, constraint, category).map_err(|e| e.to_string())?;
        ensure!(built.prompt() == want, "{file} differs");
    }
    Ok(())
}

fn revision_rule() -> Check {
    let corpus = load_dataset(&support::corpus()).map_err(|e| e.to_string())?;
    let inst = corpus
        .instances
        .iter()
        .find(|i| i.text.contains("acne vulgaris") && i.text.contains("minocycline"))
        .ok_or("fixture lacks the acne vulgaris instance")?
        .clone();
    let subject_disorders = |ds: &Dataset| -> Vec<String> {
        ds.instances[0]
            .events
            .iter()
            .flat_map(|e| &e.arguments)
            .filter(|a| a.kind == ArgumentKind::Subject)
            .flat_map(|a| &a.sub_arguments)
            .filter(|s| s.kind == ArgumentKind::SubjectDisorder)
            .map(|s| s.span.text.clone())
            .collect()
    };
    let single = Dataset::new(vec![inst]).map_err(|e| e.to_string())?;
    ensure!(subject_disorders(&single).is_empty(), "instance already carries a subject.disorder");
    let once = revise_subject_disorder(&single);
    ensure!(once.count == 1, "revision added {} arguments", once.count);
    ensure!(subject_disorders(&once.dataset) == ["acne vulgaris"], "added {:?}", subject_disorders(&once.dataset));
    let twice = revise_subject_disorder(&once.dataset);
    ensure!(twice.count == 0 && twice.dataset == once.dataset, "second revision changed the data");
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Duration); 9] = [
        ("metric oracle equivalence", metric_oracle, Duration::from_secs(5)),
        ("linearization round-trip", linearization, Duration::from_secs(2)),
        ("BM25 correctness", bm25, Duration::from_secs(5)),
        ("tree-kernel properties", tree_kernel, Duration::from_secs(1)),
        ("filter formulas", filters, Duration::from_secs(2)),
        ("F-test", f_test, Duration::from_secs(1)),
        ("offline end-to-end", offline_end_to_end, Duration::from_secs(30)),
        ("prompt fidelity", prompt_fidelity, Duration::from_secs(1)),
        ("revision rule", revision_rule, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let outcome = match result {
            Ok(()) if took <= limit => Ok(()),
            Ok(()) => Err(format!("took {:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs())),
            Err(e) => Err(e),
        };
        match outcome {
            Ok(()) => println!("PASS  {name}  ({:.2} s, limit {} s)", took.as_secs_f64(), limit.as_secs()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}  ({:.2} s): {e}", took.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
