use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use phee_core::corpus::load_dataset;
use phee_core::llm::read_predictions;
use phee_core::metrics::{
    evaluate, event_type_f1, render_report, trigger_em_f1, Averaging, Corpus, EvalOptions, EvalReport, MetricsError,
    Prf, Semantics,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{create_dir, parse_serde, write_json, write_run_config, write_text};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Gold instances (dataset JSON lines).
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// predictions.jsonl from extract, or a dataset file.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Row label in the rendered report.
    #[arg(long, default_value = "run")]
    pub label: String,
    /// multiset | set.
    #[arg(long, value_parser = parse_serde::<Semantics>)]
    pub semantics: Option<Semantics>,
    /// micro | macro.
    #[arg(long, value_parser = parse_serde::<Averaging>)]
    pub averaging: Option<Averaging>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub label: String,
    pub evaluation: EvalReport,
    pub event_type: Prf,
    /// Absent when gold carries no triggers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Prf>,
    /// Instances whose extraction failed, scored as empty.
    pub failed: Vec<String>,
}

impl EvaluationFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn load_predictions(path: &Path) -> Result<(Corpus, Vec<String>)> {
    match read_predictions(path) {
        Ok(records) => {
            let mut corpus = Corpus::new();
            let mut failed = Vec::new();
            for r in records {
                if r.error.is_some() {
                    failed.push(r.id.clone());
                    corpus.insert(r.id, Vec::new());
                } else {
                    let events = r.to_events()?;
                    corpus.insert(r.id, events);
                }
            }
            Ok((corpus, failed))
        }
        Err(pred_err) => {
            let ds = load_dataset(path).map_err(|ds_err| {
                anyhow::anyhow!("{}: neither a predictions file ({pred_err}) nor a dataset ({ds_err})", path.display())
            })?;
            Ok((ds.instances.into_iter().map(|i| (i.id, i.events)).collect(), Vec::new()))
        }
    }
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    if let Some(s) = args.semantics {
        cfg.evaluate.semantics = s;
    }
    if let Some(a) = args.averaging {
        cfg.evaluate.averaging = a;
    }
    cfg.validate()?;

    let gold = load_dataset(&args.gold).with_context(|| format!("loading {}", args.gold.display()))?;
    let golds: Corpus = gold.instances.into_iter().map(|i| (i.id, i.events)).collect();
    let (preds, failed) = load_predictions(&args.pred)?;
    let opts = EvalOptions { semantics: cfg.evaluate.semantics, averaging: cfg.evaluate.averaging };
    let evaluation = evaluate(&preds, &golds, opts)?;
    let gold_has_triggers = golds.values().flatten().any(|e| e.trigger.is_some());
    let trigger = if gold_has_triggers {
        match trigger_em_f1(&preds, &golds) {
            Ok(p) => Some(p),
            Err(MetricsError::MissingTriggers) => {
                log::info!("predictions carry no triggers; trigger scores omitted");
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let file = EvaluationFile {
        label: args.label.clone(),
        event_type: event_type_f1(&preds, &golds)?,
        evaluation,
        trigger,
        failed,
    };

    let mut text = render_report(&args.label, &file.evaluation);
    text.push('\n');
    let line = |name: &str, p: &Prf| {
        format!("{name:20} P {:.2}  R {:.2}  F1 {:.2}\n", p.precision * 100.0, p.recall * 100.0, p.f1 * 100.0)
    };
    text.push_str(&line("event type", &file.event_type));
    if let Some(t) = &file.trigger {
        text.push_str(&line("trigger", t));
    }
    if !file.failed.is_empty() {
        text.push_str(&format!("{} failed instances scored as empty\n", file.failed.len()));
    }

    create_dir(&args.out)?;
    write_text(&args.out.join("report.txt"), &text)?;
    write_json(&args.out.join("report.json"), &file)?;
    write_run_config(&args.out, "evaluate", &args, &cfg)?;
    print!("{text}");
    Ok(())
}
