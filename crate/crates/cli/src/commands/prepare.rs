use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use phee_core::corpus::{load_dataset, load_phee, make_folds, make_splits, revise_subject_disorder, write_dataset, Split};
use serde::Serialize;

use crate::config::{InputFormat, RunConfig};
use crate::io::{create_dir, split_file, write_json, write_run_config};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Corpus file (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Input layout: canonical | phee.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<InputFormat>,
    /// Split proportions, e.g. 0.6,0.2,0.2.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Number of cross-validation folds over train and validation.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Skip the subject.disorder revision.
    #[arg(long)]
    pub no_revise: bool,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    match s {
        "canonical" => Ok(InputFormat::Canonical),
        "phee" => Ok(InputFormat::Phee),
        other => Err(format!("unknown format {other:?} (canonical | phee)")),
    }
}

#[derive(Serialize)]
struct Summary {
    instances: usize,
    revised_arguments: usize,
    split_sizes: BTreeMap<&'static str, usize>,
    folds: usize,
    warnings: Vec<String>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    if let Some(f) = args.format {
        cfg.data.format = f;
    }
    if let Some(r) = &args.ratios {
        let [a, b, c] = r.as_slice() else {
            anyhow::bail!("--ratios: expected three comma-separated values, got {}", r.len());
        };
        cfg.data.ratios = [*a, *b, *c];
    }
    if let Some(n) = args.folds {
        cfg.data.folds = n;
    }
    if args.no_revise {
        cfg.data.revise = false;
    }
    cfg.validate()?;

    let (dataset, mut warnings) = match cfg.data.format {
        InputFormat::Canonical => (load_dataset(&args.input)?, Vec::new()),
        InputFormat::Phee => load_phee(&args.input)?,
    };
    let (dataset, revised) = if cfg.data.revise {
        let r = revise_subject_disorder(&dataset);
        warnings.extend(r.warnings);
        (r.dataset, r.count)
    } else {
        (dataset, 0)
    };
    let dataset = make_splits(&dataset, cfg.data.ratios, cfg.seed)?;
    let folds = make_folds(&dataset, cfg.data.folds, cfg.seed)?;

    create_dir(&args.out)?;
    write_dataset(&args.out.join("dataset.jsonl"), &dataset.instances)?;
    let mut split_sizes = BTreeMap::new();
    for split in Split::ALL {
        let part = dataset.split(split);
        split_sizes.insert(split.name(), part.len());
        write_dataset(&split_file(&args.out, split), part).with_context(|| format!("writing {} split", split.name()))?;
    }
    write_json(&args.out.join("splits.json"), &dataset.splits)?;
    write_json(&args.out.join("folds.json"), &folds)?;
    let summary = Summary { instances: dataset.len(), revised_arguments: revised, split_sizes, folds: folds.n_folds, warnings };
    write_json(&args.out.join("prepare_summary.json"), &summary)?;
    write_run_config(&args.out, "prepare-data", &args, &cfg)?;
    log::info!("{} instances, {} revised arguments", summary.instances, revised);
    Ok(())
}
