use std::path::PathBuf;

use anyhow::{bail, Result};
use phee_core::corpus::Split;
use phee_core::llm::{run_extraction, write_predictions, ExtractionConfig};
use phee_core::prompting::{FewShotOptions, PromptStrategy};
use phee_core::retrieval::SelectionStrategy;
use serde::Serialize;

use super::retrieve::{apply_selection_args, Resources};
use crate::config::RunConfig;
use crate::io::{chat_client, create_dir, load_split, parse_split, take_sorted, write_json, write_run_config};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory written by prepare-data.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// schema | code | explanation | pipeline.
    #[arg(long)]
    pub strategy: Option<PromptStrategy>,
    /// Demonstrations per event type; 0 is zero-shot.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Demonstration selection: random | bm25 | dense | tree_kernel.
    #[arg(long)]
    pub select: Option<SelectionStrategy>,
    /// Serve every request from the response cache; a miss fails the instance.
    #[arg(long)]
    pub cache_only: bool,
    /// Response cache directory.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Split to extract from.
    #[arg(long)]
    pub split: Option<String>,
    /// Only the first N instances by id.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub trees: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tree_manifest: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Exit zero even when some instances failed (outputs are written either way).
    #[arg(long)]
    pub allow_failures: bool,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    apply_selection_args(&mut cfg, args.select, &args.trees, &args.tree_manifest, &args.embeddings);
    if let Some(s) = args.strategy {
        cfg.extract.strategy = s;
    }
    if let Some(k) = args.shots {
        cfg.extract.shots = k;
    }
    if let Some(s) = &args.split {
        cfg.extract.split = s.clone();
    }
    if let Some(m) = &args.model {
        cfg.llm.model = m.clone();
    }
    if args.cache_only {
        cfg.llm.cache_only = true;
    }
    if args.cache_dir.is_some() {
        cfg.llm.cache_dir = args.cache_dir.clone();
    }
    cfg.validate()?;

    let queries = load_split(&args.data, parse_split(&cfg.extract.split)?)?;
    let instances = take_sorted(&queries, args.limit);
    let pool = if cfg.extract.shots > 0 { load_split(&args.data, Split::Train)? } else { Default::default() };
    let res = if cfg.extract.shots > 0 { Resources::load(&cfg, cfg.extract.select)? } else { Resources::default() };
    let selector = if cfg.extract.shots > 0 { Some(res.selector(&cfg, &pool.instances)?) } else { None };

    let client = chat_client(&cfg)?;
    let ecfg = ExtractionConfig {
        strategy: cfg.extract.strategy,
        shots: cfg.extract.shots,
        model: cfg.llm.model.clone(),
        temperature: cfg.extract.temperature,
        few_shot: FewShotOptions { budget_tokens: cfg.extract.budget_tokens, order: cfg.extract.order },
        concurrency: cfg.llm.concurrency,
    };
    let result = run_extraction(&instances, &ecfg, selector.as_ref(), &client);

    create_dir(&args.out)?;
    write_predictions(&args.out.join("predictions.jsonl"), &result.predictions)?;
    write_json(&args.out.join("extract_stats.json"), &result.stats)?;
    write_run_config(&args.out, "extract", &args, &cfg)?;
    log::info!(
        "{} instances, {} requests ({} cached), {} failed, {} unparseable",
        result.stats.instances,
        result.stats.requests,
        result.stats.cache_hits,
        result.stats.failures,
        result.stats.unparseable
    );
    if !args.allow_failures && result.stats.failures > 0 {
        bail!("{} of {} instances failed", result.stats.failures, result.stats.instances);
    }
    Ok(())
}
