use std::path::PathBuf;

use anyhow::{bail, Result};
use phee_core::corpus::{write_dataset, Split};
use phee_core::synthesis::{run_synthesis, write_provenance, ConstraintSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{chat_client, create_dir, load_split, take_sorted, write_json, write_run_config};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory written by prepare-data; train instances are the templates.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Only the first N templates by id.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub cache_only: bool,
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    /// Exit zero even when some templates produced nothing.
    #[arg(long)]
    pub allow_failures: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    templates: usize,
    generated: usize,
    constraint_unsatisfied: usize,
    parse_unclean: usize,
    failures: &'a [(String, String)],
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    if args.limit.is_some() {
        cfg.synthesis.limit = args.limit;
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

    let train = load_split(&args.data, Split::Train)?;
    let templates = take_sorted(&train, cfg.synthesis.limit);
    let sampler = ConstraintSampler::new(&train.instances);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let client = chat_client(&cfg)?;
    let run = run_synthesis(&templates, &sampler, &mut rng, &client, &cfg.llm.model, cfg.llm.concurrency);

    create_dir(&args.out)?;
    write_dataset(&args.out.join("synthesized.jsonl"), run.generated.iter().map(|g| &g.instance))?;
    write_provenance(&args.out.join("provenance.jsonl"), &run.generated)?;
    write_json(&args.out.join("drug_histogram.json"), &run.drug_histogram())?;
    let summary = Summary {
        templates: templates.len(),
        generated: run.generated.len(),
        constraint_unsatisfied: run.generated.iter().filter(|g| !g.constraint_satisfied).count(),
        parse_unclean: run.generated.iter().filter(|g| !g.parse_clean).count(),
        failures: &run.failures,
    };
    write_json(&args.out.join("synthesis_summary.json"), &summary)?;
    write_run_config(&args.out, "synthesize", &args, &cfg)?;
    if !args.allow_failures && !run.failures.is_empty() {
        bail!("{} of {} templates failed", run.failures.len(), templates.len());
    }
    Ok(())
}
