use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use phee_core::corpus::{Instance, Split};
use phee_core::retrieval::{load_trees, Bm25Params, DependencyTree, EmbeddingStore, SelectionStrategy, Selector};
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{create_dir, load_split, parse_split, write_run_config, write_text};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory written by prepare-data.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// random | bm25 | dense | tree_kernel.
    #[arg(long)]
    pub select: Option<SelectionStrategy>,
    /// Demonstrations per event type.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Split holding the query instances.
    #[arg(long)]
    pub split: Option<String>,
    /// CoNLL-U parses for tree-kernel selection.
    #[arg(long, value_name = "FILE")]
    pub trees: Option<PathBuf>,
    /// JSON lines {id, sent_id} mapping instances to parses.
    #[arg(long, value_name = "FILE")]
    pub tree_manifest: Option<PathBuf>,
    /// JSON lines {id, vector} for dense selection.
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
}

/// Parses and embeddings a selector borrows from.
#[derive(Default)]
pub struct Resources {
    trees: BTreeMap<String, DependencyTree>,
    store: Option<EmbeddingStore>,
}

impl Resources {
    pub fn load(cfg: &RunConfig, strategy: SelectionStrategy) -> Result<Self> {
        let mut r = Resources::default();
        match strategy {
            SelectionStrategy::TreeKernel => {
                let Some(path) = &cfg.extract.trees else {
                    bail!("extract.trees: a CoNLL-U file is required for tree-kernel selection");
                };
                r.trees = load_trees(path, cfg.extract.tree_manifest.as_deref())
                    .with_context(|| format!("loading {}", path.display()))?;
            }
            SelectionStrategy::Dense => {
                let Some(path) = &cfg.extract.embeddings else {
                    bail!("extract.embeddings: an embedding file is required for dense selection");
                };
                let mut store = EmbeddingStore::load(path).with_context(|| format!("loading {}", path.display()))?;
                store.normalize();
                r.store = Some(store);
            }
            SelectionStrategy::Random | SelectionStrategy::Bm25 => {}
        }
        Ok(r)
    }

    pub fn selector<'a>(&'a self, cfg: &RunConfig, pool: &'a [Instance]) -> Result<Selector<'a>> {
        Ok(match cfg.extract.select {
            SelectionStrategy::Random => Selector::random(pool, cfg.seed),
            SelectionStrategy::Bm25 => Selector::bm25(pool, Bm25Params::default())?,
            SelectionStrategy::Dense => Selector::dense(pool, self.store.as_ref().expect("loaded for dense"))?,
            SelectionStrategy::TreeKernel => Selector::tree_kernel(pool, &self.trees, cfg.extract.max_path)?,
        })
    }
}

pub fn apply_selection_args(
    cfg: &mut RunConfig,
    select: Option<SelectionStrategy>,
    trees: &Option<PathBuf>,
    manifest: &Option<PathBuf>,
    embeddings: &Option<PathBuf>,
) {
    if let Some(s) = select {
        cfg.extract.select = s;
    }
    if trees.is_some() {
        cfg.extract.trees = trees.clone();
    }
    if manifest.is_some() {
        cfg.extract.tree_manifest = manifest.clone();
    }
    if embeddings.is_some() {
        cfg.extract.embeddings = embeddings.clone();
    }
}

#[derive(Serialize)]
struct DemoLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    selection: &'a phee_core::retrieval::Selection,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    apply_selection_args(&mut cfg, args.select, &args.trees, &args.tree_manifest, &args.embeddings);
    if let Some(k) = args.shots {
        cfg.extract.shots = k;
    }
    if let Some(s) = &args.split {
        cfg.extract.split = s.clone();
    }
    cfg.validate()?;
    let queries = load_split(&args.data, parse_split(&cfg.extract.split)?)?;
    let pool = load_split(&args.data, Split::Train)?;
    let res = Resources::load(&cfg, cfg.extract.select)?;
    let selector = res.selector(&cfg, &pool.instances)?;
    let mut out = String::new();
    for q in crate::io::take_sorted(&queries, None) {
        let selection = selector.select(q, cfg.extract.shots).with_context(|| format!("selecting for {}", q.id))?;
        out.push_str(&serde_json::to_string(&DemoLine { id: &q.id, selection: &selection })?);
        out.push('\n');
    }
    create_dir(&args.out)?;
    write_text(&args.out.join("demonstrations.jsonl"), &out)?;
    write_run_config(&args.out, "retrieve-demos", &args, &cfg)
}
