use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use phee_core::corpus::{load_dataset, write_dataset, Instance, Split};
use phee_core::filtering::{
    augment_filter_audit, read_scores, read_stats, train_filter_audit, write_stats, ScoreStats, StatsMode,
};
use phee_core::synthesis::{assemble_augmented, dedup_synthesized, DataSetting, FilterSets};
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{create_dir, load_split, write_json, write_lines, write_run_config};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory written by prepare-data.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Score records for the training split.
    #[arg(long, value_name = "FILE")]
    pub train_scores: Option<PathBuf>,
    /// Score records for the validation split; reference statistics are computed from them.
    #[arg(long, value_name = "FILE", conflicts_with = "validation_stats")]
    pub validation_scores: Option<PathBuf>,
    /// Precomputed reference statistics.
    #[arg(long, value_name = "FILE")]
    pub validation_stats: Option<PathBuf>,
    /// Score records for the synthesized instances.
    #[arg(long, value_name = "FILE")]
    pub aug_scores: Option<PathBuf>,
    /// synthesized.jsonl written by synthesize.
    #[arg(long, value_name = "FILE")]
    pub synthesized: Option<PathBuf>,
    /// Build one data setting only, e.g. "Tr. Fil.+Aug. Fil." or tr_fil_aug_fil.
    #[arg(long)]
    pub mode: Option<DataSetting>,
    /// per-quantity | shared.
    #[arg(long)]
    pub stats_mode: Option<StatsMode>,
}

#[derive(Serialize)]
struct SettingSummary {
    label: &'static str,
    instances: usize,
    train: usize,
    augmented: usize,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    if args.mode.is_some() {
        cfg.filter.mode = args.mode;
    }
    if let Some(m) = args.stats_mode {
        cfg.filter.stats_mode = m;
    }
    cfg.validate()?;

    let train = load_split(&args.data, Split::Train)?;
    let synthesized: Option<Vec<Instance>> = match &args.synthesized {
        Some(p) => Some(load_dataset(p).with_context(|| format!("loading {}", p.display()))?.instances),
        None => None,
    };
    let has_stats = args.validation_scores.is_some() || args.validation_stats.is_some();
    let available = |s: DataSetting| {
        (!s.uses_augmented() || synthesized.is_some())
            && (!s.filters_train() || args.train_scores.is_some())
            && (!s.filters_augmented() || (has_stats && args.aug_scores.is_some()))
    };
    let settings: Vec<DataSetting> = match cfg.filter.mode {
        Some(s) => {
            if !available(s) {
                bail!("{}: {}", s.label(), missing_inputs(s, &args));
            }
            vec![s]
        }
        None => DataSetting::ALL.into_iter().filter(|&s| available(s)).collect(),
    };
    create_dir(&args.out)?;

    let mut filters = FilterSets::default();
    if settings.iter().any(|s| s.filters_train()) {
        let path = args.train_scores.as_ref().expect("checked above");
        let records = read_scores(path)?;
        let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
        let unscored: Vec<&str> = train.instances.iter().map(|i| i.id.as_str()).filter(|id| !ids.contains(id)).collect();
        if !unscored.is_empty() {
            bail!("{}: {} training instances have no score (first: {})", path.display(), unscored.len(), unscored[0]);
        }
        let audit = train_filter_audit(&records)?;
        write_json(&args.out.join("train_filter_audit.json"), &audit)?;
        write_lines(&args.out.join("train_retained.txt"), audit.retained.iter().map(String::as_str))?;
        log::info!("train filter kept {} of {} (mean s_gold {:.4})", audit.retained.len(), audit.n, audit.mean_s_gold);
        filters.train = Some(audit.retained);
    }
    if settings.iter().any(|s| s.filters_augmented()) {
        let stats = match (&args.validation_scores, &args.validation_stats) {
            (Some(p), _) => ScoreStats::from_records(&read_scores(p)?)?,
            (None, Some(p)) => read_stats(p)?,
            (None, None) => unreachable!("checked above"),
        };
        write_stats(&args.out.join("validation_stats.json"), &stats)?;
        let path = args.aug_scores.as_ref().expect("checked above");
        let records = read_scores(path)?;
        let (kept, _) = dedup_synthesized(&train.instances, synthesized.as_deref().expect("checked above"));
        let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
        let unscored: Vec<&str> = kept.iter().map(|i| i.id.as_str()).filter(|id| !ids.contains(id)).collect();
        if !unscored.is_empty() {
            bail!("{}: {} synthesized instances have no score (first: {})", path.display(), unscored.len(), unscored[0]);
        }
        let audit = augment_filter_audit(&records, &stats, cfg.filter.stats_mode)?;
        write_json(&args.out.join("augment_filter_audit.json"), &audit)?;
        write_lines(&args.out.join("augment_retained.txt"), audit.retained.iter().map(String::as_str))?;
        log::info!("augment filter kept {} of {}", audit.retained.len(), audit.decisions.len());
        filters.augmented = Some(audit.retained);
    }

    let mut summary = BTreeMap::new();
    let synth = synthesized.as_deref().unwrap_or_default();
    for s in settings {
        let data = assemble_augmented(&train.instances, synth, s, &filters)?;
        write_dataset(&args.out.join(format!("data_{}.jsonl", s.slug())), &data)?;
        let augmented = data.iter().filter(|i| i.id.starts_with(phee_core::synthesis::ID_PREFIX)).count();
        summary.insert(
            s.slug(),
            SettingSummary { label: s.label(), instances: data.len(), train: data.len() - augmented, augmented },
        );
    }
    write_json(&args.out.join("settings.json"), &summary)?;
    write_run_config(&args.out, "filter", &args, &cfg)
}

fn missing_inputs(s: DataSetting, args: &Args) -> String {
    let mut need = Vec::new();
    if s.uses_augmented() && args.synthesized.is_none() {
        need.push("--synthesized");
    }
    if s.filters_train() && args.train_scores.is_none() {
        need.push("--train-scores");
    }
    if s.filters_augmented() {
        if args.validation_scores.is_none() && args.validation_stats.is_none() {
            need.push("--validation-scores or --validation-stats");
        }
        if args.aug_scores.is_none() {
            need.push("--aug-scores");
        }
    }
    format!("missing {}", need.join(", "))
}
