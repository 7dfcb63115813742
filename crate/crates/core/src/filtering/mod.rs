//! Confidence-based retention of training and synthesized instances from
//! per-instance sequence probabilities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("no score records")]
    EmptyInput,
    #[error("standard deviation of {0} is zero")]
    DegenerateStd(&'static str),
    #[error("record {0:?} has no s_pred")]
    MissingPrediction(String),
    #[error("record {id:?}: {field} = {value} is outside [0, 1]")]
    InvalidProbability { id: String, field: &'static str, value: f64 },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("statistics need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSplit {
    Train,
    Validation,
    Test,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub s_gold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_pred: Option<f64>,
    pub split: ScoreSplit,
}

impl ScoreRecord {
    pub fn new(id: impl Into<String>, s_gold: f64, s_pred: Option<f64>, split: ScoreSplit) -> Self {
        ScoreRecord { id: id.into(), s_gold, s_pred, split }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |field, value: f64| FilterError::InvalidProbability { id: self.id.clone(), field, value };
        if !(0.0..=1.0).contains(&self.s_gold) {
            return Err(bad("s_gold", self.s_gold));
        }
        match self.s_pred {
            Some(p) if !(0.0..=1.0).contains(&p) => Err(bad("s_pred", p)),
            _ => Ok(()),
        }
    }

    fn pred(&self) -> Result<f64, FilterError> {
        self.s_pred.ok_or_else(|| FilterError::MissingPrediction(self.id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceConvention {
    /// Divide by n.
    Population,
    /// Divide by n − 1.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub gold_mean: f64,
    pub gold_std: f64,
    pub pred_mean: f64,
    pub pred_std: f64,
    pub n: usize,
    pub variance_convention: VarianceConvention,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64], convention: VarianceConvention) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let denom = match convention {
        VarianceConvention::Population => values.len() as f64,
        VarianceConvention::Sample => (values.len() - 1) as f64,
    };
    (ss / denom).sqrt()
}

impl ScoreStats {
    /// Population statistics of s_gold and s_pred over reference records,
    /// normally the validation split.
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self, FilterError> {
        if records.len() < 2 {
            return Err(FilterError::TooFewRecords(records.len()));
        }
        let mut gold = Vec::with_capacity(records.len());
        let mut pred = Vec::with_capacity(records.len());
        for r in records {
            r.validate()?;
            gold.push(r.s_gold);
            pred.push(r.pred()?);
        }
        let conv = VarianceConvention::Population;
        Ok(ScoreStats {
            gold_mean: mean(&gold),
            gold_std: std_dev(&gold, conv),
            pred_mean: mean(&pred),
            pred_std: std_dev(&pred, conv),
            n: records.len(),
            variance_convention: conv,
        })
    }
}

pub fn zscore(value: f64, mean: f64, std: f64) -> Result<f64, FilterError> {
    if std == 0.0 {
        return Err(FilterError::DegenerateStd("reference scores"));
    }
    Ok((value - mean) / std)
}

fn check_unique(records: &[ScoreRecord]) -> Result<(), FilterError> {
    let mut seen = BTreeSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(FilterError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainFilterAudit {
    pub n: usize,
    pub mean_s_gold: f64,
    pub retained: BTreeSet<String>,
    pub dropped: BTreeSet<String>,
}

/// Keeps records whose s_gold is at least the mean over all input records.
pub fn train_filter_audit(records: &[ScoreRecord]) -> Result<TrainFilterAudit, FilterError> {
    if records.is_empty() {
        return Err(FilterError::EmptyInput);
    }
    check_unique(records)?;
    let gold: Vec<f64> = records.iter().map(|r| r.s_gold).collect();
    let m = mean(&gold);
    let (keep, drop): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.s_gold >= m);
    Ok(TrainFilterAudit {
        n: records.len(),
        mean_s_gold: m,
        retained: keep.into_iter().map(|r| r.id.clone()).collect(),
        dropped: drop.into_iter().map(|r| r.id.clone()).collect(),
    })
}

pub fn train_filter(records: &[ScoreRecord]) -> Result<BTreeSet<String>, FilterError> {
    train_filter_audit(records).map(|a| a.retained)
}

/// Which reference statistics normalize s_pred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMode {
    /// s_gold by gold statistics, s_pred by pred statistics.
    #[default]
    PerQuantity,
    /// Both quantities by gold statistics.
    Shared,
}

impl fmt::Display for StatsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatsMode::PerQuantity => "per-quantity",
            StatsMode::Shared => "shared",
        })
    }
}

impl FromStr for StatsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-quantity" => Ok(StatsMode::PerQuantity),
            "shared" => Ok(StatsMode::Shared),
            other => Err(format!("unknown stats mode {other:?} (per-quantity | shared)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    BelowReference,
    BelowPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentDecision {
    pub z_gold: f64,
    pub z_pred: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentFilterAudit {
    pub stats: ScoreStats,
    pub stats_mode: StatsMode,
    pub decisions: BTreeMap<String, AugmentDecision>,
    pub retained: BTreeSet<String>,
}

/// Drop when z(s_gold) < 0 or z(s_gold) < z(s_pred).
pub fn decide(z_gold: f64, z_pred: f64) -> Option<DropReason> {
    if z_gold < 0.0 {
        Some(DropReason::BelowReference)
    } else if z_gold < z_pred {
        Some(DropReason::BelowPrediction)
    } else {
        None
    }
}

pub fn augment_filter_audit(
    records: &[ScoreRecord],
    stats: &ScoreStats,
    mode: StatsMode,
) -> Result<AugmentFilterAudit, FilterError> {
    check_unique(records)?;
    if stats.gold_std == 0.0 {
        return Err(FilterError::DegenerateStd("validation s_gold"));
    }
    let (pm, ps) = match mode {
        StatsMode::PerQuantity => (stats.pred_mean, stats.pred_std),
        StatsMode::Shared => (stats.gold_mean, stats.gold_std),
    };
    if ps == 0.0 {
        return Err(FilterError::DegenerateStd("validation s_pred"));
    }
    let mut decisions = BTreeMap::new();
    let mut retained = BTreeSet::new();
    for r in records {
        let z_gold = zscore(r.s_gold, stats.gold_mean, stats.gold_std)?;
        let z_pred = zscore(r.pred()?, pm, ps)?;
        let dropped = decide(z_gold, z_pred);
        if dropped.is_none() {
            retained.insert(r.id.clone());
        }
        decisions.insert(r.id.clone(), AugmentDecision { z_gold, z_pred, dropped });
    }
    Ok(AugmentFilterAudit { stats: stats.clone(), stats_mode: mode, decisions, retained })
}

pub fn augment_filter(
    records: &[ScoreRecord],
    stats: &ScoreStats,
    mode: StatsMode,
) -> Result<BTreeSet<String>, FilterError> {
    augment_filter_audit(records, stats, mode).map(|a| a.retained)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, FilterError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| FilterError::Io(format!("{p}: {e}")))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(line)
            .map_err(|e| FilterError::Format { path: p.clone(), line: i + 1, message: e.to_string() })?;
        rec.validate()
            .map_err(|e| FilterError::Format { path: p.clone(), line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_scores(path: &Path, records: &[ScoreRecord]) -> Result<(), FilterError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("score records serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| FilterError::Io(format!("{}: {e}", path.display())))
}

pub fn read_stats(path: &Path) -> Result<ScoreStats, FilterError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| FilterError::Io(format!("{p}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| FilterError::Format { path: p, line: e.line(), message: e.to_string() })
}

pub fn write_stats(path: &Path, stats: &ScoreStats) -> Result<(), FilterError> {
    let mut text = serde_json::to_string_pretty(stats).expect("stats serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| FilterError::Io(format!("{}: {e}", path.display())))
}
