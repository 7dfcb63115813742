//! Argument-level EM_F1 and Token_F1, trigger and event-type scores, fold
//! aggregation and the variance F-test.

mod report;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ArgumentKind, Event, EventType};
use crate::text::{collapse_whitespace, tokenize};

pub use report::{render_fold_table, render_report, FoldRow, RowValues};
pub use stats::{aggregate_folds, f_test_variance, FTest, FoldSummary, MeanStd, Tail};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction and gold ids differ: missing predictions {missing:?}, unexpected predictions {unexpected:?}")]
    KeyMismatch { missing: Vec<String>, unexpected: Vec<String> },
    #[error("predictions carry no triggers")]
    MissingTriggers,
    #[error("aggregation needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("sample {0} has zero variance")]
    DegenerateVariance(&'static str),
    #[error("sample {which} needs at least 2 values, got {len}")]
    SampleTooSmall { which: &'static str, len: usize },
    #[error("metric {0:?} is missing from a report")]
    MissingMetric(String),
}

/// Per-instance events keyed by instance id.
pub type Corpus = BTreeMap<String, Vec<Event>>;

/// Multiset vs set matching of tuples within an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    #[default]
    Multiset,
    Set,
}

/// Corpus-level pooling of counts (micro) or per-instance averaging (macro).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Micro,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub semantics: Semantics,
    pub averaging: Averaging,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let (p, r) = (ratio(matched, predicted), ratio(matched, gold));
        Prf { precision: p, recall: r, f1: f1_score(p, r), matched, predicted, gold }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    matched: usize,
    predicted: usize,
    gold: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    fn is_empty(&self) -> bool {
        self.predicted == 0 && self.gold == 0
    }
}

/// Pools counts (micro) or averages per-instance scores over instances that
/// have any gold or predicted item in the group (macro).
#[derive(Debug, Clone, Default)]
struct Accumulator {
    total: Counts,
    p_sum: f64,
    r_sum: f64,
    f_sum: f64,
    instances: usize,
}

impl Accumulator {
    fn add(&mut self, c: Counts) {
        self.total.add(c);
        if !c.is_empty() {
            let (p, r) = (ratio(c.matched, c.predicted), ratio(c.matched, c.gold));
            self.p_sum += p;
            self.r_sum += r;
            self.f_sum += f1_score(p, r);
            self.instances += 1;
        }
    }

    fn finish(&self, averaging: Averaging) -> Prf {
        let t = self.total;
        match averaging {
            Averaging::Micro => Prf::from_counts(t.matched, t.predicted, t.gold),
            Averaging::Macro => {
                let n = self.instances.max(1) as f64;
                Prf {
                    precision: self.p_sum / n,
                    recall: self.r_sum / n,
                    f1: self.f_sum / n,
                    matched: t.matched,
                    predicted: t.predicted,
                    gold: t.gold,
                }
            }
        }
    }
}

/// Scores at one matching level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelReport {
    /// Keyed by canonical kind name.
    pub per_kind: BTreeMap<String, Prf>,
    pub main: Prf,
    pub sub: Prf,
    pub overall: Prf,
}

impl LevelReport {
    pub fn kind(&self, kind: ArgumentKind) -> Prf {
        self.per_kind.get(kind.name()).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    pub options: EvalOptions,
    pub em: LevelReport,
    pub token: LevelReport,
}

impl EvalReport {
    /// Flat name → value view used for fold aggregation.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (level, rep) in [("em_f1", &self.em), ("token_f1", &self.token)] {
            out.insert(format!("main.{level}"), rep.main.f1);
            out.insert(format!("sub.{level}"), rep.sub.f1);
            out.insert(format!("overall.{level}"), rep.overall.f1);
            for (kind, prf) in &rep.per_kind {
                out.insert(format!("{kind}.{level}"), prf.f1);
            }
        }
        out
    }
}

/// Argument tuple compared by exact matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArgumentTuple {
    pub event_type: EventType,
    pub kind: ArgumentKind,
    pub text: String,
}

/// All argument tuples of an instance; spans with empty text (placeholder
/// parents) are not arguments and are skipped.
pub fn argument_tuples(events: &[Event]) -> Vec<ArgumentTuple> {
    let mut out = Vec::new();
    for e in events {
        for a in &e.arguments {
            for arg in std::iter::once(a).chain(&a.sub_arguments) {
                let text = collapse_whitespace(&arg.span.text);
                if !text.is_empty() {
                    out.push(ArgumentTuple { event_type: e.event_type, kind: arg.kind, text });
                }
            }
        }
    }
    out
}

fn check_keys(preds: &Corpus, golds: &Corpus) -> Result<(), MetricsError> {
    let missing: Vec<String> = golds.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    let unexpected: Vec<String> = preds.keys().filter(|k| !golds.contains_key(*k)).cloned().collect();
    if missing.is_empty() && unexpected.is_empty() {
        Ok(())
    } else {
        Err(MetricsError::KeyMismatch { missing, unexpected })
    }
}

fn bag<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>, semantics: Semantics) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        let c = m.entry(it).or_insert(0);
        match semantics {
            Semantics::Multiset => *c += 1,
            Semantics::Set => *c = 1,
        }
    }
    m
}

fn overlap<T: std::hash::Hash + Eq>(pred: &HashMap<T, usize>, gold: &HashMap<T, usize>) -> Counts {
    Counts {
        matched: pred.iter().map(|(k, n)| (*n).min(gold.get(k).copied().unwrap_or(0))).sum(),
        predicted: pred.values().sum(),
        gold: gold.values().sum(),
    }
}

/// Per-instance counts for each argument kind at one level.
type KindCounts = BTreeMap<ArgumentKind, Counts>;

fn em_counts(pred: &[Event], gold: &[Event], semantics: Semantics) -> KindCounts {
    let mut out = KindCounts::new();
    let (p, g) = (argument_tuples(pred), argument_tuples(gold));
    for kind in ArgumentKind::ALL {
        let pick = |ts: &[ArgumentTuple]| {
            bag(ts.iter().filter(|t| t.kind == kind).map(|t| (t.event_type, t.text.clone())).collect::<Vec<_>>(), semantics)
        };
        out.insert(kind, overlap(&pick(&p), &pick(&g)));
    }
    out
}

fn token_counts(pred: &[Event], gold: &[Event], semantics: Semantics) -> KindCounts {
    let mut out = KindCounts::new();
    let (p, g) = (argument_tuples(pred), argument_tuples(gold));
    for kind in ArgumentKind::ALL {
        let mut c = Counts::default();
        for et in EventType::ALL {
            let pool = |ts: &[ArgumentTuple]| {
                bag(
                    ts.iter().filter(|t| t.kind == kind && t.event_type == et).flat_map(|t| tokenize(&t.text)).collect::<Vec<_>>(),
                    semantics,
                )
            };
            c.add(overlap(&pool(&p), &pool(&g)));
        }
        out.insert(kind, c);
    }
    out
}

fn level(preds: &Corpus, golds: &Corpus, opts: EvalOptions, counter: fn(&[Event], &[Event], Semantics) -> KindCounts) -> LevelReport {
    let mut per_kind: BTreeMap<ArgumentKind, Accumulator> = BTreeMap::new();
    let (mut main, mut sub, mut overall) = (Accumulator::default(), Accumulator::default(), Accumulator::default());
    for (id, gold) in golds {
        let counts = counter(&preds[id], gold, opts.semantics);
        let (mut m, mut s) = (Counts::default(), Counts::default());
        for (kind, c) in counts {
            per_kind.entry(kind).or_default().add(c);
            if kind.is_main() {
                m.add(c)
            } else {
                s.add(c)
            }
        }
        let mut o = m;
        o.add(s);
        main.add(m);
        sub.add(s);
        overall.add(o);
    }
    LevelReport {
        per_kind: per_kind.into_iter().map(|(k, a)| (k.name().to_string(), a.finish(opts.averaging))).collect(),
        main: main.finish(opts.averaging),
        sub: sub.finish(opts.averaging),
        overall: overall.finish(opts.averaging),
    }
}

pub fn em_f1(preds: &Corpus, golds: &Corpus, opts: EvalOptions) -> Result<LevelReport, MetricsError> {
    check_keys(preds, golds)?;
    Ok(level(preds, golds, opts, em_counts))
}

/// Token overlap with spans pooled per (instance, event type, kind).
pub fn token_f1(preds: &Corpus, golds: &Corpus, opts: EvalOptions) -> Result<LevelReport, MetricsError> {
    check_keys(preds, golds)?;
    Ok(level(preds, golds, opts, token_counts))
}

pub fn evaluate(preds: &Corpus, golds: &Corpus, opts: EvalOptions) -> Result<EvalReport, MetricsError> {
    Ok(EvalReport { instances: golds.len(), options: opts, em: em_f1(preds, golds, opts)?, token: token_f1(preds, golds, opts)? })
}

/// Exact match of (event type, trigger text). Events without a trigger
/// contribute nothing; predictions with no trigger at all are rejected.
pub fn trigger_em_f1(preds: &Corpus, golds: &Corpus) -> Result<Prf, MetricsError> {
    check_keys(preds, golds)?;
    let has_events = preds.values().any(|es| !es.is_empty());
    let has_trigger = preds.values().flatten().any(|e| e.trigger.as_ref().is_some_and(|t| !t.text.trim().is_empty()));
    if has_events && !has_trigger {
        return Err(MetricsError::MissingTriggers);
    }
    let triggers = |es: &[Event]| {
        bag(
            es.iter()
                .filter_map(|e| e.trigger.as_ref().map(|t| (e.event_type, collapse_whitespace(&t.text))))
                .filter(|(_, t)| !t.is_empty())
                .collect::<Vec<_>>(),
            Semantics::Multiset,
        )
    };
    let mut total = Counts::default();
    for (id, gold) in golds {
        total.add(overlap(&triggers(&preds[id]), &triggers(gold)));
    }
    Ok(Prf::from_counts(total.matched, total.predicted, total.gold))
}

pub fn event_type_f1(preds: &Corpus, golds: &Corpus) -> Result<Prf, MetricsError> {
    check_keys(preds, golds)?;
    let types = |es: &[Event]| bag(es.iter().map(|e| e.event_type).collect::<Vec<_>>(), Semantics::Multiset);
    let mut total = Counts::default();
    for (id, gold) in golds {
        total.add(overlap(&types(&preds[id]), &types(gold)));
    }
    Ok(Prf::from_counts(total.matched, total.predicted, total.gold))
}

/// Kinds that occur in either corpus, in taxonomy order.
pub fn populated_kinds(report: &LevelReport) -> Vec<ArgumentKind> {
    let names: BTreeSet<&str> =
        report.per_kind.iter().filter(|(_, p)| p.gold + p.predicted > 0).map(|(k, _)| k.as_str()).collect();
    ArgumentKind::ALL.into_iter().filter(|k| names.contains(k.name())).collect()
}
