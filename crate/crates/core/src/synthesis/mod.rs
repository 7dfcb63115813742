//! Constrained generation of synthetic training instances and assembly of
//! the augmented training settings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Instance, Origin};
use crate::llm::{parse_synthesis_output, ChatClient, LlmError};
use crate::prompting::{build_synthesis_prompt, ChatRequest, PromptError};
use crate::schema::{ArgumentKind, EventType};
use crate::text::{collapse_whitespace, dedup_key};

pub use crate::prompting::{ConstraintPair, SynthesisCategory};

pub const ID_PREFIX: &str = "syn-";

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("no qualifying {0:?} constraint in the training set")]
    NoQualifyingPairs(SynthesisCategory),
    #[error("template {0:?} has no events")]
    EmptyTemplate(String),
    #[error("generation for template {template_id:?} is not parseable: {reason}")]
    GenerationUnparseable { template_id: String, reason: String },
    #[error("setting {setting} needs the {which} filter id set")]
    MissingFilter { setting: DataSetting, which: &'static str },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{0}")]
    Io(String),
}

/// Distinct constraint candidates drawn from training annotations.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSampler {
    adverse: Vec<ConstraintPair>,
    therapeutic: Vec<ConstraintPair>,
}

fn sub_texts(event: &crate::schema::Event, kind: ArgumentKind) -> Vec<&str> {
    event
        .arguments
        .iter()
        .flat_map(|a| &a.sub_arguments)
        .filter(|s| s.kind == kind && !s.span.text.trim().is_empty())
        .map(|s| s.span.text.as_str())
        .collect()
}

impl ConstraintSampler {
    /// Adverse pairs are (drug, effect) within one adverse event; therapeutic
    /// candidates are drugs of therapeutic events. Duplicates (compared
    /// case-insensitively) keep the occurrence from the smallest instance id.
    pub fn new<'a>(training: impl IntoIterator<Item = &'a Instance>) -> Self {
        let mut sorted: Vec<&Instance> = training.into_iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut ade: BTreeMap<(String, String), ConstraintPair> = BTreeMap::new();
        let mut pte: BTreeMap<String, ConstraintPair> = BTreeMap::new();
        for inst in sorted {
            for event in &inst.events {
                let drugs = sub_texts(event, ArgumentKind::Drug);
                match event.event_type {
                    EventType::AdverseEvent => {
                        let effects = event
                            .arguments
                            .iter()
                            .filter(|a| a.kind == ArgumentKind::Effect && !a.span.text.trim().is_empty())
                            .map(|a| a.span.text.as_str());
                        for effect in effects {
                            for drug in &drugs {
                                ade.entry((dedup_key(drug), dedup_key(effect))).or_insert_with(|| ConstraintPair {
                                    drug: collapse_whitespace(drug),
                                    effect: Some(collapse_whitespace(effect)),
                                    source_id: Some(inst.id.clone()),
                                });
                            }
                        }
                    }
                    EventType::PotentialTherapeuticEvent => {
                        for drug in drugs {
                            pte.entry(dedup_key(drug)).or_insert_with(|| ConstraintPair {
                                drug: collapse_whitespace(drug),
                                effect: None,
                                source_id: Some(inst.id.clone()),
                            });
                        }
                    }
                }
            }
        }
        ConstraintSampler { adverse: ade.into_values().collect(), therapeutic: pte.into_values().collect() }
    }

    pub fn candidates(&self, category: SynthesisCategory) -> &[ConstraintPair] {
        match category {
            SynthesisCategory::Adverse => &self.adverse,
            SynthesisCategory::Therapeutic => &self.therapeutic,
            SynthesisCategory::MultiEvent => &[],
        }
    }

    /// Uniform draw over the distinct candidates. Multi-event templates are
    /// unconstrained and yield `None` without consuming randomness.
    pub fn sample(
        &self,
        category: SynthesisCategory,
        rng: &mut impl Rng,
    ) -> Result<Option<ConstraintPair>, SynthesisError> {
        if category == SynthesisCategory::MultiEvent {
            return Ok(None);
        }
        let pool = self.candidates(category);
        if pool.is_empty() {
            return Err(SynthesisError::NoQualifyingPairs(category));
        }
        Ok(Some(pool[rng.random_range(0..pool.len())].clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedInstance {
    pub instance: Instance,
    pub template_id: String,
    pub category: SynthesisCategory,
    pub constraint: Option<ConstraintPair>,
    pub constraint_satisfied: bool,
    pub parse_clean: bool,
    pub warnings: Vec<String>,
    pub cache_key: String,
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.trim().to_lowercase())
}

/// Whether the sentence mentions the constrained drug and, when the
/// category requires it, the constrained effect.
pub fn constraint_satisfied(sentence: &str, category: SynthesisCategory, c: Option<&ConstraintPair>) -> bool {
    match c {
        None => !category.needs_drug(),
        Some(c) => {
            contains_ci(sentence, &c.drug)
                && (!category.needs_effect() || c.effect.as_deref().is_some_and(|e| contains_ci(sentence, e)))
        }
    }
}

pub fn synthesis_request(
    template: &Instance,
    constraint: Option<&ConstraintPair>,
    model: &str,
) -> Result<(SynthesisCategory, ChatRequest), SynthesisError> {
    let category = SynthesisCategory::of(template).ok_or_else(|| SynthesisError::EmptyTemplate(template.id.clone()))?;
    let req = build_synthesis_prompt(template, constraint, category)?.with_model(model);
    Ok((category, req))
}

pub fn synthesize(
    template: &Instance,
    constraint: Option<&ConstraintPair>,
    client: &ChatClient,
    model: &str,
) -> Result<SynthesizedInstance, SynthesisError> {
    let (category, req) = synthesis_request(template, constraint, model)?;
    let resp = client.complete(&req)?;
    let (sentence, parsed) = parse_synthesis_output(&resp.content).map_err(|u| {
        SynthesisError::GenerationUnparseable { template_id: template.id.clone(), reason: u.warnings.join("; ") }
    })?;
    let mut instance = Instance::new(format!("{ID_PREFIX}{}", template.id), sentence, parsed.events);
    instance.origin = Origin::Synthesized;
    Ok(SynthesizedInstance {
        constraint_satisfied: constraint_satisfied(&instance.text, category, constraint),
        parse_clean: parsed.warnings.is_empty(),
        instance,
        template_id: template.id.clone(),
        category,
        constraint: constraint.cloned(),
        warnings: parsed.warnings,
        cache_key: req.cache_key,
    })
}

#[derive(Debug, Default)]
pub struct SynthesisRun {
    /// Generated instances in template-id order.
    pub generated: Vec<SynthesizedInstance>,
    /// Templates without a usable generation, with the reason.
    pub failures: Vec<(String, String)>,
}

impl SynthesisRun {
    /// Occurrences of each (lowercased) drug mention in generated instances.
    pub fn drug_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for g in &self.generated {
            for event in &g.instance.events {
                for drug in sub_texts(event, ArgumentKind::Drug) {
                    *hist.entry(dedup_key(drug)).or_default() += 1;
                }
            }
        }
        hist
    }
}

/// One generation attempt per template. Constraints are drawn sequentially
/// in template-id order from `rng` before any request is sent, so results do
/// not depend on request scheduling.
pub fn run_synthesis(
    templates: &[&Instance],
    sampler: &ConstraintSampler,
    rng: &mut impl Rng,
    client: &ChatClient,
    model: &str,
    concurrency: usize,
) -> SynthesisRun {
    let mut ordered: Vec<&Instance> = templates.to_vec();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let mut run = SynthesisRun::default();
    let mut jobs = Vec::new();
    for t in ordered {
        let Some(category) = SynthesisCategory::of(t) else {
            run.failures.push((t.id.clone(), "template has no events".into()));
            continue;
        };
        match sampler.sample(category, rng) {
            Ok(c) => jobs.push((t, c)),
            Err(e) => run.failures.push((t.id.clone(), e.to_string())),
        }
    }
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..concurrency.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((t, c)) = jobs.get(i) else { break };
                let r = synthesize(t, c.as_ref(), client, model);
                results.lock().expect("no worker panics while holding the lock").push((i, t.id.clone(), r));
            });
        }
    });
    let mut results = results.into_inner().expect("workers finished");
    results.sort_by_key(|r| r.0);
    for (_, id, r) in results {
        match r {
            Ok(g) => run.generated.push(g),
            Err(e) => {
                log::warn!("{id}: {e}");
                run.failures.push((id, e.to_string()));
            }
        }
    }
    run.failures.sort();
    run
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub id: String,
    pub template_id: String,
    pub category: SynthesisCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintPair>,
    pub constraint_satisfied: bool,
    pub parse_clean: bool,
    pub cache_key: String,
}

impl From<&SynthesizedInstance> for ProvenanceRecord {
    fn from(g: &SynthesizedInstance) -> Self {
        ProvenanceRecord {
            id: g.instance.id.clone(),
            template_id: g.template_id.clone(),
            category: g.category,
            constraint: g.constraint.clone(),
            constraint_satisfied: g.constraint_satisfied,
            parse_clean: g.parse_clean,
            cache_key: g.cache_key.clone(),
        }
    }
}

pub fn write_provenance(path: &Path, generated: &[SynthesizedInstance]) -> Result<(), SynthesisError> {
    let mut out = Vec::new();
    for g in generated {
        serde_json::to_writer(&mut out, &ProvenanceRecord::from(g)).expect("provenance always serializes");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| SynthesisError::Io(format!("{}: {e}", path.display())))
}

pub fn read_provenance(path: &Path) -> Result<Vec<ProvenanceRecord>, SynthesisError> {
    let text = fs::read_to_string(path).map_err(|e| SynthesisError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| SynthesisError::Io(format!("{}: {e}", path.display()))))
        .collect()
}

/// The five training-data settings compared in the augmentation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataSetting {
    #[serde(rename = "Tr.")]
    Train,
    #[serde(rename = "Tr.+Aug.")]
    TrainAug,
    #[serde(rename = "Tr. Fil.")]
    TrainFil,
    #[serde(rename = "Tr.+Aug. Fil.")]
    TrainAugFil,
    #[serde(rename = "Tr. Fil.+Aug. Fil.")]
    TrainFilAugFil,
}

impl DataSetting {
    pub const ALL: [DataSetting; 5] = [
        DataSetting::Train,
        DataSetting::TrainAug,
        DataSetting::TrainFil,
        DataSetting::TrainAugFil,
        DataSetting::TrainFilAugFil,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DataSetting::Train => "Tr.",
            DataSetting::TrainAug => "Tr.+Aug.",
            DataSetting::TrainFil => "Tr. Fil.",
            DataSetting::TrainAugFil => "Tr.+Aug. Fil.",
            DataSetting::TrainFilAugFil => "Tr. Fil.+Aug. Fil.",
        }
    }

    /// File-name friendly form, e.g. `tr_fil_aug_fil`.
    pub fn slug(self) -> &'static str {
        match self {
            DataSetting::Train => "tr",
            DataSetting::TrainAug => "tr_aug",
            DataSetting::TrainFil => "tr_fil",
            DataSetting::TrainAugFil => "tr_aug_fil",
            DataSetting::TrainFilAugFil => "tr_fil_aug_fil",
        }
    }

    pub fn uses_augmented(self) -> bool {
        !matches!(self, DataSetting::Train | DataSetting::TrainFil)
    }

    pub fn filters_train(self) -> bool {
        matches!(self, DataSetting::TrainFil | DataSetting::TrainFilAugFil)
    }

    pub fn filters_augmented(self) -> bool {
        matches!(self, DataSetting::TrainAugFil | DataSetting::TrainFilAugFil)
    }
}

impl fmt::Display for DataSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DataSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squash = |x: &str| x.chars().filter(|c| c.is_alphanumeric() || *c == '+').collect::<String>().to_lowercase();
        let key = squash(s);
        DataSetting::ALL
            .into_iter()
            .find(|d| squash(d.label()) == key || d.slug().replace('_', "") == key.replace('+', ""))
            .ok_or_else(|| format!("unknown data setting {s:?}"))
    }
}

/// Synthesized instances kept after dropping sentences that duplicate a
/// training sentence or an earlier synthesized one (whitespace-collapsed,
/// case-insensitive), with ids forced into the `syn-` namespace.
pub fn dedup_synthesized(train: &[Instance], synthesized: &[Instance]) -> (Vec<Instance>, Vec<String>) {
    let mut seen: HashSet<String> = train.iter().map(|i| dedup_key(&i.text)).collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for inst in synthesized {
        let mut inst = inst.clone();
        if !inst.id.starts_with(ID_PREFIX) {
            inst.id = format!("{ID_PREFIX}{}", inst.id);
        }
        inst.origin = Origin::Synthesized;
        if seen.insert(dedup_key(&inst.text)) {
            kept.push(inst);
        } else {
            dropped.push(inst.id);
        }
    }
    (kept, dropped)
}

/// Retained-id sets produced by the filters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterSets {
    pub train: Option<BTreeSet<String>>,
    pub augmented: Option<BTreeSet<String>>,
}

/// Training data for one setting: train (optionally filtered) followed by
/// deduplicated synthesized instances (optionally filtered).
pub fn assemble_augmented(
    train: &[Instance],
    synthesized: &[Instance],
    setting: DataSetting,
    filters: &FilterSets,
) -> Result<Vec<Instance>, SynthesisError> {
    let pick = |items: Vec<Instance>, keep: Option<&BTreeSet<String>>| -> Vec<Instance> {
        match keep {
            Some(k) => items.into_iter().filter(|i| k.contains(&i.id)).collect(),
            None => items,
        }
    };
    let train_keep = match (setting.filters_train(), &filters.train) {
        (false, _) => None,
        (true, Some(k)) => Some(k),
        (true, None) => return Err(SynthesisError::MissingFilter { setting, which: "train" }),
    };
    let aug_keep = match (setting.filters_augmented(), &filters.augmented) {
        (false, _) => None,
        (true, Some(k)) => Some(k),
        (true, None) => return Err(SynthesisError::MissingFilter { setting, which: "augmented" }),
    };
    let mut out = pick(train.to_vec(), train_keep);
    if setting.uses_augmented() {
        let (kept, _) = dedup_synthesized(train, synthesized);
        out.extend(pick(kept, aug_keep));
    }
    Ok(out)
}
