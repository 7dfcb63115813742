//! Annotated corpora: loading and validation, the subject.disorder revision
//! rule, stratified splits and cross-validation folds.

mod phee;
mod revise;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Event, EventRecord, EventType};

pub use phee::{convert_phee, load_phee};
pub use revise::{revise_subject_disorder, Revision};
pub use split::{make_folds, make_splits, FoldPlan, Stratum};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at line {line} (record {id:?}): {message}")]
    Format { line: usize, id: Option<String>, message: String },
    #[error("invalid record {id:?}: {message}")]
    Validation { id: String, message: String },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("stratum {stratum:?} has {size} instances, fewer than the {splits} splits")]
    EmptyStratum { stratum: Stratum, size: usize, splits: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{pool} pooled instances cannot fill {folds} folds")]
    PoolTooSmall { pool: usize, folds: usize },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Human,
    Synthesized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One annotated sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub text: String,
    pub events: Vec<Event>,
    pub origin: Origin,
}

impl Instance {
    pub fn new(id: impl Into<String>, text: impl Into<String>, events: Vec<Event>) -> Self {
        Instance { id: id.into(), text: text.into(), events, origin: Origin::Human }
    }

    pub fn event_types(&self) -> impl Iterator<Item = EventType> + '_ {
        self.events.iter().map(|e| e.event_type)
    }

    pub fn has_event_type(&self, event_type: EventType) -> bool {
        self.event_types().any(|t| t == event_type)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |message: String| CorpusError::Validation { id: self.id.clone(), message };
        if self.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(invalid("empty text".into()));
        }
        for event in &self.events {
            event.check_structure().map_err(invalid)?;
            for span in event.spans() {
                if !span.is_consistent_with(&self.text) {
                    return Err(invalid(format!(
                        "span {:?} at {:?} does not match the sentence",
                        span.text,
                        span.range()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Line format of canonical dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub events: Vec<EventRecord>,
    #[serde(default)]
    pub origin: Origin,
}

impl From<&Instance> for InstanceRecord {
    fn from(inst: &Instance) -> Self {
        InstanceRecord {
            id: inst.id.clone(),
            text: inst.text.clone(),
            events: inst.events.iter().map(EventRecord::from).collect(),
            origin: inst.origin,
        }
    }
}

impl InstanceRecord {
    pub fn into_instance(self) -> Result<Instance, CorpusError> {
        let mut events = Vec::with_capacity(self.events.len());
        for rec in &self.events {
            events.push(rec.to_event().map_err(|e| CorpusError::Validation {
                id: self.id.clone(),
                message: e.to_string(),
            })?);
        }
        let inst = Instance { id: self.id, text: self.text, events, origin: self.origin };
        inst.validate()?;
        Ok(inst)
    }
}

/// A collection of instances with optional split labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub splits: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for inst in &instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(CorpusError::Validation {
                    id: inst.id.clone(),
                    message: "duplicate id".into(),
                });
            }
        }
        Ok(Dataset { instances, splits: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    /// Instances labelled with `split`, in dataset order.
    pub fn split(&self, split: Split) -> Vec<&Instance> {
        self.instances
            .iter()
            .filter(|i| self.splits.get(&i.id) == Some(&split))
            .collect()
    }

    /// New unlabelled dataset holding clones of `split`'s instances.
    pub fn split_dataset(&self, split: Split) -> Dataset {
        Dataset {
            instances: self.split(split).into_iter().cloned().collect(),
            splits: BTreeMap::new(),
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.id.as_str()).collect()
    }
}

/// Reads a canonical dataset file (one JSON record per line; blank lines
/// are skipped).
pub fn load_dataset(path: &Path) -> Result<Dataset, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_dataset(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

pub fn read_dataset(reader: impl BufRead) -> Result<Dataset, CorpusError> {
    let mut instances = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(Path::new("<reader>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
            CorpusError::Format { line: line_no, id: None, message: e.to_string() }
        })?;
        let id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
        let record: InstanceRecord = serde_json::from_value(value).map_err(|e| {
            CorpusError::Format { line: line_no, id: id.clone(), message: e.to_string() }
        })?;
        instances.push(record.into_instance()?);
    }
    Dataset::new(instances)
}

pub fn write_dataset<'a>(
    path: &Path,
    instances: impl IntoIterator<Item = &'a Instance>,
) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for inst in instances {
        let line = serde_json::to_string(&InstanceRecord::from(inst))
            .expect("instance records always serialize");
        writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ArgumentKind;

    fn read(s: &str) -> Result<Dataset, CorpusError> {
        read_dataset(s.as_bytes())
    }

    #[test]
    fn loads_single_record() {
        let ds = read(r#"{"id":"a","text":"He got a rash.","events":[{"event_type":"adverse_event","arguments":[{"type":"effect","text":"rash","start":9,"end":13}]}]}"#).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.instances[0].events[0].arguments[0].span.range(), Some(9..13));
        assert_eq!(ds.instances[0].origin, Origin::Human);
    }

    #[test]
    fn indication_becomes_treatment_disorder() {
        let ds = read(r#"{"id":"a","text":"Drug X for acne.","events":[{"event_type":"potential_therapeutic_event","arguments":[{"type":"treatment","text":"Drug X for acne","sub_arguments":[{"type":"indication","text":"acne"}]}]}]}"#).unwrap();
        let sub = &ds.instances[0].events[0].arguments[0].sub_arguments[0];
        assert_eq!(sub.kind, ArgumentKind::TreatmentDisorder);
    }

    #[test]
    fn out_of_bounds_span_is_validation_error() {
        let err = read(r#"{"id":"a","text":"short","events":[{"event_type":"adverse_event","arguments":[{"type":"effect","text":"rash","start":9,"end":13}]}]}"#).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { ref id, .. } if id == "a"), "{err}");
    }

    #[test]
    fn unknown_label_is_validation_error() {
        let err = read(r#"{"id":"a","text":"x y","events":[{"event_type":"adverse_event","arguments":[{"type":"mood","text":"x"}]}]}"#).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { .. }));
    }

    #[test]
    fn format_error_names_record_and_field() {
        let err = read("{\"id\":\"a\",\"text\":\"ok\"}\n{\"id\":\"b\"}").unwrap_err();
        match err {
            CorpusError::Format { line, id, message } => {
                assert_eq!(line, 2);
                assert_eq!(id.as_deref(), Some("b"));
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(read("not json"), Err(CorpusError::Format { id: None, .. })));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = read("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}").unwrap_err();
        assert!(matches!(err, CorpusError::Validation { .. }));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let src = r#"{"id":"a","text":"He got a rash.","events":[{"event_type":"adverse_event","trigger":{"text":"got","start":3,"end":6},"arguments":[{"type":"effect","text":"rash","start":9,"end":13,"sub_arguments":[]}]}],"origin":"synthesized"}"#;
        let ds = read(src).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &ds.instances).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim_end(), src);
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
