//! Converter from the upstream PHEE JSON-lines release to canonical records.
//!
//! Upstream records look like
//!
//! ```json
//! {"id": "...", "context": "...", "annotations": [{"events": [{
//!     "event_type": "Adverse_event",
//!     "Trigger": {"text": [["induced"]], "start": [[82]]},
//!     "Subject": {"text": [["two patients"]], "start": [[10]],
//!                 "Age": {...}, "Disorder": {...}},
//!     "Treatment": {"text": ..., "start": ..., "Drug": {...},
//!                   "Combination": [{"Drug": {...}}]},
//!     "Effect": {"text": ..., "start": ...}}]}]}
//! ```
//!
//! `text`/`start` hold one entry per mention, each a list of fragments.
//! Discontinuous mentions are joined with a space and left ungrounded.
//! Only the first annotation layer is read.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::{Map, Value};

use super::{CorpusError, Dataset, Instance};
use crate::schema::{Argument, ArgumentKind, Event, EventType, Span};

fn get_ci<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(key))
        .map(|(_, v)| v)
}

fn as_fragments(v: &Value) -> Vec<Vec<Value>> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::Array(frags) => frags.clone(),
                other => vec![other.clone()],
            })
            .collect(),
        Value::Null => Vec::new(),
        other => vec![vec![other.clone()]],
    }
}

/// Spans of one annotated element, grounded when the fragment offsets check
/// out against the sentence.
fn mentions(obj: &Map<String, Value>, sentence: &str, warnings: &mut Vec<String>) -> Vec<Span> {
    let texts = get_ci(obj, "text").map(as_fragments).unwrap_or_default();
    let starts = get_ci(obj, "start").map(as_fragments).unwrap_or_default();
    let mut out = Vec::new();
    for (i, frags) in texts.iter().enumerate() {
        let parts: Vec<&str> = frags.iter().filter_map(Value::as_str).collect();
        if parts.is_empty() {
            continue;
        }
        let text = parts.join(" ");
        let offsets = starts.get(i).filter(|_| parts.len() == 1).and_then(|s| s.first()?.as_u64());
        let mut span = Span::ungrounded(text);
        if let Some(start) = offsets {
            let start = start as usize;
            let end = start + span.text.chars().count();
            span.set_offsets(start, end);
            if !span.is_consistent_with(sentence) {
                warnings.push(format!("offsets of {:?} do not match the sentence; dropped", span.text));
                span.clear_offsets();
            }
        }
        out.push(span);
    }
    out
}

fn sub_kind(main: ArgumentKind, key: &str) -> Option<ArgumentKind> {
    let lower = key.to_ascii_lowercase();
    match (main, lower.as_str()) {
        (ArgumentKind::Subject, "disorder") => Some(ArgumentKind::SubjectDisorder),
        (ArgumentKind::Treatment, "disorder") => Some(ArgumentKind::TreatmentDisorder),
        (_, "freq") => Some(ArgumentKind::Frequency),
        _ => ArgumentKind::from_label(&lower).filter(|k| k.parent() == Some(main)),
    }
}

fn convert_main(
    kind: ArgumentKind,
    obj: &Map<String, Value>,
    sentence: &str,
    warnings: &mut Vec<String>,
) -> Vec<Argument> {
    let mut args: Vec<Argument> = mentions(obj, sentence, warnings)
        .into_iter()
        .map(|span| Argument::new(kind, span))
        .collect();
    let mut subs = Vec::new();
    for (key, value) in obj {
        if matches!(key.to_ascii_lowercase().as_str(), "text" | "start" | "entity_id" | "end") {
            continue;
        }
        if kind == ArgumentKind::Treatment && key.eq_ignore_ascii_case("combination") {
            let groups = match value {
                Value::Array(items) => items.clone(),
                other => vec![other.clone()],
            };
            for group in groups.iter().filter_map(Value::as_object) {
                for (gk, gv) in group {
                    if let (true, Some(drug)) = (gk.eq_ignore_ascii_case("drug"), gv.as_object()) {
                        for span in mentions(drug, sentence, warnings) {
                            subs.push(Argument::new(ArgumentKind::CombinationDrug, span));
                        }
                    }
                }
            }
            continue;
        }
        match (sub_kind(kind, key), value.as_object()) {
            (Some(sub), Some(sub_obj)) => {
                for span in mentions(sub_obj, sentence, warnings) {
                    subs.push(Argument::new(sub, span));
                }
            }
            _ => warnings.push(format!("ignored field {key:?} under {kind}")),
        }
    }
    if subs.is_empty() {
        return args;
    }
    if args.is_empty() {
        args.push(Argument::new(kind, Span::ungrounded("")));
    }
    for sub in subs {
        let target = args
            .iter()
            .position(|a| a.span.contains(&sub.span))
            .unwrap_or(0);
        args[target].sub_arguments.push(sub);
    }
    args
}

fn convert_event(obj: &Map<String, Value>, sentence: &str, warnings: &mut Vec<String>) -> Option<Event> {
    let label = get_ci(obj, "event_type").and_then(Value::as_str).unwrap_or_default();
    let Some(event_type) = EventType::from_label(label) else {
        warnings.push(format!("unknown event type {label:?}; event dropped"));
        return None;
    };
    let mut event = Event::new(event_type);
    if let Some(trigger) = get_ci(obj, "trigger").and_then(Value::as_object) {
        event.trigger = mentions(trigger, sentence, warnings).into_iter().next();
    }
    for kind in ArgumentKind::MAIN {
        if let Some(main) = get_ci(obj, kind.name()).and_then(Value::as_object) {
            event.arguments.extend(convert_main(kind, main, sentence, warnings));
        }
    }
    Some(event)
}

/// Converts one upstream record. Returns the instance and conversion notes.
pub fn convert_phee(record: &Value) -> Result<(Instance, Vec<String>), CorpusError> {
    let id = record.get("id").and_then(Value::as_str).map(str::to_string);
    let format_err = |message: &str| CorpusError::Format {
        line: 0,
        id: id.clone(),
        message: message.to_string(),
    };
    let obj = record.as_object().ok_or_else(|| format_err("record is not an object"))?;
    let id_str = id.clone().ok_or_else(|| format_err("missing field `id`"))?;
    let text = get_ci(obj, "context")
        .or_else(|| get_ci(obj, "text"))
        .and_then(Value::as_str)
        .ok_or_else(|| format_err("missing field `context`"))?
        .to_string();
    let mut warnings = Vec::new();
    let mut events = Vec::new();
    let layer = get_ci(obj, "annotations")
        .and_then(Value::as_array)
        .and_then(|layers| layers.first())
        .and_then(|l| l.get("events"))
        .or_else(|| get_ci(obj, "events"));
    if let Some(Value::Array(raw_events)) = layer {
        for raw in raw_events.iter().filter_map(Value::as_object) {
            events.extend(convert_event(raw, &text, &mut warnings));
        }
    }
    let inst = Instance::new(id_str, text, events);
    inst.validate()?;
    Ok((inst, warnings))
}

/// Reads an upstream JSON-lines file.
pub fn load_phee(path: &Path) -> Result<(Dataset, Vec<String>), CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut instances = Vec::new();
    let mut notes = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Format {
            line: idx + 1,
            id: None,
            message: e.to_string(),
        })?;
        let (inst, warnings) = convert_phee(&value).map_err(|e| match e {
            CorpusError::Format { id, message, .. } => CorpusError::Format { line: idx + 1, id, message },
            other => other,
        })?;
        notes.extend(warnings.into_iter().map(|w| format!("{}: {w}", inst.id)));
        instances.push(inst);
    }
    Ok((Dataset::new(instances)?, notes))
}
