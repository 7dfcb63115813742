use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Argument, ArgumentKind, Event, EventType, Span};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),
    #[error("unknown argument type {0:?}")]
    UnknownArgumentType(String),
    #[error("{child} cannot be nested under {parent}")]
    WrongParent { child: String, parent: String },
    #[error("sub-argument {0} placed at event level")]
    SubAtEventLevel(String),
    #[error("span {0:?} has only one of start/end")]
    PartialOffsets(String),
}

/// On-disk form of an event, shared by dataset, prediction and synthesis
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<TriggerRecord>,
    #[serde(default)]
    pub arguments: Vec<ArgumentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    #[serde(default)]
    pub sub_arguments: Vec<ArgumentRecord>,
}

fn span_from(text: &str, start: Option<usize>, end: Option<usize>) -> Result<Span, RecordError> {
    match (start, end) {
        (Some(s), Some(e)) => Ok(Span::grounded(text, s, e)),
        (None, None) => Ok(Span::ungrounded(text)),
        _ => Err(RecordError::PartialOffsets(text.to_string())),
    }
}

impl From<&Event> for EventRecord {
    fn from(event: &Event) -> Self {
        EventRecord {
            event_type: event.event_type.key().to_string(),
            trigger: event.trigger.as_ref().map(|t| TriggerRecord {
                text: t.text.clone(),
                start: t.start(),
                end: t.end(),
            }),
            arguments: event.arguments.iter().map(ArgumentRecord::from).collect(),
        }
    }
}

impl From<&Argument> for ArgumentRecord {
    fn from(arg: &Argument) -> Self {
        ArgumentRecord {
            kind: arg.kind.name().to_string(),
            text: arg.span.text.clone(),
            start: arg.span.start(),
            end: arg.span.end(),
            sub_arguments: arg.sub_arguments.iter().map(ArgumentRecord::from).collect(),
        }
    }
}

impl EventRecord {
    /// Resolves labels (aliases included) and checks the hierarchy.
    pub fn to_event(&self) -> Result<Event, RecordError> {
        let event_type = EventType::from_label(&self.event_type)
            .ok_or_else(|| RecordError::UnknownEventType(self.event_type.clone()))?;
        let trigger = self
            .trigger
            .as_ref()
            .map(|t| span_from(&t.text, t.start, t.end))
            .transpose()?;
        let mut arguments = Vec::with_capacity(self.arguments.len());
        for rec in &self.arguments {
            let kind = ArgumentKind::from_label(&rec.kind)
                .ok_or_else(|| RecordError::UnknownArgumentType(rec.kind.clone()))?;
            if !kind.is_main() {
                return Err(RecordError::SubAtEventLevel(kind.name().to_string()));
            }
            let mut subs = Vec::with_capacity(rec.sub_arguments.len());
            for sub in &rec.sub_arguments {
                let sub_kind = ArgumentKind::from_label(&sub.kind)
                    .ok_or_else(|| RecordError::UnknownArgumentType(sub.kind.clone()))?;
                if sub_kind.parent() != Some(kind) || !sub.sub_arguments.is_empty() {
                    return Err(RecordError::WrongParent {
                        child: sub_kind.name().to_string(),
                        parent: kind.name().to_string(),
                    });
                }
                subs.push(Argument::new(sub_kind, span_from(&sub.text, sub.start, sub.end)?));
            }
            arguments.push(Argument::with_subs(
                kind,
                span_from(&rec.text, rec.start, rec.end)?,
                subs,
            ));
        }
        Ok(Event { event_type, trigger, arguments })
    }
}
