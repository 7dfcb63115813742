//! Event taxonomy, annotated span types and the bracketed linearization codec.

mod ground;
mod linearize;
mod record;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use ground::ground_spans;
pub use linearize::{
    linearize, linearize_with, parse_linearized, parse_linearized_lenient, LinearizeOptions,
    MalformedLinearization, MalformedReason,
};
pub use record::{ArgumentRecord, EventRecord, RecordError, TriggerRecord};

/// The two pharmacovigilance event categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    AdverseEvent,
    PotentialTherapeuticEvent,
}

impl EventType {
    pub const ALL: [EventType; 2] = [EventType::AdverseEvent, EventType::PotentialTherapeuticEvent];

    /// Identifier used in dataset files and code-style prompts.
    pub fn key(self) -> &'static str {
        match self {
            EventType::AdverseEvent => "adverse_event",
            EventType::PotentialTherapeuticEvent => "potential_therapeutic_event",
        }
    }

    /// Human-readable name used in prompts and linearized targets.
    pub fn display_name(self) -> &'static str {
        match self {
            EventType::AdverseEvent => "adverse event",
            EventType::PotentialTherapeuticEvent => "potential therapeutic event",
        }
    }

    /// Accepts the key, the display name and common variants
    /// ("Adverse_event", "ADE", "PTE", ...).
    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '_' || c == '-' { ' ' } else { c })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        match norm.as_str() {
            "adverse event" | "ade" | "adverse events" => Some(EventType::AdverseEvent),
            "potential therapeutic event" | "pte" | "potential therapeutic events" => {
                Some(EventType::PotentialTherapeuticEvent)
            }
            _ => None,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Argument roles. Declaration order is the canonical taxonomy order used by
/// the linearizer: main kinds first, then sub kinds grouped by parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgumentKind {
    Subject,
    Treatment,
    Effect,
    Age,
    Gender,
    Race,
    Population,
    SubjectDisorder,
    Drug,
    Dosage,
    Route,
    Duration,
    Frequency,
    TimeElapsed,
    TreatmentDisorder,
    CombinationDrug,
}

impl ArgumentKind {
    pub const ALL: [ArgumentKind; 16] = [
        ArgumentKind::Subject,
        ArgumentKind::Treatment,
        ArgumentKind::Effect,
        ArgumentKind::Age,
        ArgumentKind::Gender,
        ArgumentKind::Race,
        ArgumentKind::Population,
        ArgumentKind::SubjectDisorder,
        ArgumentKind::Drug,
        ArgumentKind::Dosage,
        ArgumentKind::Route,
        ArgumentKind::Duration,
        ArgumentKind::Frequency,
        ArgumentKind::TimeElapsed,
        ArgumentKind::TreatmentDisorder,
        ArgumentKind::CombinationDrug,
    ];

    pub const MAIN: [ArgumentKind; 3] =
        [ArgumentKind::Subject, ArgumentKind::Treatment, ArgumentKind::Effect];

    /// The 13 sub kinds, in the order of the stage-2 question list.
    pub const SUB: [ArgumentKind; 13] = [
        ArgumentKind::Age,
        ArgumentKind::Gender,
        ArgumentKind::Race,
        ArgumentKind::Population,
        ArgumentKind::SubjectDisorder,
        ArgumentKind::Drug,
        ArgumentKind::Dosage,
        ArgumentKind::Route,
        ArgumentKind::Duration,
        ArgumentKind::Frequency,
        ArgumentKind::TimeElapsed,
        ArgumentKind::TreatmentDisorder,
        ArgumentKind::CombinationDrug,
    ];

    /// Canonical dataset name, e.g. `subject.disorder`.
    pub fn name(self) -> &'static str {
        match self {
            ArgumentKind::Subject => "subject",
            ArgumentKind::Treatment => "treatment",
            ArgumentKind::Effect => "effect",
            ArgumentKind::Age => "age",
            ArgumentKind::Gender => "gender",
            ArgumentKind::Race => "race",
            ArgumentKind::Population => "population",
            ArgumentKind::SubjectDisorder => "subject.disorder",
            ArgumentKind::Drug => "drug",
            ArgumentKind::Dosage => "dosage",
            ArgumentKind::Route => "route",
            ArgumentKind::Duration => "duration",
            ArgumentKind::Frequency => "frequency",
            ArgumentKind::TimeElapsed => "time_elapsed",
            ArgumentKind::TreatmentDisorder => "treatment.disorder",
            ArgumentKind::CombinationDrug => "combination.drug",
        }
    }

    /// Name shown to the chat model. `treatment.disorder` is presented as
    /// `indication`.
    pub fn prompt_name(self) -> &'static str {
        match self {
            ArgumentKind::SubjectDisorder => "subject_disorder",
            ArgumentKind::TreatmentDisorder => "indication",
            ArgumentKind::CombinationDrug => "combination_drug",
            other => other.name(),
        }
    }

    pub fn parent(self) -> Option<ArgumentKind> {
        use ArgumentKind::*;
        match self {
            Subject | Treatment | Effect => None,
            Age | Gender | Race | Population | SubjectDisorder => Some(Subject),
            Drug | Dosage | Route | Duration | Frequency | TimeElapsed | TreatmentDisorder
            | CombinationDrug => Some(Treatment),
        }
    }

    pub fn is_main(self) -> bool {
        self.parent().is_none()
    }

    /// Position in the canonical taxonomy order.
    pub fn order(self) -> usize {
        self as usize
    }

    /// Resolves canonical names and external aliases (`indication`,
    /// `subject_disorder`, `Combination.Drug`, `time elapsed`, ...).
    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c.is_whitespace() || c == '-' || c == '.' { '_' } else { c })
            .collect();
        let kind = match norm.as_str() {
            "subject" => ArgumentKind::Subject,
            "treatment" => ArgumentKind::Treatment,
            "effect" => ArgumentKind::Effect,
            "age" => ArgumentKind::Age,
            "gender" => ArgumentKind::Gender,
            "race" => ArgumentKind::Race,
            "population" => ArgumentKind::Population,
            "subject_disorder" => ArgumentKind::SubjectDisorder,
            "drug" => ArgumentKind::Drug,
            "dosage" => ArgumentKind::Dosage,
            "route" => ArgumentKind::Route,
            "duration" => ArgumentKind::Duration,
            "frequency" | "freq" => ArgumentKind::Frequency,
            "time_elapsed" => ArgumentKind::TimeElapsed,
            "treatment_disorder" | "indication" => ArgumentKind::TreatmentDisorder,
            "combination_drug" => ArgumentKind::CombinationDrug,
            _ => return None,
        };
        Some(kind)
    }

    /// Sub kinds whose parent is `self`.
    pub fn children(self) -> impl Iterator<Item = ArgumentKind> {
        ArgumentKind::SUB
            .into_iter()
            .filter(move |k| k.parent() == Some(self))
    }
}

impl fmt::Display for ArgumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A text span, optionally anchored to character offsets in its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Span {
    pub text: String,
    offsets: Option<(usize, usize)>,
}

impl Span {
    pub fn ungrounded(text: impl Into<String>) -> Self {
        Span { text: text.into(), offsets: None }
    }

    /// Grounded span. Offsets are character (not byte) positions, end exclusive.
    pub fn grounded(text: impl Into<String>, start: usize, end: usize) -> Self {
        Span { text: text.into(), offsets: Some((start, end)) }
    }

    pub fn is_grounded(&self) -> bool {
        self.offsets.is_some()
    }

    pub fn start(&self) -> Option<usize> {
        self.offsets.map(|(s, _)| s)
    }

    pub fn end(&self) -> Option<usize> {
        self.offsets.map(|(_, e)| e)
    }

    pub fn range(&self) -> Option<Range<usize>> {
        self.offsets.map(|(s, e)| s..e)
    }

    pub fn set_offsets(&mut self, start: usize, end: usize) {
        self.offsets = Some((start, end));
    }

    pub fn clear_offsets(&mut self) {
        self.offsets = None;
    }

    /// True when the span is grounded and its extent covers `other`'s.
    pub fn contains(&self, other: &Span) -> bool {
        match (self.offsets, other.offsets) {
            (Some((s, e)), Some((os, oe))) => s <= os && oe <= e,
            _ => false,
        }
    }

    /// Checks the grounding invariant against `sentence`.
    pub fn is_consistent_with(&self, sentence: &str) -> bool {
        match self.offsets {
            None => true,
            Some((s, e)) => {
                let len = sentence.chars().count();
                s < e && e <= len && char_slice(sentence, s, e) == self.text
            }
        }
    }
}

/// Substring by character offsets. Offsets past the end are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Argument {
    pub kind: ArgumentKind,
    pub span: Span,
    pub sub_arguments: Vec<Argument>,
}

impl Argument {
    pub fn new(kind: ArgumentKind, span: Span) -> Self {
        Argument { kind, span, sub_arguments: Vec::new() }
    }

    pub fn with_subs(kind: ArgumentKind, span: Span, subs: Vec<Argument>) -> Self {
        Argument { kind, span, sub_arguments: subs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub event_type: EventType,
    pub trigger: Option<Span>,
    pub arguments: Vec<Argument>,
}

impl Event {
    pub fn new(event_type: EventType) -> Self {
        Event { event_type, trigger: None, arguments: Vec::new() }
    }

    /// Every span in the event, depth-first: trigger, then each main argument
    /// followed by its sub-arguments.
    pub fn spans(&self) -> Vec<&Span> {
        let mut out: Vec<&Span> = self.trigger.iter().collect();
        for arg in &self.arguments {
            out.push(&arg.span);
            out.extend(arg.sub_arguments.iter().map(|s| &s.span));
        }
        out
    }

    pub fn spans_mut(&mut self) -> Vec<&mut Span> {
        let mut out: Vec<&mut Span> = self.trigger.iter_mut().collect();
        for arg in &mut self.arguments {
            out.push(&mut arg.span);
            out.extend(arg.sub_arguments.iter_mut().map(|s| &mut s.span));
        }
        out
    }

    /// Stable-sorts arguments and sub-arguments into taxonomy order.
    pub fn canonicalize(&mut self) {
        self.arguments.sort_by_key(|a| a.kind.order());
        for arg in &mut self.arguments {
            arg.sub_arguments.sort_by_key(|a| a.kind.order());
        }
    }

    pub fn strip_grounding(&mut self) {
        for span in self.spans_mut() {
            span.clear_offsets();
        }
    }

    /// Structural check: mains at the top, subs only under their parent,
    /// no nested subs.
    pub fn check_structure(&self) -> Result<(), String> {
        for arg in &self.arguments {
            if !arg.kind.is_main() {
                return Err(format!("sub-argument {} attached directly to event", arg.kind));
            }
            for sub in &arg.sub_arguments {
                if sub.kind.parent() != Some(arg.kind) {
                    return Err(format!("{} cannot be a sub-argument of {}", sub.kind, arg.kind));
                }
                if !sub.sub_arguments.is_empty() {
                    return Err(format!("sub-argument {} has nested arguments", sub.kind));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_sub_kind_has_one_main_parent() {
        for kind in ArgumentKind::SUB {
            let parent = kind.parent().expect("sub kind without parent");
            assert!(parent.is_main());
            assert_ne!(parent, ArgumentKind::Effect);
        }
        assert_eq!(ArgumentKind::Effect.children().count(), 0);
        assert_eq!(ArgumentKind::Subject.children().count(), 5);
        assert_eq!(ArgumentKind::Treatment.children().count(), 8);
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(ArgumentKind::from_label("indication"), Some(ArgumentKind::TreatmentDisorder));
        assert_eq!(ArgumentKind::from_label("subject_disorder"), Some(ArgumentKind::SubjectDisorder));
        assert_eq!(ArgumentKind::from_label("Combination.Drug"), Some(ArgumentKind::CombinationDrug));
        assert_eq!(ArgumentKind::from_label("time elapsed"), Some(ArgumentKind::TimeElapsed));
        assert_eq!(ArgumentKind::from_label("bogus"), None);
        for kind in ArgumentKind::ALL {
            assert_eq!(ArgumentKind::from_label(kind.name()), Some(kind));
            assert_eq!(ArgumentKind::from_label(kind.prompt_name()), Some(kind));
        }
    }

    #[test]
    fn event_type_labels() {
        assert_eq!(EventType::from_label("Adverse_event"), Some(EventType::AdverseEvent));
        assert_eq!(
            EventType::from_label("potential therapeutic event"),
            Some(EventType::PotentialTherapeuticEvent)
        );
        assert_eq!(EventType::from_label("side effect"), None);
    }

    #[test]
    fn span_consistency_uses_char_offsets() {
        let sentence = "Ménière patient had nausea.";
        let span = Span::grounded("nausea", 20, 26);
        assert!(span.is_consistent_with(sentence));
        assert!(!Span::grounded("nausea", 21, 27).is_consistent_with(sentence));
        assert!(!Span::grounded("x", 30, 31).is_consistent_with(sentence));
    }
}
