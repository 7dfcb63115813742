use serde::Serialize;

use crate::schema::{Argument, Event};

/// How event types are spelled in a rendered answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerStyle {
    /// "adverse event", as in the prose instructions.
    Prose,
    /// "adverse_event", as in the code-style instruction.
    Code,
}

#[derive(Serialize)]
struct FlatArgument<'a> {
    argument_type: &'static str,
    argument_span: &'a str,
}

#[derive(Serialize)]
struct FlatEvent<'a> {
    event_type: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    event_trigger: Option<&'a str>,
    arguments: Vec<FlatArgument<'a>>,
}

fn flatten(args: &[Argument]) -> Vec<FlatArgument<'_>> {
    let mut out = Vec::new();
    for arg in args {
        if !arg.span.text.is_empty() {
            out.push(FlatArgument { argument_type: arg.kind.prompt_name(), argument_span: &arg.span.text });
        }
        for sub in &arg.sub_arguments {
            out.push(FlatArgument { argument_type: sub.kind.prompt_name(), argument_span: &sub.span.text });
        }
    }
    out
}

/// Events as the flat JSON list the extraction instructions request.
/// Main arguments with empty text are left out; their sub-arguments are
/// still listed.
pub fn render_answer(events: &[Event], style: AnswerStyle) -> String {
    let flat: Vec<FlatEvent> = events
        .iter()
        .map(|e| FlatEvent {
            event_type: match style {
                AnswerStyle::Prose => e.event_type.display_name(),
                AnswerStyle::Code => e.event_type.key(),
            },
            event_trigger: None,
            arguments: flatten(&e.arguments),
        })
        .collect();
    serde_json::to_string(&flat).expect("flat events always serialize")
}

/// Events in the shape the synthesis prompt asks the model to return,
/// triggers included.
pub fn render_synthesis_output(events: &[Event]) -> String {
    let flat: Vec<FlatEvent> = events
        .iter()
        .map(|e| FlatEvent {
            event_type: e.event_type.display_name(),
            event_trigger: Some(e.trigger.as_ref().map_or("", |t| t.text.as_str())),
            arguments: flatten(&e.arguments),
        })
        .collect();
    serde_json::to_string(&flat).expect("flat events always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ArgumentKind, EventType, Span};

    fn event() -> Event {
        Event {
            event_type: EventType::AdverseEvent,
            trigger: Some(Span::ungrounded("induced")),
            arguments: vec![
                Argument::with_subs(
                    ArgumentKind::Treatment,
                    Span::ungrounded(""),
                    vec![Argument::new(ArgumentKind::TreatmentDisorder, Span::ungrounded("acne"))],
                ),
                Argument::new(ArgumentKind::Effect, Span::ungrounded("rash")),
            ],
        }
    }

    #[test]
    fn flat_answer_shape() {
        assert_eq!(
            render_answer(&[event()], AnswerStyle::Prose),
            r#"[{"event_type":"adverse event","arguments":[{"argument_type":"indication","argument_span":"acne"},{"argument_type":"effect","argument_span":"rash"}]}]"#
        );
        assert!(render_answer(&[event()], AnswerStyle::Code).contains(r#""event_type":"adverse_event""#));
    }

    #[test]
    fn synthesis_output_has_trigger() {
        assert!(render_synthesis_output(&[event()])
            .starts_with(r#"[{"event_type":"adverse event","event_trigger":"induced","arguments":"#));
    }
}
