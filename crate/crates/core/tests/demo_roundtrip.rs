use phee_core::llm::{is_null_answer, parse_events_output};
use phee_core::prompting::{render_answer, AnswerStyle};
use phee_core::schema::{Argument, ArgumentKind, Event, EventType, Span};
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9 \"\\\\,-]{1,12}[a-z]"
        .prop_filter("collapsed, non-null", |t| !t.contains("  ") && !is_null_answer(t))
}

/// Events with at most one argument per main kind, so every sub-argument has
/// an unambiguous parent.
fn event() -> impl Strategy<Value = Event> {
    let main = |kind: ArgumentKind| {
        let children: Vec<ArgumentKind> = kind.children().collect();
        let n = children.len();
        let subs = prop::collection::vec((0..n.max(1), text()), if n == 0 { 0..1 } else { 0..3 });
        (any::<bool>(), text(), subs).prop_map(move |(present, t, subs)| {
            let subs: Vec<Argument> =
                subs.into_iter().map(|(i, s)| Argument::new(children[i], Span::ungrounded(s))).collect();
            match (present, subs.is_empty()) {
                (true, _) => Some(Argument::with_subs(kind, Span::ungrounded(t), subs)),
                (false, false) => Some(Argument::with_subs(kind, Span::ungrounded(""), subs)),
                (false, true) => None,
            }
        })
    };
    (any::<bool>(), main(ArgumentKind::Subject), main(ArgumentKind::Treatment), main(ArgumentKind::Effect)).prop_map(
        |(ade, s, t, e)| {
            let mut ev = Event::new(if ade { EventType::AdverseEvent } else { EventType::PotentialTherapeuticEvent });
            ev.arguments = [s, t, e].into_iter().flatten().collect();
            ev.canonicalize();
            ev
        },
    )
}

fn normalized(mut events: Vec<Event>) -> Vec<Event> {
    for e in &mut events {
        e.strip_grounding();
        e.canonicalize();
    }
    events
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rendered_demonstrations_parse_back(events in prop::collection::vec(event(), 1..4), code in any::<bool>()) {
        let style = if code { AnswerStyle::Code } else { AnswerStyle::Prose };
        let answer = render_answer(&events, style);
        let parsed = parse_events_output(&answer, "unrelated sentence").unwrap();
        prop_assert_eq!(normalized(parsed.events), normalized(events));
    }
}
