use crate::schema::{Argument, ArgumentKind, Span};
use crate::text::collapse_whitespace;

use super::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct Revision {
    pub dataset: Dataset,
    pub count: usize,
    pub warnings: Vec<String>,
}

/// Copies a `treatment.disorder` into `subject.disorder` when its extent lies
/// inside a subject argument of the same event and that subject does not
/// already carry a disorder with the same text.
///
/// Containment is decided on grounded offsets; ungrounded disorders or
/// subjects are skipped and reported in `warnings`. Existing arguments are
/// never changed or removed.
pub fn revise_subject_disorder(dataset: &Dataset) -> Revision {
    let mut revised = dataset.clone();
    let mut count = 0;
    let mut warnings = Vec::new();

    for inst in &mut revised.instances {
        for (event_idx, event) in inst.events.iter_mut().enumerate() {
            let disorders: Vec<Span> = event
                .arguments
                .iter()
                .filter(|a| a.kind == ArgumentKind::Treatment)
                .flat_map(|a| &a.sub_arguments)
                .filter(|s| s.kind == ArgumentKind::TreatmentDisorder)
                .map(|s| s.span.clone())
                .collect();
            for disorder in disorders {
                if !disorder.is_grounded() {
                    warnings.push(format!(
                        "{} event {}: ungrounded treatment.disorder {:?} skipped",
                        inst.id, event_idx, disorder.text
                    ));
                    continue;
                }
                let key = collapse_whitespace(&disorder.text);
                for subject in event
                    .arguments
                    .iter_mut()
                    .filter(|a| a.kind == ArgumentKind::Subject)
                {
                    if !subject.span.is_grounded() {
                        warnings.push(format!(
                            "{} event {}: ungrounded subject {:?} skipped",
                            inst.id, event_idx, subject.span.text
                        ));
                        continue;
                    }
                    if !subject.span.contains(&disorder) {
                        continue;
                    }
                    let already = subject.sub_arguments.iter().any(|s| {
                        s.kind == ArgumentKind::SubjectDisorder
                            && collapse_whitespace(&s.span.text) == key
                    });
                    if !already {
                        subject
                            .sub_arguments
                            .push(Argument::new(ArgumentKind::SubjectDisorder, disorder.clone()));
                        count += 1;
                    }
                }
            }
        }
    }
    Revision { dataset: revised, count, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Instance;
    use crate::schema::{ground_spans, Event, EventType};

    const SENTENCE: &str = "We report two patients with acne vulgaris with a fourth type of minocycline-induced cutaneous pigmentation.";

    fn acne_instance(with_subject_disorder: bool, subject_text: &str) -> Instance {
        let mut subject_subs = vec![Argument::new(ArgumentKind::Population, Span::ungrounded("two"))];
        if with_subject_disorder {
            subject_subs.push(Argument::new(ArgumentKind::SubjectDisorder, Span::ungrounded("acne vulgaris")));
        }
        let event = Event {
            event_type: EventType::AdverseEvent,
            trigger: Some(Span::ungrounded("induced")),
            arguments: vec![
                Argument::with_subs(ArgumentKind::Subject, Span::ungrounded(subject_text), subject_subs),
                Argument::with_subs(
                    ArgumentKind::Treatment,
                    Span::ungrounded("minocycline"),
                    vec![
                        Argument::new(ArgumentKind::Drug, Span::ungrounded("minocycline")),
                        Argument::new(ArgumentKind::TreatmentDisorder, Span::ungrounded("acne vulgaris")),
                    ],
                ),
                Argument::new(ArgumentKind::Effect, Span::ungrounded("cutaneous pigmentation")),
            ],
        };
        Instance::new("acne", SENTENCE, ground_spans(&[event], SENTENCE))
    }

    fn subject_disorders(ds: &Dataset) -> Vec<String> {
        ds.instances[0].events[0].arguments[0]
            .sub_arguments
            .iter()
            .filter(|s| s.kind == ArgumentKind::SubjectDisorder)
            .map(|s| s.span.text.clone())
            .collect()
    }

    #[test]
    fn adds_subject_disorder_once() {
        let ds = Dataset::new(vec![acne_instance(false, "two patients with acne vulgaris")]).unwrap();
        let first = revise_subject_disorder(&ds);
        assert_eq!(first.count, 1);
        assert_eq!(subject_disorders(&first.dataset), vec!["acne vulgaris"]);
        let added = first.dataset.instances[0].events[0].arguments[0].sub_arguments.last().unwrap();
        assert_eq!(added.span.range(), Some(28..41));

        let second = revise_subject_disorder(&first.dataset);
        assert_eq!(second.count, 0);
        assert_eq!(second.dataset, first.dataset);
    }

    #[test]
    fn existing_subject_disorder_is_left_alone() {
        let ds = Dataset::new(vec![acne_instance(true, "two patients with acne vulgaris")]).unwrap();
        let rev = revise_subject_disorder(&ds);
        assert_eq!(rev.count, 0);
        assert_eq!(rev.dataset, ds);
    }

    #[test]
    fn disorder_outside_subject_is_ignored() {
        let ds = Dataset::new(vec![acne_instance(false, "two patients")]).unwrap();
        let rev = revise_subject_disorder(&ds);
        assert_eq!(rev.count, 0);
        assert_eq!(rev.dataset, ds);
    }

    #[test]
    fn ungrounded_disorder_is_skipped_with_warning() {
        let mut inst = acne_instance(false, "two patients with acne vulgaris");
        inst.events[0].arguments[1].sub_arguments[1].span.clear_offsets();
        let ds = Dataset::new(vec![inst]).unwrap();
        let rev = revise_subject_disorder(&ds);
        assert_eq!(rev.count, 0);
        assert_eq!(rev.warnings.len(), 1);
    }
}
