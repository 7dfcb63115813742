use std::collections::HashSet;

use super::{Event, Span};

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Character ranges of every case-insensitive occurrence of `needle`.
pub(crate) fn find_all_ci(haystack: &[char], needle: &str) -> Vec<(usize, usize)> {
    let needle: Vec<char> = needle.chars().collect();
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| {
            needle
                .iter()
                .zip(&haystack[i..])
                .all(|(n, h)| chars_eq_ci(*n, *h))
        })
        .map(|i| (i, i + needle.len()))
        .collect()
}

fn ground_span(span: &mut Span, sentence: &[char], consumed: &mut HashSet<(usize, usize)>) {
    let hits = find_all_ci(sentence, &span.text);
    let Some(&first) = hits.first() else {
        span.clear_offsets();
        return;
    };
    let (start, end) = hits
        .iter()
        .copied()
        .find(|r| !consumed.contains(r))
        .unwrap_or(first);
    consumed.insert((start, end));
    // Offsets must reproduce the sentence text exactly.
    span.text = sentence[start..end].iter().collect();
    span.set_offsets(start, end);
}

/// Anchors span texts to character offsets in `sentence`.
///
/// Matching is case-insensitive. Within one event, spans are visited
/// depth-first (trigger, main argument, its subs, ...) and each takes the
/// leftmost occurrence not already claimed by an earlier span of that event;
/// when every occurrence is claimed the leftmost is reused. Spans whose text
/// does not occur stay ungrounded.
pub fn ground_spans(events: &[Event], sentence: &str) -> Vec<Event> {
    let mut out = events.to_vec();
    if sentence.is_empty() {
        return out;
    }
    let chars: Vec<char> = sentence.chars().collect();
    for event in &mut out {
        let mut consumed = HashSet::new();
        for span in event.spans_mut() {
            ground_span(span, &chars, &mut consumed);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Argument, ArgumentKind, EventType};

    fn effects(texts: &[&str]) -> Event {
        Event {
            event_type: EventType::AdverseEvent,
            trigger: None,
            arguments: texts
                .iter()
                .map(|t| Argument::new(ArgumentKind::Effect, Span::ungrounded(*t)))
                .collect(),
        }
    }

    fn brute_force_first(sentence: &str, needle: &str) -> Option<(usize, usize)> {
        let lower_s: Vec<char> = sentence.to_lowercase().chars().collect();
        let lower_n: Vec<char> = needle.to_lowercase().chars().collect();
        (0..lower_s.len())
            .find(|&i| lower_s[i..].starts_with(&lower_n))
            .map(|i| (i, i + lower_n.len()))
    }

    #[test]
    fn grounds_first_occurrence() {
        let sentence = "He developed nausea.";
        let out = ground_spans(&[effects(&["nausea", "aspirin"])], sentence);
        let nausea = &out[0].arguments[0].span;
        assert_eq!((nausea.start(), nausea.end()), (Some(13), Some(19)));
        assert_eq!(brute_force_first(sentence, "nausea"), Some((13, 19)));
        assert!(!out[0].arguments[1].span.is_grounded());
    }

    #[test]
    fn duplicate_texts_consume_left_to_right() {
        let out = ground_spans(&[effects(&["pain", "pain", "pain"])], "pain after pain");
        let ranges: Vec<_> = out[0].arguments.iter().map(|a| a.span.range().unwrap()).collect();
        assert_eq!(ranges, vec![0..4, 11..15, 0..4]);
    }

    #[test]
    fn case_insensitive_and_adopts_sentence_casing() {
        let out = ground_spans(&[effects(&["SEVERE rash"])], "Severe rash noted");
        let span = &out[0].arguments[0].span;
        assert_eq!(span.text, "Severe rash");
        assert!(span.is_consistent_with("Severe rash noted"));
    }

    #[test]
    fn events_do_not_share_consumption() {
        let sentence = "Amiodarone helped but Amiodarone also hurt";
        let mut ev = effects(&["amiodarone"]);
        ev.arguments[0].kind = ArgumentKind::Treatment;
        let out = ground_spans(&[ev.clone(), ev], sentence);
        assert_eq!(out[0].arguments[0].span.range(), Some(0..10));
        assert_eq!(out[1].arguments[0].span.range(), Some(0..10));
    }
}
