//! Tolerant parsing of chat-model output into events.

use serde_json::{Map, Value};

use crate::prompting::Stage1Fields;
use crate::schema::{ground_spans, Argument, ArgumentKind, Event, EventType, Span};

/// Events recovered from one model answer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedOutput {
    pub events: Vec<Event>,
    pub warnings: Vec<String>,
}

/// No JSON value could be located in the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unparseable {
    pub warnings: Vec<String>,
}

/// Spans the model uses to say "nothing found".
pub fn is_null_answer(text: &str) -> bool {
    let t = text.trim().trim_matches(|c| c == '"' || c == '\'' || c == '.').trim();
    t.is_empty()
        || ["n/a", "na", "none", "null", "not mentioned", "not applicable", "unknown"]
            .iter()
            .any(|n| t.eq_ignore_ascii_case(n))
}

fn strip_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after = &text[open + 3..];
    // Skip a language tag on the fence line.
    let body_start = after.find('\n').map_or(0, |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// End (exclusive byte index) of the balanced bracket value starting at
/// `start`, honoring JSON string escapes.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '[' | '{' => depth += 1,
            ']' | '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + i + c.len_utf8());
                }
            }
            _ => {}
        }
    }
    None
}

fn drop_trailing_commas(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    let mut in_str = false;
    let mut escaped = false;
    let chars: Vec<char> = json.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// First balanced JSON array or object in `text`, after removing code
/// fences. Trailing commas are tolerated.
pub fn extract_json(text: &str) -> Option<Value> {
    for body in [strip_fences(text), text] {
        let mut from = 0;
        while let Some(off) = body[from..].find(['[', '{']) {
            let start = from + off;
            if let Some(end) = balanced_end(body, start) {
                let slice = &body[start..end];
                if let Ok(v) = serde_json::from_str::<Value>(slice) {
                    return Some(v);
                }
                if let Ok(v) = serde_json::from_str::<Value>(&drop_trailing_commas(slice)) {
                    return Some(v);
                }
            }
            from = start + 1;
        }
    }
    None
}

fn get_ci<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter()
        .find_map(|key| obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v))
}

/// All non-null span texts carried by a value (string, number or list).
fn span_texts(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) if !is_null_answer(s) => vec![s.trim().to_string()],
        Value::Number(n) => vec![n.to_string()],
        Value::Array(items) => items.iter().flat_map(span_texts).collect(),
        Value::Object(o) => get_ci(o, &["argument_span", "span", "text"]).map(span_texts).unwrap_or_default(),
        _ => Vec::new(),
    }
}

fn event_list(v: &Value) -> Vec<&Map<String, Value>> {
    match v {
        Value::Array(items) => items.iter().filter_map(Value::as_object).collect(),
        Value::Object(o) => {
            if let Some(inner) = get_ci(o, &["events", "output", "event_list"]) {
                event_list(inner)
            } else {
                vec![o]
            }
        }
        _ => Vec::new(),
    }
}

fn text_contains_ci(outer: &str, inner: &str) -> bool {
    outer.to_lowercase().contains(&inner.to_lowercase())
}

/// Attaches sub-arguments to a main argument of their parent kind: the only
/// one, else the first whose text contains the sub span, else the first.
/// A missing parent is created with empty text.
fn assemble(mains: Vec<Argument>, subs: Vec<Argument>) -> Vec<Argument> {
    let mut args = mains;
    for sub in subs {
        let parent = sub.kind.parent().expect("sub kinds have a parent");
        let candidates: Vec<usize> = (0..args.len()).filter(|&i| args[i].kind == parent).collect();
        let target = match candidates.as_slice() {
            [] => {
                args.push(Argument::new(parent, Span::ungrounded("")));
                args.len() - 1
            }
            [only] => *only,
            many => *many
                .iter()
                .find(|&&i| text_contains_ci(&args[i].span.text, &sub.span.text))
                .unwrap_or(&many[0]),
        };
        args[target].sub_arguments.push(sub);
    }
    args
}

fn parse_event(obj: &Map<String, Value>, idx: usize, warnings: &mut Vec<String>) -> Option<Event> {
    let label = get_ci(obj, &["event_type", "type", "event"]).and_then(Value::as_str).unwrap_or("");
    let Some(event_type) = EventType::from_label(label) else {
        warnings.push(format!("event {idx}: unknown event type {label:?}; dropped"));
        return None;
    };
    let mut event = Event::new(event_type);
    if let Some(t) = get_ci(obj, &["event_trigger", "trigger"]) {
        event.trigger = span_texts(t).into_iter().next().map(Span::ungrounded);
    }
    let mut mains = Vec::new();
    let mut subs = Vec::new();
    let mut push = |kind: ArgumentKind, text: String, nested: Vec<Argument>| {
        if kind.is_main() {
            mains.push(Argument::with_subs(kind, Span::ungrounded(text), Vec::new()));
        } else {
            subs.push(Argument::new(kind, Span::ungrounded(text)));
        }
        subs.extend(nested);
    };
    for (key, value) in obj {
        let lower = key.to_ascii_lowercase();
        if matches!(lower.as_str(), "event_type" | "type" | "event" | "event_trigger" | "trigger") {
            continue;
        }
        if lower == "arguments" {
            for (a_idx, arg) in value.as_array().into_iter().flatten().enumerate() {
                let Some(arg) = arg.as_object() else { continue };
                let label = get_ci(arg, &["argument_type", "type", "role"]).and_then(Value::as_str).unwrap_or("");
                let Some(kind) = ArgumentKind::from_label(label) else {
                    warnings.push(format!("event {idx} argument {a_idx}: unknown kind {label:?}; dropped"));
                    continue;
                };
                let nested = nested_subs(arg, kind, idx, warnings);
                let texts = get_ci(arg, &["argument_span", "span", "text"]).map(span_texts).unwrap_or_default();
                if texts.is_empty() && !nested.is_empty() {
                    push(kind, String::new(), nested);
                    continue;
                }
                let mut nested = Some(nested);
                for text in texts {
                    push(kind, text, nested.take().unwrap_or_default());
                }
            }
            continue;
        }
        match ArgumentKind::from_label(&lower) {
            Some(kind) => {
                for text in span_texts(value) {
                    push(kind, text, Vec::new());
                }
            }
            None => warnings.push(format!("event {idx}: ignored field {key:?}")),
        }
    }
    event.arguments = assemble(mains, subs);
    Some(event)
}

fn nested_subs(arg: &Map<String, Value>, parent: ArgumentKind, idx: usize, warnings: &mut Vec<String>) -> Vec<Argument> {
    let mut out = Vec::new();
    let Some(list) = get_ci(arg, &["sub_arguments", "arguments"]).and_then(Value::as_array) else {
        return out;
    };
    for sub in list.iter().filter_map(Value::as_object) {
        let label = get_ci(sub, &["argument_type", "type"]).and_then(Value::as_str).unwrap_or("");
        match ArgumentKind::from_label(label).filter(|k| k.parent() == Some(parent)) {
            Some(kind) => {
                for text in get_ci(sub, &["argument_span", "span", "text"]).map(span_texts).unwrap_or_default() {
                    out.push(Argument::new(kind, Span::ungrounded(text)));
                }
            }
            None => warnings.push(format!("event {idx}: sub-argument {label:?} under {parent} dropped")),
        }
    }
    out
}

fn events_from_value(value: &Value, sentence: &str) -> ParsedOutput {
    let mut warnings = Vec::new();
    let mut events: Vec<Event> = event_list(value)
        .into_iter()
        .enumerate()
        .filter_map(|(i, obj)| parse_event(obj, i, &mut warnings))
        .collect();
    events = ground_spans(&events, sentence);
    for (i, e) in events.iter().enumerate() {
        for span in e.spans() {
            if !span.text.is_empty() && !span.is_grounded() {
                warnings.push(format!("event {i}: span {:?} not found in the sentence", span.text));
            }
        }
    }
    ParsedOutput { events, warnings }
}

/// Parses an extraction answer into grounded events.
pub fn parse_events_output(text: &str, sentence: &str) -> Result<ParsedOutput, Unparseable> {
    match extract_json(text) {
        Some(value) => Ok(events_from_value(&value, sentence)),
        None => Err(Unparseable { warnings: vec!["no JSON value found in the output".into()] }),
    }
}

/// Parses a synthesis answer: the generated sentence and its events,
/// grounded against that sentence.
pub fn parse_synthesis_output(text: &str) -> Result<(String, ParsedOutput), Unparseable> {
    let value = extract_json(text).ok_or_else(|| Unparseable { warnings: vec!["no JSON value found".into()] })?;
    let sentence = value
        .as_object()
        .and_then(|o| get_ci(o, &["sentence", "generated_sentence", "text"]))
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Unparseable { warnings: vec!["missing \"sentence\" field".into()] })?;
    let output = value.as_object().and_then(|o| get_ci(o, &["output", "events"])).cloned().unwrap_or(Value::Null);
    Ok((sentence.clone(), events_from_value(&output, &sentence)))
}

/// Stage-1 pipeline answer: the main-argument events plus the text fields
/// quoted back in the stage-2 questions.
pub fn parse_stage1_output(text: &str, sentence: &str) -> Result<(ParsedOutput, Vec<Stage1Fields>), Unparseable> {
    let value = extract_json(text).ok_or_else(|| Unparseable { warnings: vec!["no JSON value found".into()] })?;
    let mut parsed = events_from_value(&value, sentence);
    parsed.events.iter_mut().for_each(|e| e.arguments.retain(|a| a.kind.is_main()));
    let fields = parsed
        .events
        .iter()
        .map(|e| {
            let join = |kind: ArgumentKind| {
                e.arguments
                    .iter()
                    .filter(|a| a.kind == kind)
                    .map(|a| a.span.text.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            Stage1Fields {
                event_type: e.event_type.display_name().to_string(),
                subject: join(ArgumentKind::Subject),
                treatment: join(ArgumentKind::Treatment),
                effect: join(ArgumentKind::Effect),
            }
        })
        .collect();
    Ok((parsed, fields))
}

/// Span text of a stage-2 answer, `None` for N/A-style answers.
pub fn parse_stage2_answer(text: &str) -> Option<String> {
    let t = text.trim();
    let t = t.strip_prefix("Answer:").unwrap_or(t).trim();
    let t = t.trim_end_matches('.').trim_matches(|c| c == '"' || c == '\'').trim();
    if is_null_answer(t) {
        None
    } else {
        Some(t.to_string())
    }
}
