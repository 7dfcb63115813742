//! Chat-completions server answering from a gold corpus.
//!
//! Extraction answers are the gold events of the queried sentence, with a
//! deterministic share of arguments dropped so scores are not trivially
//! perfect. Prompts with demonstrations drop fewer. Synthesis answers rewrite
//! the template sentence around the requested drug and effect.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use phee_core::corpus::{revise_subject_disorder, Dataset, Instance};
use phee_core::prompting::{render_answer, render_synthesis_output, stage2_question, AnswerStyle};
use phee_core::schema::{ArgumentKind, Event, EventType};
use serde_json::{json, Value};

pub struct MockState {
    by_text: HashMap<String, Instance>,
    /// Requests answered 429 before normal service starts.
    rate_limit_first: AtomicUsize,
    pub requests: AtomicUsize,
}

impl MockState {
    pub fn new(corpus: &Dataset, rate_limit_first: usize) -> Self {
        let revised = revise_subject_disorder(corpus).dataset;
        MockState {
            by_text: revised.instances.into_iter().map(|i| (i.text.clone(), i)).collect(),
            rate_limit_first: AtomicUsize::new(rate_limit_first),
            requests: AtomicUsize::new(0),
        }
    }
}

pub struct MockServer {
    pub addr: SocketAddr,
    pub state: Arc<MockState>,
}

impl MockServer {
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }
}

/// Binds `addr` and serves on a background thread for the life of the process.
pub fn spawn(addr: &str, state: MockState) -> std::io::Result<MockServer> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let state = Arc::new(state);
    let shared = Arc::clone(&state);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let st = Arc::clone(&shared);
            thread::spawn(move || {
                let _ = handle(stream, &st);
            });
        }
    });
    Ok(MockServer { addr, state })
}

fn handle(stream: TcpStream, state: &MockState) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("");
    let (status, payload) = if !path.ends_with("/chat/completions") {
        (404, json!({"error": {"message": format!("no route {path}")}}))
    } else if state
        .rate_limit_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        (429, json!({"error": {"message": "rate limited"}}))
    } else {
        state.requests.fetch_add(1, Ordering::SeqCst);
        match serde_json::from_slice::<Value>(&body) {
            Ok(v) => (200, completion(state, &v)),
            Err(e) => (400, json!({"error": {"message": e.to_string()}})),
        }
    };
    let text = payload.to_string();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Too Many Requests",
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    out.flush()
}

fn completion(state: &MockState, body: &Value) -> Value {
    let prompt = body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("");
    let content = answer(state, prompt);
    let prompt_tokens = prompt.len().div_ceil(4);
    let completion_tokens = content.len().div_ceil(4);
    json!({
        "id": "mock",
        "object": "chat.completion",
        "model": body["model"],
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
            "total_tokens": prompt_tokens + completion_tokens
        }
    })
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.rfind(start)? + start.len();
    let to = text[from..].find(end)? + from;
    Some(&text[from..to])
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf29ce484222325, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Gold events with the last argument of one event removed for every
/// `period`-th sentence (by hash).
fn imperfect(inst: &Instance, period: u64) -> Vec<Event> {
    let mut events = inst.events.clone();
    if fnv(&inst.text) % period == 0 {
        if let Some(e) = events.first_mut() {
            if let Some(last) = e.arguments.last_mut() {
                if last.sub_arguments.pop().is_none() {
                    e.arguments.pop();
                }
            }
        }
    }
    events
}

fn answer(state: &MockState, prompt: &str) -> String {
    if prompt.starts_with("Answer the question related") {
        return stage2(state, prompt);
    }
    if prompt.contains("Generate a sentence with") {
        return synthesis(state, prompt);
    }
    if prompt.starts_with("Extract adverse events and potential therapeutic events") {
        let Some(inst) = between(prompt, "Sentence: ", " Output:").and_then(|s| state.by_text.get(s)) else {
            return "[]".into();
        };
        let rows: Vec<Value> = inst
            .events
            .iter()
            .map(|e| {
                let main = |k: ArgumentKind| {
                    e.arguments.iter().filter(|a| a.kind == k).map(|a| a.span.text.as_str()).collect::<Vec<_>>().join(", ")
                };
                json!({
                    "event_type": e.event_type.display_name(),
                    "subject": main(ArgumentKind::Subject),
                    "treatment": main(ArgumentKind::Treatment),
                    "effect": main(ArgumentKind::Effect),
                })
            })
            .collect();
        return Value::Array(rows).to_string();
    }
    let demos = prompt.matches("Sentence: ").count() + prompt.matches("extract events in the sentence: ").count();
    let period = if demos > 1 { 7 } else { 3 };
    if let Some(s) = between(prompt, "extract events in the sentence: ", "\n") {
        return match state.by_text.get(s) {
            Some(inst) => render_answer(&imperfect(inst, period), AnswerStyle::Code),
            None => "[]".into(),
        };
    }
    match between(prompt, "Sentence: ", " Output:").and_then(|s| state.by_text.get(s)) {
        Some(inst) => render_answer(&imperfect(inst, period), AnswerStyle::Prose),
        None => "[]".into(),
    }
}

fn stage2(state: &MockState, prompt: &str) -> String {
    let na = || "N/A".to_string();
    let Some(inst) = between(prompt, "Sentence: ", " Event: Event type: ").and_then(|s| state.by_text.get(s)) else {
        return na();
    };
    let Some(kind) = ArgumentKind::SUB.into_iter().find(|k| stage2_question(*k).is_some_and(|q| prompt.ends_with(q)))
    else {
        return na();
    };
    let event_type = between(prompt, " Event: Event type: ", " Subject: ").unwrap_or("");
    let treatment = between(prompt, " Treatment: ", " Effect: ").unwrap_or("");
    let matches_type = |e: &&Event| EventType::from_label(event_type) == Some(e.event_type);
    let event = inst
        .events
        .iter()
        .filter(matches_type)
        .find(|e| e.arguments.iter().any(|a| a.kind == ArgumentKind::Treatment && a.span.text == treatment))
        .or_else(|| inst.events.iter().find(matches_type));
    let Some(event) = event else { return na() };
    event
        .arguments
        .iter()
        .flat_map(|a| &a.sub_arguments)
        .find(|s| s.kind == kind)
        .map(|s| s.span.text.clone())
        .unwrap_or_else(na)
}

fn synthesis(state: &MockState, prompt: &str) -> String {
    let Some(inst) = prompt
        .strip_prefix("Sentence: ")
        .and_then(|p| p.split_once(" The events involved in the sentence are: "))
        .and_then(|(s, _)| state.by_text.get(s))
    else {
        return "I cannot help with that.".into();
    };
    let mut sentence = format!("Similarly, {}", inst.text);
    let mut events = inst.events.clone();
    let mut replace = |kind: ArgumentKind, new: &str, sentence: &mut String| {
        let old = events
            .iter()
            .flat_map(|e| e.arguments.iter().flat_map(|a| std::iter::once(a).chain(&a.sub_arguments)))
            .find(|a| a.kind == kind)
            .map(|a| a.span.text.clone());
        if let Some(old) = old.filter(|o| !o.is_empty()) {
            *sentence = sentence.replace(&old, new);
            for e in &mut events {
                for span in e.spans_mut() {
                    span.text = span.text.replace(&old, new);
                }
            }
        }
    };
    if let Some(drug) = between(prompt, "The drug ", " must appear") {
        replace(ArgumentKind::Drug, drug, &mut sentence);
    }
    if let Some(effect) = between(prompt, "the effect should be ", ". Return") {
        replace(ArgumentKind::Effect, effect, &mut sentence);
    }
    for e in &mut events {
        e.strip_grounding();
    }
    let output: Value = serde_json::from_str(&render_synthesis_output(&events)).expect("rendered output is JSON");
    json!({"sentence": sentence, "output": output}).to_string()
}
