use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::parse::{parse_events_output, parse_stage1_output, parse_stage2_answer};
use super::{ChatClient, LlmError};
use crate::corpus::Instance;
use crate::prompting::{
    build_few_shot, build_pipeline_stage2, build_zero_shot, ChatRequest, FewShotOptions,
    PromptStrategy, DEFAULT_MODEL, EXTRACTION_TEMPERATURE,
};
use crate::retrieval::Selector;
use crate::schema::{ground_spans, Argument, ArgumentKind, Event, EventRecord, Span};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub strategy: PromptStrategy,
    /// Demonstrations per event type; 0 for zero-shot.
    pub shots: usize,
    pub model: String,
    pub temperature: f64,
    pub few_shot: FewShotOptions,
    pub concurrency: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            strategy: PromptStrategy::Explanation,
            shots: 0,
            model: DEFAULT_MODEL.to_string(),
            temperature: EXTRACTION_TEMPERATURE,
            few_shot: FewShotOptions::default(),
            concurrency: 4,
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub events: Vec<EventRecord>,
    pub raw_text: String,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Set when the instance failed and should be retried.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRecord {
    pub fn to_events(&self) -> Result<Vec<Event>, LlmError> {
        self.events
            .iter()
            .map(|r| r.to_event().map_err(|e| LlmError::Format(format!("prediction {}: {e}", self.id))))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub requests: usize,
    pub cache_hits: usize,
    pub demonstrations: usize,
    pub shots: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub instances: usize,
    pub requests: usize,
    pub cache_hits: usize,
    pub failures: usize,
    pub unparseable: usize,
    pub per_instance: BTreeMap<String, InstanceStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRun {
    pub predictions: Vec<PredictionRecord>,
    pub stats: ExtractStats,
}

struct Outcome {
    record: PredictionRecord,
    stats: InstanceStats,
    unparseable: bool,
}

fn with_params(req: ChatRequest, cfg: &ExtractionConfig) -> ChatRequest {
    ChatRequest::new(cfg.model.clone(), cfg.temperature, req.messages)
}

fn ask(client: &ChatClient, req: &ChatRequest, stats: &mut InstanceStats) -> Result<String, LlmError> {
    stats.requests += 1;
    let resp = client.complete(req)?;
    if resp.from_cache {
        stats.cache_hits += 1;
    }
    Ok(resp.content)
}

fn extract_one(
    inst: &Instance,
    cfg: &ExtractionConfig,
    selector: Option<&Selector>,
    client: &ChatClient,
) -> Outcome {
    let mut stats = InstanceStats::default();
    let result = match cfg.strategy {
        PromptStrategy::Pipeline => run_pipeline(inst, cfg, client, &mut stats),
        _ => run_end_to_end(inst, cfg, selector, client, &mut stats),
    };
    match result {
        Ok((events, raw_text, warnings, unparseable)) => Outcome {
            record: PredictionRecord {
                id: inst.id.clone(),
                events: events.iter().map(EventRecord::from).collect(),
                raw_text,
                warnings,
                error: None,
            },
            stats,
            unparseable,
        },
        Err(e) => {
            log::error!("{}: {e}", inst.id);
            Outcome {
                record: PredictionRecord {
                    id: inst.id.clone(),
                    events: Vec::new(),
                    raw_text: String::new(),
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                },
                stats,
                unparseable: false,
            }
        }
    }
}

type Extracted = (Vec<Event>, String, Vec<String>, bool);

fn run_end_to_end(
    inst: &Instance,
    cfg: &ExtractionConfig,
    selector: Option<&Selector>,
    client: &ChatClient,
    stats: &mut InstanceStats,
) -> Result<Extracted, LlmError> {
    let req = if cfg.shots == 0 {
        build_zero_shot(cfg.strategy, &inst.text)
    } else {
        let selector = selector.ok_or_else(|| LlmError::Config("few-shot extraction needs a selector".into()))?;
        let selection = selector.select(inst, cfg.shots)?;
        let demos = selector.instances(&selection);
        let few = build_few_shot(cfg.strategy, &inst.text, &demos, &cfg.few_shot)?;
        stats.demonstrations = few.demo_ids.len();
        stats.shots = few.shots;
        few.request
    };
    let raw = ask(client, &with_params(req, cfg), stats)?;
    Ok(match parse_events_output(&raw, &inst.text) {
        Ok(parsed) => (parsed.events, raw, parsed.warnings, false),
        Err(u) => (Vec::new(), raw, u.warnings, true),
    })
}

fn run_pipeline(
    inst: &Instance,
    cfg: &ExtractionConfig,
    client: &ChatClient,
    stats: &mut InstanceStats,
) -> Result<Extracted, LlmError> {
    let stage1 = ask(client, &with_params(build_zero_shot(PromptStrategy::Pipeline, &inst.text), cfg), stats)?;
    let (parsed, fields) = match parse_stage1_output(&stage1, &inst.text) {
        Ok(p) => p,
        Err(u) => return Ok((Vec::new(), stage1, u.warnings, true)),
    };
    let mut raw = stage1;
    let mut events = Vec::with_capacity(parsed.events.len());
    for (event, fields) in parsed.events.into_iter().zip(&fields) {
        let mut event: Event = event;
        event.strip_grounding();
        for kind in ArgumentKind::SUB {
            let req = build_pipeline_stage2(&inst.text, fields, kind)?;
            let answer = ask(client, &with_params(req, cfg), stats)?;
            raw.push_str(&format!("\n{}: {}", kind.prompt_name(), answer.trim()));
            if let Some(text) = parse_stage2_answer(&answer) {
                attach(&mut event, kind, text);
            }
        }
        events.push(event);
    }
    let events = ground_spans(&events, &inst.text);
    let mut warnings = parsed.warnings;
    for (i, e) in events.iter().enumerate() {
        for span in e.spans() {
            if !span.text.is_empty() && !span.is_grounded() {
                warnings.push(format!("event {i}: span {:?} not found in the sentence", span.text));
            }
        }
    }
    Ok((events, raw, warnings, false))
}

fn attach(event: &mut Event, kind: ArgumentKind, text: String) {
    let parent = kind.parent().expect("stage-2 kinds are sub kinds");
    let idx = match event.arguments.iter().position(|a| a.kind == parent) {
        Some(i) => i,
        None => {
            event.arguments.push(Argument::new(parent, Span::ungrounded("")));
            event.arguments.len() - 1
        }
    };
    event.arguments[idx].sub_arguments.push(Argument::new(kind, Span::ungrounded(text)));
}

/// Runs extraction over `instances` with up to `cfg.concurrency` requests in
/// flight. Failures are recorded per instance and the run continues.
/// Predictions come back ordered by instance id.
pub fn run_extraction(
    instances: &[&Instance],
    cfg: &ExtractionConfig,
    selector: Option<&Selector>,
    client: &ChatClient,
) -> ExtractionRun {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Outcome>> = Mutex::new(Vec::with_capacity(instances.len()));
    let workers = cfg.concurrency.clamp(1, instances.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(inst) = instances.get(i) else { break };
                let outcome = extract_one(inst, cfg, selector, client);
                results.lock().expect("no worker panics while holding the lock").push(outcome);
            });
        }
    });
    let mut outcomes = results.into_inner().expect("workers finished");
    outcomes.sort_by(|a, b| a.record.id.cmp(&b.record.id));
    let mut stats = ExtractStats { instances: outcomes.len(), ..Default::default() };
    let mut predictions = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        stats.requests += o.stats.requests;
        stats.cache_hits += o.stats.cache_hits;
        stats.failures += usize::from(o.record.error.is_some());
        stats.unparseable += usize::from(o.unparseable);
        stats.per_instance.insert(o.record.id.clone(), o.stats);
        predictions.push(o.record);
    }
    ExtractionRun { predictions, stats }
}

pub fn write_predictions(path: &Path, predictions: &[PredictionRecord]) -> Result<(), LlmError> {
    let mut out = Vec::new();
    for p in predictions {
        serde_json::to_writer(&mut out, p).expect("predictions always serialize");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| LlmError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, LlmError> {
    let text = fs::read_to_string(path).map_err(|e| LlmError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LlmError::Format(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
