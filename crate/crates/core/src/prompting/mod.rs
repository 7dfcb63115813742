//! Chat prompt construction: zero-shot strategies, pipeline questions,
//! few-shot prompts with demonstrations and synthesis prompts.

mod render;
mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Instance;
use crate::schema::{ArgumentKind, EventType};

pub use render::{render_answer, render_synthesis_output, AnswerStyle};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-0301";
pub const EXTRACTION_TEMPERATURE: f64 = 0.0;
pub const GENERATION_TEMPERATURE: f64 = 0.2;
/// Default few-shot budget in estimated tokens.
pub const DEFAULT_BUDGET_TOKENS: usize = 3584;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("{0} is not a sub-argument kind")]
    UnknownSubKind(ArgumentKind),
    #[error("prompt needs ~{needed} tokens with a single shot, budget is {budget}")]
    BudgetExhausted { needed: usize, budget: usize },
    #[error("demonstration lists differ in length: {0:?}")]
    UnequalShots(Vec<(EventType, usize)>),
    #[error("few-shot prompting is not defined for the {0} strategy")]
    Unsupported(PromptStrategy),
    #[error("missing {0} constraint")]
    MissingConstraint(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStrategy {
    Schema,
    Code,
    Explanation,
    Pipeline,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 4] = [
        PromptStrategy::Schema,
        PromptStrategy::Code,
        PromptStrategy::Explanation,
        PromptStrategy::Pipeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptStrategy::Schema => "schema",
            PromptStrategy::Code => "code",
            PromptStrategy::Explanation => "explanation",
            PromptStrategy::Pipeline => "pipeline",
        }
    }

    pub fn answer_style(self) -> AnswerStyle {
        match self {
            PromptStrategy::Code => AnswerStyle::Code,
            _ => AnswerStyle::Prose,
        }
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStrategy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown prompt strategy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// A chat-completions request with a digest of its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
    pub cache_key: String,
}

#[derive(Serialize)]
struct KeyPayload<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [Message],
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, temperature: f64, messages: Vec<Message>) -> Self {
        assert!(temperature >= 0.0, "temperature must be non-negative");
        assert!(!messages.is_empty(), "a request needs at least one message");
        let model = model.into();
        let cache_key = digest(&model, temperature, &messages);
        ChatRequest { model, temperature, messages, cache_key }
    }

    pub fn user(temperature: f64, content: String) -> Self {
        ChatRequest::new(DEFAULT_MODEL, temperature, vec![Message { role: Role::User, content }])
    }

    pub fn with_model(self, model: &str) -> Self {
        ChatRequest::new(model, self.temperature, self.messages)
    }

    /// Content of the last user message.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

fn digest(model: &str, temperature: f64, messages: &[Message]) -> String {
    let payload = serde_json::to_vec(&KeyPayload { model, temperature, messages })
        .expect("request payload always serializes");
    hex::encode(Sha256::digest(payload))
}

/// Token estimate used for the few-shot budget: characters / 4, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

struct Layout {
    preamble: String,
    query: &'static str,
    sep: &'static str,
}

fn layout(strategy: PromptStrategy) -> Layout {
    match strategy {
        PromptStrategy::Schema => Layout {
            preamble: templates::SCHEMA_PREAMBLE.to_string(),
            query: templates::PROSE_QUERY,
            sep: " ",
        },
        PromptStrategy::Explanation => Layout {
            preamble: templates::explanation_preamble(),
            query: templates::PROSE_QUERY,
            sep: " ",
        },
        PromptStrategy::Code => Layout {
            preamble: templates::CODE_PREAMBLE.to_string(),
            query: templates::CODE_QUERY,
            sep: "\n",
        },
        PromptStrategy::Pipeline => Layout {
            preamble: String::new(),
            query: templates::STAGE1,
            sep: "",
        },
    }
}

/// Instruction template for a strategy with `<SENTENCE>` left in place.
/// For the pipeline strategy this is the stage-1 template.
pub fn template(strategy: PromptStrategy) -> String {
    let l = layout(strategy);
    if l.preamble.is_empty() {
        l.query.to_string()
    } else {
        format!("{}{}{}", l.preamble, l.sep, l.query)
    }
}

/// The stage-2 template with all placeholders in place.
pub fn stage2_template() -> &'static str {
    templates::STAGE2
}

/// The per-kind stage-2 question, `None` for main kinds.
pub fn stage2_question(kind: ArgumentKind) -> Option<&'static str> {
    templates::question(kind)
}

pub fn build_zero_shot(strategy: PromptStrategy, sentence: &str) -> ChatRequest {
    let text = template(strategy).replace(templates::SENTENCE, sentence);
    ChatRequest::user(EXTRACTION_TEMPERATURE, text)
}

/// Stage-1 answer fields carried into the stage-2 questions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Fields {
    pub event_type: String,
    pub subject: String,
    pub treatment: String,
    pub effect: String,
}

pub fn build_pipeline_stage2(
    sentence: &str,
    fields: &Stage1Fields,
    sub_kind: ArgumentKind,
) -> Result<ChatRequest, PromptError> {
    let question = templates::question(sub_kind).ok_or(PromptError::UnknownSubKind(sub_kind))?;
    let values = [
        ("<SENTENCE>", sentence.to_string()),
        ("<EVENT_TYPE>", fields.event_type.clone()),
        ("<SUBJECT>", fields.subject.clone()),
        ("<TREATMENT>", fields.treatment.clone()),
        ("<EFFECT>", fields.effect.clone()),
        ("<QUESTION>", question.to_string()),
    ];
    let text = fill_sequential(templates::STAGE2, &values);
    Ok(ChatRequest::user(EXTRACTION_TEMPERATURE, text))
}

/// An in-context example with its answer in the format the prompt asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub instance: Instance,
    pub rendered_answer: String,
}

impl Demonstration {
    pub fn new(instance: Instance, style: AnswerStyle) -> Self {
        let rendered_answer = render_answer(&instance.events, style);
        Demonstration { instance, rendered_answer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoOrder {
    /// Least similar first, so the best match sits next to the query.
    #[default]
    MostSimilarLast,
    MostSimilarFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FewShotOptions {
    pub budget_tokens: usize,
    pub order: DemoOrder,
}

impl Default for FewShotOptions {
    fn default() -> Self {
        FewShotOptions { budget_tokens: DEFAULT_BUDGET_TOKENS, order: DemoOrder::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotPrompt {
    pub request: ChatRequest,
    /// Shots kept after budget trimming.
    pub shots: usize,
    /// Demonstration ids in prompt order.
    pub demo_ids: Vec<String>,
}

/// Builds a few-shot prompt. `demos` maps each event type to its ranked
/// demonstrations, most similar first; all lists must have the same length.
pub fn build_few_shot(
    strategy: PromptStrategy,
    sentence: &str,
    demos: &BTreeMap<EventType, Vec<Instance>>,
    opts: &FewShotOptions,
) -> Result<FewShotPrompt, PromptError> {
    if strategy == PromptStrategy::Pipeline {
        return Err(PromptError::Unsupported(strategy));
    }
    let lens: Vec<(EventType, usize)> = demos.iter().map(|(t, v)| (*t, v.len())).collect();
    if lens.windows(2).any(|w| w[0].1 != w[1].1) {
        return Err(PromptError::UnequalShots(lens));
    }
    let k = lens.first().map_or(0, |l| l.1);
    let l = layout(strategy);
    let style = strategy.answer_style();
    let query = l.query.replace(templates::SENTENCE, sentence);

    let blocks: Vec<Vec<(String, String)>> = (0..k)
        .map(|rank| {
            demos
                .values()
                .map(|list| {
                    let inst = &list[rank];
                    let answer = render_answer(&inst.events, style);
                    let block = format!(
                        "{}{}{}",
                        l.query.replace(templates::SENTENCE, &inst.text),
                        l.sep,
                        answer
                    );
                    (inst.id.clone(), block)
                })
                .collect()
        })
        .collect();

    let assemble = |shots: usize| -> (String, Vec<String>) {
        let mut ranks: Vec<usize> = (0..shots).collect();
        if opts.order == DemoOrder::MostSimilarLast {
            ranks.reverse();
        }
        let mut parts = vec![l.preamble.clone()];
        let mut ids = Vec::new();
        for rank in ranks {
            for (id, block) in &blocks[rank] {
                parts.push(block.clone());
                ids.push(id.clone());
            }
        }
        parts.push(query.clone());
        (parts.join(l.sep), ids)
    };

    let mut shots = k;
    loop {
        let (text, demo_ids) = assemble(shots);
        let needed = estimate_tokens(&text);
        if needed <= opts.budget_tokens || shots == 0 {
            let request = ChatRequest::user(EXTRACTION_TEMPERATURE, text);
            return Ok(FewShotPrompt { request, shots, demo_ids });
        }
        if shots == 1 {
            return Err(PromptError::BudgetExhausted { needed, budget: opts.budget_tokens });
        }
        shots -= 1;
    }
}

/// Which variant of the synthesis prompt a template instance gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisCategory {
    Adverse,
    Therapeutic,
    MultiEvent,
}

impl SynthesisCategory {
    /// `None` for instances without events.
    pub fn of(instance: &Instance) -> Option<Self> {
        match instance.events.as_slice() {
            [] => None,
            [single] => Some(match single.event_type {
                EventType::AdverseEvent => SynthesisCategory::Adverse,
                EventType::PotentialTherapeuticEvent => SynthesisCategory::Therapeutic,
            }),
            _ => Some(SynthesisCategory::MultiEvent),
        }
    }

    pub fn needs_drug(self) -> bool {
        self != SynthesisCategory::MultiEvent
    }

    pub fn needs_effect(self) -> bool {
        self == SynthesisCategory::Adverse
    }
}

/// A drug name, and for adverse cases an effect, the generated sentence
/// must mention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintPair {
    pub drug: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<String>,
    /// Training instance the pair was drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

/// Synthesis template for a category with placeholders in place.
pub fn synthesis_template(category: SynthesisCategory) -> String {
    let ask = match category {
        SynthesisCategory::Adverse => templates::SYNTH_ADE,
        SynthesisCategory::Therapeutic => templates::SYNTH_PTE,
        SynthesisCategory::MultiEvent => templates::SYNTH_MULTI,
    };
    format!(
        "{} {} {} {}",
        templates::SYNTH_HEAD,
        templates::SCHEMA_EXPLAINED,
        ask,
        templates::SYNTH_TAIL
    )
}

pub fn build_synthesis_prompt(
    template_instance: &Instance,
    constraint: Option<&ConstraintPair>,
    category: SynthesisCategory,
) -> Result<ChatRequest, PromptError> {
    let drug = match (category.needs_drug(), constraint) {
        (false, _) => None,
        (true, Some(c)) => Some(c.drug.as_str()),
        (true, None) => return Err(PromptError::MissingConstraint("drug")),
    };
    let effect = match (category.needs_effect(), constraint.and_then(|c| c.effect.as_deref())) {
        (false, _) => None,
        (true, Some(e)) => Some(e),
        (true, None) => return Err(PromptError::MissingConstraint("effect")),
    };
    let mut values = vec![
        (templates::SENTENCE, template_instance.text.clone()),
        (templates::OUTPUT, render_synthesis_output(&template_instance.events)),
    ];
    values.extend(drug.map(|d| (templates::CONST_DRUG, d.to_string())));
    values.extend(effect.map(|e| (templates::CONST_EFFECT, e.to_string())));
    let text = fill_sequential(&synthesis_template(category), &values);
    Ok(ChatRequest::user(GENERATION_TEMPERATURE, text))
}

/// Substitutes placeholders left to right, each once, never rescanning
/// inserted values.
fn fill_sequential(template: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    for (ph, value) in values {
        if let Some(pos) = rest.find(ph) {
            out.push_str(&rest[..pos]);
            out.push_str(value);
            rest = &rest[pos + ph.len()..];
        }
    }
    out.push_str(rest);
    out
}
