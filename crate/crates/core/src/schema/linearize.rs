//! Bracketed target-sequence codec.
//!
//! Grammar: `[ <label> <text> <child>* ]`, tokens separated by one space.
//! Labels are event display names, `trigger`, and argument kind names.
//! `[`, `]` and `\` inside span text are escaped with a backslash. An
//! argument node with empty text and no children is a null span (rejection
//! noise) and is dropped on parse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Argument, ArgumentKind, Event, EventType, Span};

const TRIGGER_LABEL: &str = "trigger";

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizeOptions {
    pub include_trigger: bool,
    /// Probability of inserting a null node for each absent argument kind.
    pub noise_ratio: f64,
    pub seed: u64,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        LinearizeOptions { include_trigger: true, noise_ratio: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MalformedReason {
    UnbalancedOpen,
    UnexpectedClose,
    MissingLabel,
    UnknownLabel(String),
    WrongParent { child: String, parent: String },
    UnexpectedText,
    DuplicateTrigger,
    DanglingEscape,
}

impl std::fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MalformedReason::UnbalancedOpen => write!(f, "unclosed '['"),
            MalformedReason::UnexpectedClose => write!(f, "unexpected ']'"),
            MalformedReason::MissingLabel => write!(f, "node without label"),
            MalformedReason::UnknownLabel(l) => write!(f, "unknown label {l:?}"),
            MalformedReason::WrongParent { child, parent } => {
                write!(f, "{child} cannot appear under {parent}")
            }
            MalformedReason::UnexpectedText => write!(f, "unexpected text"),
            MalformedReason::DuplicateTrigger => write!(f, "more than one trigger"),
            MalformedReason::DanglingEscape => write!(f, "dangling escape"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed linearization at char {position}: {reason}")]
pub struct MalformedLinearization {
    pub position: usize,
    pub reason: MalformedReason,
}

struct Node {
    label: String,
    text: String,
    children: Vec<Node>,
}

impl Node {
    fn leaf(label: &str, text: &str) -> Self {
        Node { label: label.to_string(), text: text.to_string(), children: Vec::new() }
    }

    fn render(&self, out: &mut String) {
        out.push_str("[ ");
        out.push_str(&self.label);
        if !self.text.is_empty() {
            out.push(' ');
            escape_into(&self.text, out);
        }
        for child in &self.children {
            out.push(' ');
            child.render(out);
        }
        out.push_str(" ]");
    }
}

fn escape_into(text: &str, out: &mut String) {
    for c in text.chars() {
        if matches!(c, '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
}

fn sorted_by_kind(args: &[Argument]) -> Vec<&Argument> {
    let mut sorted: Vec<&Argument> = args.iter().collect();
    sorted.sort_by_key(|a| a.kind.order());
    sorted
}

fn insert_null_nodes(
    children: &mut Vec<Node>,
    keep_first: usize,
    candidates: impl Iterator<Item = ArgumentKind>,
    present: &[ArgumentKind],
    ratio: f64,
    rng: &mut ChaCha8Rng,
) {
    for kind in candidates {
        if present.contains(&kind) || !rng.random_bool(ratio) {
            continue;
        }
        let at = rng.random_range(keep_first..=children.len());
        children.insert(at, Node::leaf(kind.name(), ""));
    }
}

pub fn linearize(events: &[Event], include_trigger: bool) -> String {
    linearize_with(events, &LinearizeOptions { include_trigger, ..Default::default() })
}

pub fn linearize_with(events: &[Event], opts: &LinearizeOptions) -> String {
    let ratio = opts.noise_ratio.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = String::new();
    for (i, event) in events.iter().enumerate() {
        let mut node = Node::leaf(event.event_type.display_name(), "");
        let mut fixed = 0;
        if opts.include_trigger {
            if let Some(trigger) = &event.trigger {
                node.children.push(Node::leaf(TRIGGER_LABEL, &trigger.text));
                fixed = 1;
            }
        }
        for arg in sorted_by_kind(&event.arguments) {
            let mut arg_node = Node::leaf(arg.kind.name(), &arg.span.text);
            for sub in sorted_by_kind(&arg.sub_arguments) {
                arg_node.children.push(Node::leaf(sub.kind.name(), &sub.span.text));
            }
            if ratio > 0.0 {
                let present: Vec<ArgumentKind> =
                    arg.sub_arguments.iter().map(|s| s.kind).collect();
                insert_null_nodes(
                    &mut arg_node.children,
                    0,
                    arg.kind.children(),
                    &present,
                    ratio,
                    &mut rng,
                );
            }
            node.children.push(arg_node);
        }
        if ratio > 0.0 {
            let present: Vec<ArgumentKind> = event.arguments.iter().map(|a| a.kind).collect();
            insert_null_nodes(
                &mut node.children,
                fixed,
                ArgumentKind::MAIN.into_iter(),
                &present,
                ratio,
                &mut rng,
            );
        }
        if i > 0 {
            out.push(' ');
        }
        node.render(&mut out);
    }
    out
}

#[derive(Debug)]
enum Label {
    Event(EventType),
    Trigger,
    Kind(ArgumentKind),
    Unknown(String),
}

impl Label {
    fn describe(&self) -> String {
        match self {
            Label::Event(t) => t.display_name().to_string(),
            Label::Trigger => TRIGGER_LABEL.to_string(),
            Label::Kind(k) => k.name().to_string(),
            Label::Unknown(s) => s.clone(),
        }
    }
}

struct RawNode {
    label: Label,
    text: String,
    children: Vec<RawNode>,
    position: usize,
}

fn known_labels() -> Vec<(&'static str, Label)> {
    let mut labels: Vec<(&'static str, Label)> = EventType::ALL
        .into_iter()
        .map(|t| (t.display_name(), Label::Event(t)))
        .collect();
    labels.push((TRIGGER_LABEL, Label::Trigger));
    labels.extend(ArgumentKind::ALL.into_iter().map(|k| (k.name(), Label::Kind(k))));
    labels.sort_by_key(|(name, _)| std::cmp::Reverse(name.len()));
    labels
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    lenient: bool,
    warnings: Vec<String>,
    labels: Vec<(&'static str, Label)>,
}

impl Parser {
    fn new(input: &str, lenient: bool) -> Self {
        Parser {
            chars: input.chars().collect(),
            pos: 0,
            lenient,
            warnings: Vec::new(),
            labels: known_labels(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn fail(&mut self, position: usize, reason: MalformedReason) -> Result<(), MalformedLinearization> {
        let err = MalformedLinearization { position, reason };
        if self.lenient {
            self.warnings.push(err.to_string());
            Ok(())
        } else {
            Err(err)
        }
    }

    fn is_boundary(&self, at: usize) -> bool {
        match self.chars.get(at) {
            None => true,
            Some(c) => c.is_whitespace() || *c == '[' || *c == ']',
        }
    }

    /// Matches `label` word by word, allowing any whitespace run between
    /// words. Returns the position after the label.
    fn match_label(&self, label: &str) -> Option<usize> {
        let mut at = self.pos;
        for (i, word) in label.split(' ').enumerate() {
            if i > 0 {
                let ws_start = at;
                while self.chars.get(at).is_some_and(|c| c.is_whitespace()) {
                    at += 1;
                }
                if at == ws_start {
                    return None;
                }
            }
            for wc in word.chars() {
                if self.chars.get(at) != Some(&wc) {
                    return None;
                }
                at += 1;
            }
        }
        self.is_boundary(at).then_some(at)
    }

    fn read_label(&mut self) -> Option<Label> {
        for (name, label) in &self.labels {
            if let Some(end) = self.match_label(name) {
                self.pos = end;
                return Some(match label {
                    Label::Event(t) => Label::Event(*t),
                    Label::Trigger => Label::Trigger,
                    Label::Kind(k) => Label::Kind(*k),
                    Label::Unknown(s) => Label::Unknown(s.clone()),
                });
            }
        }
        let start = self.pos;
        while !self.is_boundary(self.pos) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(Label::Unknown(self.chars[start..self.pos].iter().collect()))
        }
    }

    fn read_text(&mut self) -> Result<String, MalformedLinearization> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            match c {
                '[' | ']' => break,
                '\\' => {
                    self.pos += 1;
                    match self.peek() {
                        Some(escaped) => {
                            text.push(escaped);
                            self.pos += 1;
                        }
                        None => {
                            self.fail(self.pos - 1, MalformedReason::DanglingEscape)?;
                            text.push('\\');
                        }
                    }
                }
                _ => {
                    text.push(c);
                    self.pos += 1;
                }
            }
        }
        let trimmed_len = text.trim_end().len();
        text.truncate(trimmed_len);
        Ok(text)
    }

    fn parse_node(&mut self) -> Result<RawNode, MalformedLinearization> {
        let position = self.pos;
        debug_assert_eq!(self.peek(), Some('['));
        self.pos += 1;
        self.skip_ws();
        let label = match self.read_label() {
            Some(label) => label,
            None => {
                self.fail(self.pos, MalformedReason::MissingLabel)?;
                Label::Unknown(String::new())
            }
        };
        self.skip_ws();
        let text = self.read_text()?;
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('[') => children.push(self.parse_node()?),
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                None => {
                    self.fail(position, MalformedReason::UnbalancedOpen)?;
                    break;
                }
                Some(_) => {
                    let at = self.pos;
                    self.read_text()?;
                    self.fail(at, MalformedReason::UnexpectedText)?;
                }
            }
        }
        Ok(RawNode { label, text, children, position })
    }

    fn parse_document(&mut self) -> Result<Vec<RawNode>, MalformedLinearization> {
        let mut nodes = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('[') => nodes.push(self.parse_node()?),
                Some(']') => {
                    let at = self.pos;
                    self.pos += 1;
                    self.fail(at, MalformedReason::UnexpectedClose)?;
                }
                Some(_) => {
                    let at = self.pos;
                    self.read_text()?;
                    self.fail(at, MalformedReason::UnexpectedText)?;
                }
            }
        }
        Ok(nodes)
    }

    fn keep<T>(&mut self, res: Result<Option<T>, MalformedLinearization>) -> Result<Option<T>, MalformedLinearization> {
        match res {
            Ok(v) => Ok(v),
            Err(e) if self.lenient => {
                self.warnings.push(e.to_string());
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn to_event(&mut self, node: RawNode) -> Result<Option<Event>, MalformedLinearization> {
        let event_type = match node.label {
            Label::Event(t) => t,
            Label::Unknown(name) => {
                return Err(MalformedLinearization {
                    position: node.position,
                    reason: MalformedReason::UnknownLabel(name),
                })
            }
            other => {
                return Err(MalformedLinearization {
                    position: node.position,
                    reason: MalformedReason::WrongParent {
                        child: other.describe(),
                        parent: "document".into(),
                    },
                })
            }
        };
        if !node.text.is_empty() {
            self.fail(node.position, MalformedReason::UnexpectedText)?;
        }
        let mut event = Event::new(event_type);
        for child in node.children {
            let position = child.position;
            match child.label {
                Label::Trigger => {
                    let res = if !child.children.is_empty() {
                        Err(MalformedLinearization {
                            position,
                            reason: MalformedReason::WrongParent {
                                child: child.children[0].label.describe(),
                                parent: TRIGGER_LABEL.into(),
                            },
                        })
                    } else if event.trigger.is_some() {
                        Err(MalformedLinearization {
                            position,
                            reason: MalformedReason::DuplicateTrigger,
                        })
                    } else {
                        Ok((!child.text.is_empty()).then(|| Span::ungrounded(child.text)))
                    };
                    if let Some(trigger) = self.keep(res)? {
                        event.trigger = Some(trigger);
                    }
                }
                Label::Kind(kind) if kind.is_main() => {
                    let res = self.to_main_argument(kind, child.text, child.children);
                    if let Some(arg) = self.keep(res)? {
                        event.arguments.push(arg);
                    }
                }
                other => {
                    let reason = match other {
                        Label::Unknown(name) => MalformedReason::UnknownLabel(name),
                        other => MalformedReason::WrongParent {
                            child: other.describe(),
                            parent: event_type.display_name().into(),
                        },
                    };
                    self.keep::<()>(Err(MalformedLinearization { position, reason }))?;
                }
            }
        }
        Ok(Some(event))
    }

    fn to_main_argument(
        &mut self,
        kind: ArgumentKind,
        text: String,
        children: Vec<RawNode>,
    ) -> Result<Option<Argument>, MalformedLinearization> {
        let mut subs = Vec::new();
        for child in children {
            let position = child.position;
            let res = match child.label {
                Label::Kind(sub) if sub.parent() == Some(kind) => {
                    if let Some(grandchild) = child.children.first() {
                        Err(MalformedLinearization {
                            position: grandchild.position,
                            reason: MalformedReason::WrongParent {
                                child: grandchild.label.describe(),
                                parent: sub.name().into(),
                            },
                        })
                    } else {
                        Ok((!child.text.is_empty())
                            .then(|| Argument::new(sub, Span::ungrounded(child.text))))
                    }
                }
                Label::Unknown(name) => Err(MalformedLinearization {
                    position,
                    reason: MalformedReason::UnknownLabel(name),
                }),
                other => Err(MalformedLinearization {
                    position,
                    reason: MalformedReason::WrongParent {
                        child: other.describe(),
                        parent: kind.name().into(),
                    },
                }),
            };
            if let Some(sub) = self.keep(res)? {
                subs.push(sub);
            }
        }
        if text.is_empty() && subs.is_empty() {
            return Ok(None);
        }
        Ok(Some(Argument::with_subs(kind, Span::ungrounded(text), subs)))
    }

    fn run(mut self) -> Result<(Vec<Event>, Vec<String>), MalformedLinearization> {
        let nodes = self.parse_document()?;
        let mut events = Vec::with_capacity(nodes.len());
        for node in nodes {
            let res = self.to_event(node);
            if let Some(event) = self.keep(res)? {
                events.push(event);
            }
        }
        Ok((events, self.warnings))
    }
}

/// Strict inverse of [`linearize`]. Spans come back ungrounded.
pub fn parse_linearized(input: &str) -> Result<Vec<Event>, MalformedLinearization> {
    Parser::new(input, false).run().map(|(events, _)| events)
}

/// Recovering parser: offending subtrees are dropped and reported as
/// warnings instead of failing the whole sequence.
pub fn parse_linearized_lenient(input: &str) -> (Vec<Event>, Vec<String>) {
    Parser::new(input, true)
        .run()
        .expect("lenient parsing never fails")
}
