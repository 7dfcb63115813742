//! Independent reference computations and random generators shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use phee_core::retrieval::{DependencyTree, TreeToken};
use phee_core::schema::{Argument, ArgumentKind, Event, EventType, Span};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Corpus = BTreeMap<String, Vec<Event>>;

// ---------------------------------------------------------------- generators

const WORDS: [&str; 8] = ["rash", "severe", "renal", "failure", "aspirin", "two", "patients", "Rash"];

fn phrase(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..=3);
    let mut out: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    if rng.random_bool(0.1) {
        out.insert(1.min(out.len()), "  ".into());
    }
    out.join(" ")
}

fn random_event(rng: &mut impl Rng) -> Event {
    let et = if rng.random_bool(0.6) { EventType::AdverseEvent } else { EventType::PotentialTherapeuticEvent };
    let mut e = Event::new(et);
    for _ in 0..rng.random_range(0..=4) {
        let kind = *ArgumentKind::MAIN.choose(rng).unwrap();
        let children: Vec<ArgumentKind> = kind.children().collect();
        let subs = (0..if children.is_empty() { 0 } else { rng.random_range(0..=2) })
            .map(|_| Argument::new(*children.choose(rng).unwrap(), Span::ungrounded(phrase(rng))))
            .collect();
        let text = if rng.random_bool(0.1) { String::new() } else { phrase(rng) };
        e.arguments.push(Argument::with_subs(kind, Span::ungrounded(text), subs));
    }
    e
}

fn perturb(rng: &mut impl Rng, gold: &[Event]) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::new();
    for e in gold {
        if rng.random_bool(0.15) {
            continue;
        }
        let mut e = e.clone();
        for a in &mut e.arguments {
            if rng.random_bool(0.3) {
                a.span = Span::ungrounded(phrase(rng));
            }
            a.sub_arguments.retain(|_| rng.random_bool(0.8));
        }
        if rng.random_bool(0.2) {
            e.event_type = match e.event_type {
                EventType::AdverseEvent => EventType::PotentialTherapeuticEvent,
                EventType::PotentialTherapeuticEvent => EventType::AdverseEvent,
            };
        }
        out.push(e);
    }
    if rng.random_bool(0.2) {
        out.push(random_event(rng));
    }
    out
}

/// Gold and prediction corpora with up to 10 instances and 3 events each.
pub fn random_corpus_pair(rng: &mut impl Rng) -> (Corpus, Corpus) {
    let mut gold = Corpus::new();
    let mut pred = Corpus::new();
    for i in 0..rng.random_range(1..=10) {
        let events: Vec<Event> = (0..rng.random_range(0..=3)).map(|_| random_event(rng)).collect();
        let mut p = perturb(rng, &events);
        p.truncate(3);
        gold.insert(format!("i{i}"), events);
        pred.insert(format!("i{i}"), p);
    }
    (gold, pred)
}

const LIN_CHARS: &[u8] = b"abcXYZ019[]\\ .,-";

fn lin_text(rng: &mut impl Rng) -> String {
    loop {
        let n = rng.random_range(1..=12);
        let s: String = (0..n).map(|_| *LIN_CHARS.choose(rng).unwrap() as char).collect();
        let t = s.trim().to_string();
        if !t.is_empty() && !t.contains("  ") {
            return t;
        }
    }
}

/// Canonical event lists whose spans include brackets and backslashes.
pub fn random_linearizable(rng: &mut impl Rng) -> Vec<Event> {
    (0..rng.random_range(0..=3))
        .map(|_| {
            let et = if rng.random_bool(0.5) { EventType::AdverseEvent } else { EventType::PotentialTherapeuticEvent };
            let mut e = Event::new(et);
            if rng.random_bool(0.5) {
                e.trigger = Some(Span::ungrounded(lin_text(rng)));
            }
            for _ in 0..rng.random_range(0..=3) {
                let kind = *ArgumentKind::MAIN.choose(rng).unwrap();
                let children: Vec<ArgumentKind> = kind.children().collect();
                let subs = (0..if children.is_empty() { 0 } else { rng.random_range(0..=3) })
                    .map(|_| Argument::new(*children.choose(rng).unwrap(), Span::ungrounded(lin_text(rng))))
                    .collect();
                e.arguments.push(Argument::with_subs(kind, Span::ungrounded(lin_text(rng)), subs));
            }
            e.canonicalize();
            e
        })
        .collect()
}

/// Up to 20 documents over a small vocabulary, plus a query.
pub fn random_bm25_corpus(rng: &mut impl Rng) -> (Vec<(String, String)>, String) {
    const VOCAB: [&str; 10] = ["drug", "rash", "fever", "Aspirin", "dose", "mg", "the", "of", "liver", "renal"];
    let docs = (0..rng.random_range(1..=20))
        .map(|i| {
            let n = rng.random_range(0..=12);
            let text: Vec<&str> = (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect();
            (format!("d{i:02}"), text.join(if rng.random_bool(0.5) { " " } else { ", " }))
        })
        .collect();
    let q: Vec<&str> = (0..rng.random_range(1..=5)).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    (docs, q.join(" "))
}

/// Random valid dependency tree with at least two tokens.
pub fn random_tree(rng: &mut impl Rng, id: &str) -> DependencyTree {
    const FORMS: [&str; 5] = ["p", "q", "r", "s", "t"];
    const RELS: [&str; 3] = ["nsubj", "obj", "amod"];
    let n = rng.random_range(2..=7);
    let tokens = (1..=n)
        .map(|i| {
            let form = FORMS.choose(rng).unwrap().to_string();
            TreeToken {
                lower: form.to_lowercase(),
                form,
                deprel: if i == 1 { "root".into() } else { RELS.choose(rng).unwrap().to_string() },
                head: if i == 1 { 0 } else { rng.random_range(1..i) },
            }
        })
        .collect();
    DependencyTree { sent_id: id.into(), tokens }
}

// ------------------------------------------------------------------- metrics

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect()
}

/// (event type, kind, text) for every non-empty argument.
fn items(events: &[Event]) -> Vec<(EventType, ArgumentKind, String)> {
    let mut out = Vec::new();
    for e in events {
        for a in &e.arguments {
            if !norm(&a.span.text).is_empty() {
                out.push((e.event_type, a.kind, norm(&a.span.text)));
            }
            for s in &a.sub_arguments {
                if !norm(&s.span.text).is_empty() {
                    out.push((e.event_type, s.kind, norm(&s.span.text)));
                }
            }
        }
    }
    out
}

/// Greedy one-to-one matching of equal elements.
fn greedy_match<T: PartialEq>(pred: &[T], gold: &[T]) -> usize {
    let mut used = vec![false; gold.len()];
    let mut n = 0;
    for p in pred {
        if let Some(j) = (0..gold.len()).find(|&j| !used[j] && gold[j] == *p) {
            used[j] = true;
            n += 1;
        }
    }
    n
}

/// (matched, predicted, gold) per kind name plus "main", "sub", "overall".
pub type BruteCounts = HashMap<String, (usize, usize, usize)>;

fn bump(c: &mut BruteCounts, key: &str, m: usize, p: usize, g: usize) {
    let e = c.entry(key.to_string()).or_insert((0, 0, 0));
    e.0 += m;
    e.1 += p;
    e.2 += g;
}

fn group(kind: ArgumentKind) -> &'static str {
    if kind.parent().is_none() {
        "main"
    } else {
        "sub"
    }
}

pub fn brute_em(pred: &Corpus, gold: &Corpus) -> BruteCounts {
    let mut c = BruteCounts::new();
    for (id, g) in gold {
        let (pi, gi) = (items(&pred[id]), items(g));
        for kind in ArgumentKind::ALL {
            let pk: Vec<_> = pi.iter().filter(|x| x.1 == kind).collect();
            let gk: Vec<_> = gi.iter().filter(|x| x.1 == kind).collect();
            let m = greedy_match(&pk, &gk);
            for key in [kind.name(), group(kind), "overall"] {
                bump(&mut c, key, m, pk.len(), gk.len());
            }
        }
    }
    c
}

pub fn brute_token(pred: &Corpus, gold: &Corpus) -> BruteCounts {
    let mut c = BruteCounts::new();
    for (id, g) in gold {
        let (pi, gi) = (items(&pred[id]), items(g));
        for kind in ArgumentKind::ALL {
            for et in [EventType::AdverseEvent, EventType::PotentialTherapeuticEvent] {
                let toks = |xs: &[(EventType, ArgumentKind, String)]| -> Vec<String> {
                    xs.iter().filter(|x| x.0 == et && x.1 == kind).flat_map(|x| words(&x.2)).collect()
                };
                let (pt, gt) = (toks(&pi), toks(&gi));
                let m = greedy_match(&pt, &gt);
                for key in [kind.name(), group(kind), "overall"] {
                    bump(&mut c, key, m, pt.len(), gt.len());
                }
            }
        }
    }
    c
}

pub fn brute_f1(c: &BruteCounts, key: &str) -> f64 {
    let (m, p, g) = c.get(key).copied().unwrap_or((0, 0, 0));
    let prec = if p == 0 { 0.0 } else { m as f64 / p as f64 };
    let rec = if g == 0 { 0.0 } else { m as f64 / g as f64 };
    if prec + rec == 0.0 {
        0.0
    } else {
        2.0 * prec * rec / (prec + rec)
    }
}

// ---------------------------------------------------------------------- bm25

/// Direct evaluation of the BM25 formula from raw documents.
pub fn brute_bm25(docs: &[(String, String)], query: &str, doc_id: &str, k1: f64, b: f64) -> f64 {
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| words(t)).collect();
    let n = docs.len() as f64;
    let avg = toks.iter().map(|t| t.len()).sum::<usize>() as f64 / n;
    let idx = docs.iter().position(|(id, _)| id == doc_id).unwrap();
    let doc = &toks[idx];
    let len = doc.len() as f64;
    let mut score = 0.0;
    for q in words(query) {
        let df = toks.iter().filter(|t| t.contains(&q)).count() as f64;
        let tf = doc.iter().filter(|t| **t == q).count() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        let norm = if avg == 0.0 { 1.0 } else { 1.0 - b + b * len / avg };
        score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
    score
}

// ------------------------------------------------------------------- f-test

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Regularized incomplete beta I_z(a, b) for half-integer a, b ≥ 1/2. With
/// t = sin²θ the integrand 2·sin^(2a−1)θ·cos^(2b−1)θ is smooth on [0, π/2].
pub fn incomplete_beta_oracle(z: f64, a: f64, b: f64) -> f64 {
    let g = |th: f64| 2.0 * th.sin().powf(2.0 * a - 1.0) * th.cos().powf(2.0 * b - 1.0);
    let upper = z.sqrt().asin();
    simpson(g, 0.0, upper, 20_000) / simpson(g, 0.0, std::f64::consts::FRAC_PI_2, 20_000)
}

/// CDF of F(d1, d2) at x.
pub fn f_cdf_oracle(x: f64, d1: f64, d2: f64) -> f64 {
    incomplete_beta_oracle(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0)
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Two-sided variance-ratio p-value, larger variance over smaller.
pub fn f_test_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (va, vb) = (sample_var(a), sample_var(b));
    let (f, d1, d2) = if va >= vb {
        (va / vb, (a.len() - 1) as f64, (b.len() - 1) as f64)
    } else {
        (vb / va, (b.len() - 1) as f64, (a.len() - 1) as f64)
    };
    let cdf = f_cdf_oracle(f, d1, d2);
    (f, (2.0 * cdf.min(1.0 - cdf)).min(1.0))
}
