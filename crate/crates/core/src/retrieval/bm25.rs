use std::collections::HashMap;

use super::RetrievalError;
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone)]
struct Doc {
    id: String,
    tf: HashMap<String, usize>,
    len: usize,
}

/// Inverted statistics for Okapi BM25 over tokenized documents.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<Doc>,
    by_id: HashMap<String, usize>,
    df: HashMap<String, usize>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn build<I, S, T>(docs: I, params: Bm25Params) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(RetrievalError::InvalidParameters { k1: params.k1, b: params.b });
        }
        let mut out = Bm25Index {
            params,
            docs: Vec::new(),
            by_id: HashMap::new(),
            df: HashMap::new(),
            avg_len: 0.0,
        };
        for (id, text) in docs {
            let id = id.into();
            let tokens = tokenize(text.as_ref());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for term in tf.keys() {
                *out.df.entry(term.clone()).or_default() += 1;
            }
            if out.by_id.insert(id.clone(), out.docs.len()).is_some() {
                return Err(RetrievalError::DuplicateDocument(id));
            }
            out.docs.push(Doc { id, tf, len: tokens.len() });
        }
        if out.docs.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        out.avg_len = out.docs.iter().map(|d| d.len as f64).sum::<f64>() / out.docs.len() as f64;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of one document; repeated query terms count once per occurrence.
    pub fn score(&self, query_terms: &[String], doc_id: &str) -> Result<f64, RetrievalError> {
        let idx = *self
            .by_id
            .get(doc_id)
            .ok_or_else(|| RetrievalError::UnknownDocument(doc_id.to_string()))?;
        Ok(self.score_doc(query_terms, &self.docs[idx]))
    }

    fn score_doc(&self, query_terms: &[String], doc: &Doc) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let norm = 1.0 - b + b * doc.len as f64 / self.avg_len;
        query_terms
            .iter()
            .map(|t| {
                let tf = doc.tf.get(t).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    0.0
                } else {
                    self.idf(t) * tf * (k1 + 1.0) / (tf + k1 * norm)
                }
            })
            .sum()
    }

    /// Scores of every document, in insertion order.
    pub fn score_all(&self, query_terms: &[String]) -> Vec<(&str, f64)> {
        self.docs
            .iter()
            .map(|d| (d.id.as_str(), self.score_doc(query_terms, d)))
            .collect()
    }
}
