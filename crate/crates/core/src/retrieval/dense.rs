use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Cosine similarity; 0 when either vector is all zeros.
pub fn dense_similarity(u: &[f64], v: &[f64]) -> Result<f64, RetrievalError> {
    if u.len() != v.len() {
        return Err(RetrievalError::DimensionMismatch { left: u.len(), right: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Sentence vectors keyed by instance id, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    normalized: bool,
}

impl EmbeddingStore {
    pub fn new(records: impl IntoIterator<Item = EmbeddingRecord>) -> Result<Self, RetrievalError> {
        let mut store = EmbeddingStore::default();
        for rec in records {
            if store.vectors.is_empty() {
                store.dim = rec.vector.len();
            } else if rec.vector.len() != store.dim {
                return Err(RetrievalError::DimensionMismatch { left: store.dim, right: rec.vector.len() });
            }
            if store.vectors.insert(rec.id.clone(), rec.vector).is_some() {
                return Err(RetrievalError::DuplicateDocument(rec.id));
            }
        }
        Ok(store)
    }

    /// Reads one `{id, vector}` JSON record per line.
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|e| RetrievalError::io(path, e))?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line).map_err(|e| {
                RetrievalError::Format(format!("{}:{}: {e}", path.display(), idx + 1))
            })?);
        }
        EmbeddingStore::new(records)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// Scales every non-zero vector to unit length.
    pub fn normalize(&mut self) {
        for v in self.vectors.values_mut() {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
            }
        }
        self.normalized = true;
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, RetrievalError> {
        let get = |id: &str| self.get(id).ok_or_else(|| RetrievalError::MissingEmbedding(id.to_string()));
        dense_similarity(get(a)?, get(b)?)
    }
}
