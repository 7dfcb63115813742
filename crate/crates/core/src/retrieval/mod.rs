//! Demonstration selection: random, BM25, dense-vector and dependency
//! tree-kernel strategies.

mod bm25;
mod dense;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Instance;
use crate::schema::EventType;
use crate::text::tokenize;

pub use bm25::{Bm25Index, Bm25Params};
pub use dense::{dense_similarity, EmbeddingRecord, EmbeddingStore};
pub use tree::{
    jaccard, load_trees, parse_conllu, tree_kernel_similarity, DependencyTree, TreeToken,
    DEFAULT_MAX_PATH,
};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("duplicate document {0:?}")]
    DuplicateDocument(String),
    #[error("cannot build an index without documents")]
    EmptyIndex,
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParameters { k1: f64, b: f64 },
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no embedding for {0:?}")]
    MissingEmbedding(String),
    #[error("no dependency tree for {0:?}")]
    MissingTree(String),
    #[error("{event_type} pool has {available} candidates, {k} requested")]
    PoolTooSmall { event_type: EventType, available: usize, k: usize },
    #[error("CoNLL-U line {line}: {message}")]
    Conllu { line: usize, message: String },
    #[error("invalid tree {sent_id:?}: {message}")]
    InvalidTree { sent_id: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RetrievalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RetrievalError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Random,
    Bm25,
    Dense,
    TreeKernel,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 4] = [
        SelectionStrategy::Random,
        SelectionStrategy::Bm25,
        SelectionStrategy::Dense,
        SelectionStrategy::TreeKernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::Bm25 => "bm25",
            SelectionStrategy::Dense => "dense",
            SelectionStrategy::TreeKernel => "tree_kernel",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(SelectionStrategy::Random),
            "bm25" => Ok(SelectionStrategy::Bm25),
            "dense" | "sbert" => Ok(SelectionStrategy::Dense),
            "tree_kernel" | "treekernel" | "tree" => Ok(SelectionStrategy::TreeKernel),
            other => Err(format!("unknown selection strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub id: String,
    pub score: f64,
}

/// Ranked demonstrations per event type, most similar first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub per_type: BTreeMap<EventType, Vec<Ranked>>,
}

impl Selection {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.per_type.values().flatten().map(|r| r.id.as_str())
    }
}

enum Scorer<'a> {
    Random,
    Bm25(Bm25Index),
    Dense(&'a EmbeddingStore),
    TreeKernel {
        trees: &'a BTreeMap<String, DependencyTree>,
        pool_paths: BTreeMap<String, BTreeSet<String>>,
        max_len: usize,
    },
}

/// Selection state over a fixed demonstration pool.
pub struct Selector<'a> {
    pool: Vec<&'a Instance>,
    scorer: Scorer<'a>,
    seed: u64,
}

impl<'a> Selector<'a> {
    fn sorted(pool: impl IntoIterator<Item = &'a Instance>) -> Vec<&'a Instance> {
        let mut pool: Vec<&Instance> = pool.into_iter().collect();
        pool.sort_by(|a, b| a.id.cmp(&b.id));
        pool
    }

    pub fn random(pool: impl IntoIterator<Item = &'a Instance>, seed: u64) -> Self {
        Selector { pool: Self::sorted(pool), scorer: Scorer::Random, seed }
    }

    pub fn bm25(pool: impl IntoIterator<Item = &'a Instance>, params: Bm25Params) -> Result<Self, RetrievalError> {
        let pool = Self::sorted(pool);
        let index = Bm25Index::build(pool.iter().map(|i| (i.id.clone(), i.text.as_str())), params)?;
        Ok(Selector { pool, scorer: Scorer::Bm25(index), seed: 0 })
    }

    pub fn dense(
        pool: impl IntoIterator<Item = &'a Instance>,
        store: &'a EmbeddingStore,
    ) -> Result<Self, RetrievalError> {
        let pool = Self::sorted(pool);
        if let Some(missing) = pool.iter().find(|i| store.get(&i.id).is_none()) {
            return Err(RetrievalError::MissingEmbedding(missing.id.clone()));
        }
        Ok(Selector { pool, scorer: Scorer::Dense(store), seed: 0 })
    }

    pub fn tree_kernel(
        pool: impl IntoIterator<Item = &'a Instance>,
        trees: &'a BTreeMap<String, DependencyTree>,
        max_len: usize,
    ) -> Result<Self, RetrievalError> {
        let pool = Self::sorted(pool);
        let mut pool_paths = BTreeMap::new();
        for inst in &pool {
            let tree = trees.get(&inst.id).ok_or_else(|| RetrievalError::MissingTree(inst.id.clone()))?;
            pool_paths.insert(inst.id.clone(), tree.subpaths(max_len));
        }
        Ok(Selector { pool, scorer: Scorer::TreeKernel { trees, pool_paths, max_len }, seed: 0 })
    }

    pub fn strategy(&self) -> SelectionStrategy {
        match self.scorer {
            Scorer::Random => SelectionStrategy::Random,
            Scorer::Bm25(_) => SelectionStrategy::Bm25,
            Scorer::Dense(_) => SelectionStrategy::Dense,
            Scorer::TreeKernel { .. } => SelectionStrategy::TreeKernel,
        }
    }

    pub fn pool(&self) -> &[&'a Instance] {
        &self.pool
    }

    pub fn get(&self, id: &str) -> Option<&'a Instance> {
        self.pool
            .binary_search_by(|i| i.id.as_str().cmp(id))
            .ok()
            .map(|pos| self.pool[pos])
    }

    /// Similarity of every pool instance to the query, in pool order.
    fn scores(&self, query: &Instance) -> Result<Vec<f64>, RetrievalError> {
        match &self.scorer {
            Scorer::Random => Ok(vec![0.0; self.pool.len()]),
            Scorer::Bm25(index) => {
                let terms = tokenize(&query.text);
                Ok(index.score_all(&terms).into_iter().map(|(_, s)| s).collect())
            }
            Scorer::Dense(store) => {
                let q = store.get(&query.id).ok_or_else(|| RetrievalError::MissingEmbedding(query.id.clone()))?;
                self.pool
                    .iter()
                    .map(|i| dense_similarity(q, store.get(&i.id).expect("checked at build")))
                    .collect()
            }
            Scorer::TreeKernel { trees, pool_paths, max_len } => {
                let q = trees.get(&query.id).ok_or_else(|| RetrievalError::MissingTree(query.id.clone()))?;
                let qp = q.subpaths(*max_len);
                Ok(self.pool.iter().map(|i| jaccard(&qp, &pool_paths[&i.id])).collect())
            }
        }
    }

    /// Top-`k` demonstrations for each event type, excluding the query itself.
    /// Pools are the instances containing an event of that type; ties break
    /// on ascending id.
    pub fn select(&self, query: &Instance, k: usize) -> Result<Selection, RetrievalError> {
        let mut per_type = BTreeMap::new();
        if k == 0 {
            for t in EventType::ALL {
                per_type.insert(t, Vec::new());
            }
            return Ok(Selection { per_type });
        }
        let scores = self.scores(query)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ id_seed(&query.id));
        for event_type in EventType::ALL {
            let mut cands: Vec<Ranked> = self
                .pool
                .iter()
                .zip(&scores)
                .filter(|(i, _)| i.id != query.id && i.has_event_type(event_type))
                .map(|(i, s)| Ranked { id: i.id.clone(), score: *s })
                .collect();
            if cands.len() < k {
                return Err(RetrievalError::PoolTooSmall { event_type, available: cands.len(), k });
            }
            match self.scorer {
                Scorer::Random => cands.shuffle(&mut rng),
                _ => cands.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))),
            }
            cands.truncate(k);
            per_type.insert(event_type, cands);
        }
        Ok(Selection { per_type })
    }

    /// Resolves a selection back to pool instances.
    pub fn instances(&self, selection: &Selection) -> BTreeMap<EventType, Vec<Instance>> {
        selection
            .per_type
            .iter()
            .map(|(t, ranked)| {
                (*t, ranked.iter().filter_map(|r| self.get(&r.id)).cloned().collect())
            })
            .collect()
    }
}

fn id_seed(id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Argument, ArgumentKind, Event, Span};

    fn inst(id: &str, text: &str, types: &[EventType]) -> Instance {
        let events = types
            .iter()
            .map(|t| {
                let mut e = Event::new(*t);
                e.arguments.push(Argument::new(ArgumentKind::Effect, Span::ungrounded("x")));
                e
            })
            .collect();
        Instance::new(id, text, events)
    }

    fn pool() -> Vec<Instance> {
        use EventType::*;
        vec![
            inst("a1", "aspirin caused a severe rash", &[AdverseEvent]),
            inst("a2", "nausea after cisplatin", &[AdverseEvent]),
            inst("a3", "rash and fever with aspirin", &[AdverseEvent]),
            inst("p1", "aspirin relieved the pain", &[PotentialTherapeuticEvent]),
            inst("p2", "cisplatin shrank the tumour", &[PotentialTherapeuticEvent]),
            inst("b1", "aspirin helped but caused rash", &[AdverseEvent, PotentialTherapeuticEvent]),
        ]
    }

    #[test]
    fn bm25_ranks_exact_copy_first_and_excludes_query() {
        let pool = pool();
        let sel = Selector::bm25(&pool, Bm25Params::default()).unwrap();
        let query = inst("q", "aspirin caused a severe rash", &[]);
        let out = sel.select(&query, 2).unwrap();
        assert_eq!(out.per_type[&EventType::AdverseEvent][0].id, "a1");
        let self_query = pool[0].clone();
        let out = sel.select(&self_query, 3).unwrap();
        assert!(out.ids().all(|id| id != "a1"));
        assert_eq!(out.per_type[&EventType::AdverseEvent].len(), 3);
    }

    #[test]
    fn pool_too_small_and_zero_k() {
        let pool = pool();
        let sel = Selector::bm25(&pool, Bm25Params::default()).unwrap();
        let q = inst("q", "rash", &[]);
        assert!(matches!(
            sel.select(&q, 4),
            Err(RetrievalError::PoolTooSmall { event_type: EventType::PotentialTherapeuticEvent, available: 3, k: 4 })
        ));
        let empty = sel.select(&q, 0).unwrap();
        assert!(empty.per_type.values().all(Vec::is_empty));
    }

    #[test]
    fn random_is_seeded_per_query() {
        let pool = pool();
        let sel = Selector::random(&pool, 7);
        let q = inst("q", "anything", &[]);
        assert_eq!(sel.select(&q, 2).unwrap(), sel.select(&q, 2).unwrap());
        let other = Selector::random(&pool, 7);
        assert_eq!(sel.select(&q, 3).unwrap(), other.select(&q, 3).unwrap());
    }

    #[test]
    fn ties_break_on_id() {
        let pool = pool();
        let sel = Selector::bm25(&pool, Bm25Params::default()).unwrap();
        let q = inst("q", "zzz unmatched", &[]);
        let out = sel.select(&q, 3).unwrap();
        let ids: Vec<_> = out.per_type[&EventType::AdverseEvent].iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["a1", "a2", "a3"]);
    }

    #[test]
    fn strategy_names_parse() {
        for s in SelectionStrategy::ALL {
            assert_eq!(s.name().parse::<SelectionStrategy>().unwrap(), s);
        }
        assert_eq!("sbert".parse::<SelectionStrategy>().unwrap(), SelectionStrategy::Dense);
    }
}
