use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Instance, Split};
use crate::schema::EventType;

/// Stratification key: which event types a sentence contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    AdverseOnly,
    TherapeuticOnly,
    Both,
    NoEvent,
}

impl Stratum {
    pub fn of(inst: &Instance) -> Stratum {
        let ade = inst.has_event_type(EventType::AdverseEvent);
        let pte = inst.has_event_type(EventType::PotentialTherapeuticEvent);
        match (ade, pte) {
            (true, false) => Stratum::AdverseOnly,
            (false, true) => Stratum::TherapeuticOnly,
            (true, true) => Stratum::Both,
            (false, false) => Stratum::NoEvent,
        }
    }
}

/// Integer part and remainder of `x`, tolerant of representation error
/// (`10 * 0.6` must count as 6).
fn split_real(x: f64) -> (usize, f64) {
    let whole = (x + 1e-9).floor();
    (whole as usize, (x - whole).max(0.0))
}

/// Largest-remainder apportionment of `n` items by `weights` (summing to 1).
/// Ties go to the lower index.
fn apportion(n: usize, weights: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = split_real(*e).0;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        split_real(exact[b]).1.total_cmp(&split_real(exact[a]).1).then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Per-stratum split sizes whose row sums equal the stratum sizes and whose
/// column sums equal the global apportionment.
fn allocate(strata: &[usize], ratios: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = strata.iter().sum();
    let target = apportion(total, ratios);
    let mut cells: Vec<[usize; 3]> = strata
        .iter()
        .map(|&n| {
            let mut row = [0; 3];
            for s in 0..3 {
                row[s] = split_real(n as f64 * ratios[s]).0;
            }
            row
        })
        .collect();
    let mut row_left: Vec<usize> =
        strata.iter().zip(&cells).map(|(n, row)| n - row.iter().sum::<usize>()).collect();
    let mut col_left = [0usize; 3];
    for s in 0..3 {
        col_left[s] = target[s] - cells.iter().map(|r| r[s]).sum::<usize>();
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (h, &n) in strata.iter().enumerate() {
        for s in 0..3 {
            candidates.push((split_real(n as f64 * ratios[s]).1, h, s));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, h, s) in &candidates {
        if row_left[h] > 0 && col_left[s] > 0 {
            cells[h][s] += 1;
            row_left[h] -= 1;
            col_left[s] -= 1;
        }
    }
    // Whatever the greedy pass could not place; always feasible because the
    // remaining row and column totals are equal.
    for h in 0..strata.len() {
        for s in 0..3 {
            let take = row_left[h].min(col_left[s]);
            cells[h][s] += take;
            row_left[h] -= take;
            col_left[s] -= take;
        }
    }
    cells
}

/// Assigns train/validation/test labels, stratified by event-type presence.
/// Deterministic in (sorted instance ids, seed).
pub fn make_splits(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    let n_splits = ratios.iter().filter(|r| **r > 0.0).count();

    let mut strata: BTreeMap<Stratum, Vec<&str>> = BTreeMap::new();
    for inst in &dataset.instances {
        strata.entry(Stratum::of(inst)).or_default().push(&inst.id);
    }
    for (stratum, ids) in &strata {
        if ids.len() < n_splits {
            return Err(CorpusError::EmptyStratum { stratum: *stratum, size: ids.len(), splits: n_splits });
        }
    }

    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let cells = allocate(&sizes, &ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    out.splits.clear();
    for ((_, ids), row) in strata.iter_mut().zip(&cells) {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let mut cursor = ids.iter();
        for (split, &count) in Split::ALL.iter().zip(row) {
            for id in cursor.by_ref().take(count) {
                out.splits.insert(id.to_string(), *split);
            }
        }
    }
    Ok(out)
}

/// Cross-validation plan over train ∪ validation. Run `r` validates on fold
/// `r` and trains on the rest; the test split is never assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// (training ids, validation ids) for run `run`.
    pub fn run(&self, run: usize) -> (Vec<&str>, Vec<&str>) {
        let (val, train): (Vec<_>, Vec<_>) =
            self.assignments.iter().partition(|(_, f)| **f == run);
        (
            train.into_iter().map(|(id, _)| id.as_str()).collect(),
            val.into_iter().map(|(id, _)| id.as_str()).collect(),
        )
    }
}

/// Instances without a split label are pooled with train and validation.
pub fn make_folds(dataset: &Dataset, n_folds: usize, seed: u64) -> Result<FoldPlan, CorpusError> {
    if n_folds < 2 {
        return Err(CorpusError::TooFewFolds(n_folds));
    }
    let mut pool: Vec<&str> = dataset
        .instances
        .iter()
        .filter(|i| dataset.split_of(&i.id) != Some(Split::Test))
        .map(|i| i.id.as_str())
        .collect();
    if pool.len() < n_folds {
        return Err(CorpusError::PoolTooSmall { pool: pool.len(), folds: n_folds });
    }
    pool.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let assignments = pool
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i % n_folds))
        .collect();
    Ok(FoldPlan { n_folds, seed, assignments })
}
