use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::RetrievalError;

pub const DEFAULT_MAX_PATH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeToken {
    pub form: String,
    pub lower: String,
    pub deprel: String,
    /// 1-based head index, 0 for the root.
    pub head: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    pub sent_id: String,
    pub tokens: Vec<TreeToken>,
}

impl DependencyTree {
    /// Checks for a single root and acyclic, in-range heads.
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let invalid = |message: String| RetrievalError::InvalidTree { sent_id: self.sent_id.clone(), message };
        let n = self.tokens.len();
        if n == 0 {
            return Err(invalid("no tokens".into()));
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(invalid(format!("{roots} roots")));
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.head > n {
                return Err(invalid(format!("token {} has head {} beyond {n}", i + 1, tok.head)));
            }
            let mut cur = i + 1;
            let mut steps = 0;
            while cur != 0 {
                cur = self.tokens[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(invalid(format!("cycle through token {}", i + 1)));
                }
            }
        }
        Ok(())
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.tokens.len() + 1];
        for (i, tok) in self.tokens.iter().enumerate() {
            out[tok.head].push(i + 1);
        }
        out
    }

    /// Signatures of all downward chains of 1..=`max_len` edges, written as
    /// `token rel token rel token ...` with tab separators and lowercase tokens.
    pub fn subpaths(&self, max_len: usize) -> BTreeSet<String> {
        let children = self.children();
        let mut out = BTreeSet::new();
        for start in 1..=self.tokens.len() {
            let mut stack = vec![(start, self.tokens[start - 1].lower.clone(), 0usize)];
            while let Some((node, sig, depth)) = stack.pop() {
                if depth == max_len {
                    continue;
                }
                for &child in &children[node] {
                    let tok = &self.tokens[child - 1];
                    let next = format!("{sig}\t{}\t{}", tok.deprel, tok.lower);
                    out.insert(next.clone());
                    stack.push((child, next, depth + 1));
                }
            }
        }
        out
    }
}

/// Jaccard similarity of two signature sets; 0 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn tree_kernel_similarity(a: &DependencyTree, b: &DependencyTree, max_len: usize) -> f64 {
    jaccard(&a.subpaths(max_len), &b.subpaths(max_len))
}

/// Parses CoNLL-U text. Multiword ranges and empty nodes are skipped; the
/// sentence id comes from a `# sent_id = ...` comment, or is the 1-based
/// sentence index when absent.
pub fn parse_conllu(reader: impl BufRead) -> Result<Vec<DependencyTree>, RetrievalError> {
    let mut trees = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut tokens: Vec<TreeToken> = Vec::new();
    let mut finish = |sent_id: &mut Option<String>, tokens: &mut Vec<TreeToken>| -> Result<(), RetrievalError> {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let tree = DependencyTree {
            sent_id: sent_id.take().unwrap_or_else(|| (trees.len() + 1).to_string()),
            tokens: std::mem::take(tokens),
        };
        tree.validate()?;
        trees.push(tree);
        Ok(())
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::Io { path: "<conllu>".into(), source: e })?;
        let line_no = idx + 1;
        let bad = |message: String| RetrievalError::Conllu { line: line_no, message };
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            finish(&mut sent_id, &mut tokens)?;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(bad(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| bad(format!("bad token id {:?}", cols[0])))?;
        if id != tokens.len() + 1 {
            return Err(bad(format!("token id {id} out of sequence")));
        }
        let head: usize = cols[6].parse().map_err(|_| bad(format!("bad head {:?}", cols[6])))?;
        tokens.push(TreeToken {
            form: cols[1].to_string(),
            lower: cols[1].to_lowercase(),
            deprel: cols[7].to_string(),
            head,
        });
    }
    finish(&mut sent_id, &mut tokens)?;
    Ok(trees)
}

#[derive(Deserialize)]
struct ManifestRecord {
    id: String,
    sent_id: String,
}

/// Loads trees keyed by instance id. The manifest (one `{id, sent_id}` JSON
/// record per line) maps instances to sentences; without it sentence ids are
/// taken as instance ids.
pub fn load_trees(
    conllu: &Path,
    manifest: Option<&Path>,
) -> Result<BTreeMap<String, DependencyTree>, RetrievalError> {
    let file = fs::File::open(conllu).map_err(|e| RetrievalError::io(conllu, e))?;
    let trees = parse_conllu(std::io::BufReader::new(file))?;
    let mut by_sent: BTreeMap<String, DependencyTree> = BTreeMap::new();
    for tree in trees {
        if by_sent.contains_key(&tree.sent_id) {
            return Err(RetrievalError::Format(format!("duplicate sent_id {:?}", tree.sent_id)));
        }
        by_sent.insert(tree.sent_id.clone(), tree);
    }
    let Some(manifest) = manifest else {
        return Ok(by_sent);
    };
    let text = fs::read_to_string(manifest).map_err(|e| RetrievalError::io(manifest, e))?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: ManifestRecord = serde_json::from_str(line)
            .map_err(|e| RetrievalError::Format(format!("{}:{}: {e}", manifest.display(), idx + 1)))?;
        let tree = by_sent
            .get(&rec.sent_id)
            .ok_or_else(|| RetrievalError::Format(format!("manifest names unknown sent_id {:?}", rec.sent_id)))?;
        out.insert(rec.id, tree.clone());
    }
    Ok(out)
}
