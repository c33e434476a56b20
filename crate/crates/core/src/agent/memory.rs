//! Per-user structured experience: past instructions paired with the key
//! actions that solved them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::search::{Bm25Params, InvertedIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryEntry {
    pub q: String,
    pub key_actions: Vec<String>,
    pub meta: String,
    pub reward: f64,
}

/// A retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub index: usize,
    pub q: String,
    pub key_actions: Vec<String>,
    pub meta: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructuredMemory {
    entries: Vec<MemoryEntry>,
}

impl StructuredMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("memory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    /// BM25 scores of `query` against every stored instruction.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let docs = self.entries.iter().map(|e| e.q.as_str());
        match InvertedIndex::from_documents(docs, Bm25Params::default()) {
            Ok(index) => index.score_all(query),
            Err(_) => Vec::new(),
        }
    }
}

/// Entry whose instruction scores highest against `q_given`; ties go to
/// the most recent entry. Absent when nothing scores above zero.
pub fn retrieve_experience(memory: &StructuredMemory, q_given: &str) -> Option<Experience> {
    best_of(&memory.scores(q_given)).map(|(index, score)| {
        let e = &memory.entries[index];
        Experience { index, q: e.q.clone(), key_actions: e.key_actions.clone(), meta: e.meta.clone(), score }
    })
}

fn best_of(scores: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && best.is_none_or(|(_, b)| s >= b) {
            best = Some((i, s));
        }
    }
    best
}

/// Stores a solved instruction. Empty key-action lists are ignored. A
/// repeated instruction keeps whichever entry has the higher reward. When an
/// entry is written, `meta` is also appended to the reference entry that was
/// retrieved for this episode.
pub fn update_memory(
    memory: &mut StructuredMemory,
    q: &str,
    key_actions: Vec<String>,
    meta: &str,
    reward: f64,
    reference: Option<usize>,
) -> bool {
    if key_actions.is_empty() {
        return false;
    }
    let entry = MemoryEntry { q: q.to_string(), key_actions, meta: meta.to_string(), reward };
    let written = match memory.entries.iter().position(|e| e.q == q) {
        Some(i) if memory.entries[i].reward < reward => {
            memory.entries[i] = entry;
            Some(i)
        }
        Some(_) => None,
        None => {
            memory.entries.push(entry);
            Some(memory.entries.len() - 1)
        }
    };
    let Some(at) = written else { return false };
    if let Some(r) = reference.filter(|&r| r != at && r < memory.entries.len()) {
        if !meta.is_empty() {
            let host = &mut memory.entries[r].meta;
            if !host.is_empty() {
                host.push('\n');
            }
            host.push_str(meta);
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{idf, tokenize};
    use proptest::prelude::*;

    fn mem(qs: &[&str]) -> StructuredMemory {
        let mut m = StructuredMemory::new();
        for q in qs {
            update_memory(&mut m, q, vec![format!("search[{q}]")], "", 1.0, None);
        }
        m
    }

    // Brute-force BM25 with the default parameters.
    fn oracle(docs: &[&str], query: &str) -> Vec<f64> {
        let (k1, b) = (0.9, 0.4);
        let toks: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d)).collect();
        let avg = toks.iter().map(Vec::len).sum::<usize>() as f64 / docs.len() as f64;
        toks.iter()
            .map(|d| {
                tokenize(query)
                    .iter()
                    .map(|t| {
                        let tf = d.iter().filter(|x| *x == t).count() as f64;
                        let df = toks.iter().filter(|x| x.contains(t)).count();
                        if tf == 0.0 {
                            0.0
                        } else {
                            idf(docs.len(), df) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg))
                        }
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn retrieves_best_match() {
        let docs = ["buy red shirt", "buy running shoes"];
        let m = mem(&docs);
        let q = "red shirt under 20 dollars";
        let hit = retrieve_experience(&m, q).unwrap();
        assert_eq!(hit.q, "buy red shirt");
        let want = oracle(&docs, q);
        assert!((hit.score - want[0]).abs() < 1e-12);
        assert!(want[0] > want[1]);
    }

    #[test]
    fn empty_and_disjoint_are_absent() {
        assert!(retrieve_experience(&StructuredMemory::new(), "anything").is_none());
        assert!(retrieve_experience(&mem(&["buy red shirt"]), "laptop").is_none());
    }

    #[test]
    fn ties_prefer_recent() {
        let m = mem(&["red shirt", "shirt red"]);
        assert_eq!(retrieve_experience(&m, "red shirt").unwrap().index, 1);
    }

    #[test]
    fn dedup_keeps_higher_reward() {
        let mut m = StructuredMemory::new();
        assert!(update_memory(&mut m, "q", vec!["a".into()], "", 0.8, None));
        assert_eq!(m.len(), 1);
        let before = m.clone();
        assert!(!update_memory(&mut m, "q", vec!["b".into()], "", 0.75, None));
        assert_eq!(m, before);
        assert!(update_memory(&mut m, "q", vec!["c".into()], "", 1.0, None));
        assert_eq!(m.entries()[0].key_actions, vec!["c".to_string()]);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn empty_key_actions_ignored() {
        let mut m = StructuredMemory::new();
        assert!(!update_memory(&mut m, "q", vec![], "meta", 1.0, None));
        assert!(m.is_empty());
    }

    #[test]
    fn meta_appended_to_reference() {
        let mut m = mem(&["first"]);
        update_memory(&mut m, "second", vec!["x".into()], "lesson", 1.0, Some(0));
        assert_eq!(m.entries()[0].meta, "lesson");
        assert_eq!(m.entries()[1].meta, "lesson");
    }

    #[test]
    fn json_round_trip() {
        let m = mem(&["one", "two"]);
        let text = m.to_json();
        assert!(text.trim_start().starts_with('['));
        assert_eq!(StructuredMemory::from_json(&text).unwrap(), m);
    }

    proptest! {
        #[test]
        fn argmax_stable_under_scaling(scores in prop::collection::vec(0.0f64..10.0, 1..12), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            prop_assert_eq!(best_of(&scores).map(|b| b.0), best_of(&scaled).map(|b| b.0));
        }
    }
}
