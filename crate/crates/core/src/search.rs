//! BM25 inverted index with Lucene-style non-negative IDF.

use std::collections::HashMap;

use thiserror::Error;

use crate::catalog::{Catalog, Item};

pub const DEFAULT_K1: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("cannot index an empty collection")]
    Empty,
}

/// Lowercase, split on anything that is not alphanumeric. No stemming and
/// no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Text indexed for an item: title, description, features and attributes.
pub fn item_text(item: &Item) -> String {
    let mut parts = vec![item.title.as_str(), item.description.as_str()];
    parts.extend(item.features.iter().map(String::as_str));
    parts.extend(item.attributes.iter().map(String::as_str));
    parts.join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: DEFAULT_K1, b: DEFAULT_B }
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    params: Bm25Params,
}

impl InvertedIndex {
    pub fn build(catalog: &Catalog) -> Result<Self, SearchError> {
        Self::from_documents(catalog.items().iter().map(item_text), Bm25Params::default())
    }

    /// Indexes arbitrary documents; ordinals follow iteration order.
    pub fn from_documents<I, S>(docs: I, params: Bm25Params) -> Result<Self, SearchError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::new();
        for (ordinal, doc) in docs.into_iter().enumerate() {
            let tokens = tokenize(doc.as_ref());
            doc_lengths.push(tokens.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((ordinal, count));
            }
        }
        if doc_lengths.is_empty() {
            return Err(SearchError::Empty);
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        // Guard all-empty documents so the length ratio stays finite.
        let avg_doc_length = (total as f64 / doc_lengths.len() as f64).max(1.0);
        Ok(InvertedIndex { postings, doc_lengths, avg_doc_length, params })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    fn term_weight(&self, tf: u32, doc_len: u32, idf: f64) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * doc_len as f64 / self.avg_doc_length;
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// Scores every document against `query`; documents sharing no term
    /// score exactly 0. Repeated query terms count once per occurrence.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        for term in tokenize(query) {
            if let Some(list) = self.postings.get(&term) {
                let w = idf(self.doc_count(), list.len());
                for &(doc, tf) in list {
                    scores[doc] += self.term_weight(tf, self.doc_lengths[doc], w);
                }
            }
        }
        scores
    }

    pub fn bm25_score(&self, query: &str, ordinal: usize) -> f64 {
        assert!(ordinal < self.doc_count(), "ordinal {ordinal} out of range");
        let mut score = 0.0;
        for term in tokenize(query) {
            if let Some(list) = self.postings.get(&term) {
                if let Ok(pos) = list.binary_search_by_key(&ordinal, |&(d, _)| d) {
                    let w = idf(self.doc_count(), list.len());
                    score += self.term_weight(list[pos].1, self.doc_lengths[ordinal], w);
                }
            }
        }
        score
    }

    /// Top-`k` documents by score, descending, ties by ascending ordinal.
    /// Zero-score documents are included when fewer than `k` match.
    pub fn search(&self, query: &str, k: usize) -> Vec<(usize, f64)> {
        assert!(k >= 1, "k must be positive");
        let mut ranked: Vec<(usize, f64)> = self.score_all(query).into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

pub fn build_index(catalog: &Catalog) -> Result<InvertedIndex, SearchError> {
    InvertedIndex::build(catalog)
}
