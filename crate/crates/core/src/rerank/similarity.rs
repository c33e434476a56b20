use std::collections::HashMap;

use crate::catalog::Catalog;
use crate::search::tokenize;

/// Symmetric item-similarity matrix with unit diagonal, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        SimilarityMatrix { n, data }
    }

    /// Builds from row-major data; the caller guarantees symmetry.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {n}x{n} entries");
        SimilarityMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Cosine similarity between TF-IDF vectors of each candidate's title and
/// attributes. IDF is smoothed over the candidate set so identical texts map
/// to identical nonzero vectors.
pub fn item_similarity(catalog: &Catalog, candidates: &[String]) -> SimilarityMatrix {
    let docs: Vec<Vec<String>> = candidates
        .iter()
        .map(|id| {
            catalog.get(id).map_or_else(Vec::new, |item| {
                let mut t = tokenize(&item.title);
                for a in &item.attributes {
                    t.extend(tokenize(a));
                }
                t
            })
        })
        .collect();
    similarity_from_tokens(&docs)
}

pub fn similarity_from_tokens(docs: &[Vec<String>]) -> SimilarityMatrix {
    let n = docs.len();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let mut seen: Vec<&str> = d.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let vectors: Vec<Vec<(&str, f64)>> = docs
        .iter()
        .map(|d| {
            let mut tf: HashMap<&str, f64> = HashMap::new();
            for t in d {
                *tf.entry(t.as_str()).or_default() += 1.0;
            }
            let mut v: Vec<(&str, f64)> = tf
                .into_iter()
                .map(|(t, c)| {
                    let idf = ((1.0 + n as f64) / (1.0 + df[t] as f64)).ln() + 1.0;
                    (t, c * idf)
                })
                .collect();
            v.sort_unstable_by(|a, b| a.0.cmp(b.0));
            let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for e in &mut v {
                    e.1 /= norm;
                }
            }
            v
        })
        .collect();
    let mut m = SimilarityMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let s = sparse_dot(&vectors[i], &vectors[j]).clamp(0.0, 1.0);
            m.data[i * n + j] = s;
            m.data[j * n + i] = s;
        }
    }
    m
}

fn sparse_dot(a: &[(&str, f64)], b: &[(&str, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identical_and_disjoint() {
        let m = similarity_from_tokens(&[toks("red cotton shirt"), toks("red cotton shirt"), toks("oak desk")]);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 2), 1.0);
        assert_eq!(m.get(1, 0), m.get(0, 1));
    }

    #[test]
    fn catalog_candidates() {
        let cat = crate::catalog::generate_catalog(&crate::catalog::CatalogSpec { items: 40, seed: 5 });
        let ids: Vec<String> = cat.items().iter().take(12).map(|i| i.id.clone()).collect();
        let m = item_similarity(&cat, &ids);
        assert_eq!(m.len(), 12);
        for i in 0..12 {
            assert_eq!(m.get(i, i), 1.0);
        }
    }

    proptest! {
        #[test]
        fn positive_semidefinite(docs in prop::collection::vec(prop::collection::vec(0u8..10, 0..6), 1..10)) {
            let docs: Vec<Vec<String>> = docs.iter().map(|d| d.iter().map(|w| format!("t{w}")).collect()).collect();
            let m = similarity_from_tokens(&docs);
            let n = m.len();
            let dm = DMatrix::from_row_slice(n, n, m.as_slice());
            let eig = dm.symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                prop_assert!(*ev >= -1e-9, "eigenvalue {ev}");
            }
            for v in m.as_slice() {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
