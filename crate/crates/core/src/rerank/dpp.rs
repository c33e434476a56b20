use super::{RerankError, SimilarityMatrix};

/// Marginal gains at or below this value end greedy selection.
pub const GAIN_EPS: f64 = 1e-12;

/// Incremental-Cholesky state for greedy MAP inference over the kernel
/// `L = diag(q) S diag(q)`.
#[derive(Debug, Clone)]
pub struct DppWorkspace {
    n: usize,
    kernel: Vec<f64>,
    /// Cholesky rows built so far, one per candidate.
    c: Vec<Vec<f64>>,
    /// Remaining marginal gain of each candidate.
    d2: Vec<f64>,
    selected: Vec<usize>,
    taken: Vec<bool>,
}

impl DppWorkspace {
    pub fn new(scores: &[f64], sim: &SimilarityMatrix) -> Result<Self, RerankError> {
        let n = scores.len();
        if sim.len() != n {
            return Err(RerankError::Shape { got: sim.len(), expected: n });
        }
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(RerankError::NonPositiveScore(i));
        }
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kernel[i * n + j] = scores[i] * sim.get(i, j) * scores[j];
            }
        }
        let d2 = (0..n).map(|i| kernel[i * n + i]).collect();
        Ok(DppWorkspace {
            n,
            kernel,
            c: vec![Vec::new(); n],
            d2,
            selected: Vec::new(),
            taken: vec![false; n],
        })
    }

    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Best remaining candidate and its gain; ties go to the lowest index.
    pub fn best(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.n {
            if self.taken[i] {
                continue;
            }
            if best.is_none_or(|(_, g)| self.d2[i] > g) {
                best = Some((i, self.d2[i]));
            }
        }
        best
    }

    /// Selects `j` and updates the Cholesky rows and gains of every
    /// remaining candidate.
    pub fn select(&mut self, j: usize) {
        let dj = self.d2[j].sqrt();
        self.taken[j] = true;
        self.selected.push(j);
        let cj = self.c[j].clone();
        for i in 0..self.n {
            if self.taken[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(&self.c[i]).map(|(a, b)| a * b).sum();
            let e = (self.kernel(j, i) - dot) / dj;
            self.c[i].push(e);
            self.d2[i] -= e * e;
        }
    }
}

/// Result of greedy selection: candidate indices in order, the marginal gain
/// of each greedily chosen index, and how many were chosen greedily before
/// the fallback took over.
#[derive(Debug, Clone, PartialEq)]
pub struct DppSelection {
    pub order: Vec<usize>,
    pub gains: Vec<f64>,
    pub greedy_len: usize,
}

pub fn dpp_greedy_trace(scores: &[f64], sim: &SimilarityMatrix, k: usize) -> Result<DppSelection, RerankError> {
    if k < 1 {
        return Err(RerankError::ZeroK);
    }
    if k > scores.len() {
        return Err(RerankError::KTooLarge { k, n: scores.len() });
    }
    let mut ws = DppWorkspace::new(scores, sim)?;
    let mut gains = Vec::with_capacity(k);
    while ws.selected().len() < k {
        match ws.best() {
            Some((j, g)) if g > GAIN_EPS => {
                gains.push(g);
                ws.select(j);
            }
            _ => break,
        }
    }
    let greedy_len = ws.selected().len();
    let mut order = ws.selected().to_vec();
    if order.len() < k {
        let mut rest: Vec<usize> = (0..scores.len()).filter(|i| !order.contains(i)).collect();
        rest.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.extend(rest.into_iter().take(k - greedy_len));
    }
    Ok(DppSelection { order, gains, greedy_len })
}

/// Greedy MAP order over `ids`; `scores[i]` is the quality of `ids[i]`.
pub fn dpp_map_select(
    ids: &[String],
    scores: &[f64],
    sim: &SimilarityMatrix,
    k: usize,
) -> Result<Vec<String>, RerankError> {
    if ids.len() != scores.len() {
        return Err(RerankError::LengthMismatch(ids.len(), scores.len()));
    }
    let sel = dpp_greedy_trace(scores, sim, k)?;
    Ok(sel.order.into_iter().map(|i| ids[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn k1_picks_argmax() {
        let s = SimilarityMatrix::identity(3);
        assert_eq!(dpp_map_select(&ids(3), &[0.2, 0.9, 0.4], &s, 1).unwrap(), ["item2"]);
    }

    #[test]
    fn identity_kernel_orders_by_score() {
        let s = SimilarityMatrix::identity(3);
        assert_eq!(
            dpp_map_select(&ids(3), &[3.0, 2.0, 1.0], &s, 3).unwrap(),
            ["item1", "item2", "item3"]
        );
    }

    #[test]
    fn duplicate_item_is_deferred() {
        #[rustfmt::skip]
        let s = SimilarityMatrix::from_rows(3, vec![
            1.0, 1.0, 0.0,
            1.0, 1.0, 0.0,
            0.0, 0.0, 1.0,
        ]);
        let sel = dpp_greedy_trace(&[1.0, 0.99, 0.5], &s, 3).unwrap();
        assert_eq!(sel.order, [0, 2, 1]);
        assert_eq!(sel.greedy_len, 2);
        assert!((sel.gains[0] - 1.0).abs() < 1e-15);
        assert!((sel.gains[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let s = SimilarityMatrix::identity(2);
        assert!(matches!(dpp_greedy_trace(&[1.0, 1.0], &s, 0), Err(RerankError::ZeroK)));
        assert!(matches!(dpp_greedy_trace(&[1.0, 1.0], &s, 3), Err(RerankError::KTooLarge { .. })));
        assert!(matches!(dpp_greedy_trace(&[1.0, 0.0], &s, 1), Err(RerankError::NonPositiveScore(1))));
        assert!(matches!(
            dpp_greedy_trace(&[1.0], &s, 1),
            Err(RerankError::Shape { .. })
        ));
    }
}
