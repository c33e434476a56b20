use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{RatingMatrix, RerankError};

/// Below this magnitude the similarity sum is treated as zero and CF
/// contributes nothing.
pub const SIMILARITY_SUM_EPS: f64 = 1e-9;

/// Impressions and clicks of the acting agent per item.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtrProfile {
    impressions: BTreeMap<String, u64>,
    clicks: BTreeMap<String, u64>,
}

impl CtrProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_impression(&mut self, id: &str) {
        *self.impressions.entry(id.to_string()).or_default() += 1;
    }

    /// Counts a click. Items never shown are ignored, keeping
    /// `clicks <= impressions`.
    pub fn record_click(&mut self, id: &str) {
        let shown = self.impressions(id);
        let clicks = self.clicks.entry(id.to_string()).or_default();
        if *clicks < shown {
            *clicks += 1;
        }
    }

    pub fn impressions(&self, id: &str) -> u64 {
        self.impressions.get(id).copied().unwrap_or(0)
    }

    pub fn clicks(&self, id: &str) -> u64 {
        self.clicks.get(id).copied().unwrap_or(0)
    }

    /// Click-through rate; `None` for items never shown.
    pub fn ctr(&self, id: &str) -> Option<f64> {
        let shown = self.impressions(id);
        (shown > 0).then(|| self.clicks(id) as f64 / shown as f64)
    }

    pub fn is_empty(&self) -> bool {
        self.impressions.is_empty()
    }

    /// Builds a profile carrying exactly the given rates, for tests and
    /// offline analysis. Rates are represented with 10^6 impressions.
    pub fn from_rates<'a>(rates: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        const SCALE: f64 = 1_000_000.0;
        let mut p = CtrProfile::default();
        for (id, r) in rates {
            p.impressions.insert(id.to_string(), SCALE as u64);
            p.clicks.insert(id.to_string(), (r.clamp(0.0, 1.0) * SCALE).round() as u64);
        }
        p
    }
}

/// Centered Pearson correlation. Zero-variance input yields 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, RerankError> {
    if x.len() != y.len() {
        return Err(RerankError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(RerankError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// User-based CF scores for `candidates`.
///
/// Each prime user's similarity is the Pearson correlation between their
/// ratings and the agent's CTR over items that have both; the score of an
/// item is the similarity-weighted rating sum divided by the similarity sum.
/// Unrated items contribute a rating of 0.
pub fn cf_scores(
    ratings: &RatingMatrix,
    ctr: &CtrProfile,
    candidates: &[String],
) -> HashMap<String, f64> {
    let mut y: HashMap<String, f64> = candidates.iter().map(|c| (c.clone(), 0.0)).collect();
    let sims: Vec<f64> = ratings
        .prime_users
        .iter()
        .map(|user| {
            let (r, u): (Vec<f64>, Vec<f64>) = user
                .ratings
                .iter()
                .filter_map(|(id, &score)| ctr.ctr(id).map(|c| (score, c)))
                .unzip();
            if r.len() < 2 {
                0.0
            } else {
                pearson(&r, &u).unwrap_or(0.0)
            }
        })
        .collect();
    let total: f64 = sims.iter().sum();
    if total.abs() < SIMILARITY_SUM_EPS {
        return y;
    }
    for (user, s) in ratings.prime_users.iter().zip(&sims) {
        if *s == 0.0 {
            continue;
        }
        for c in candidates {
            if let Some(r) = user.ratings.get(c) {
                *y.get_mut(c).unwrap() += s * r;
            }
        }
    }
    for v in y.values_mut() {
        *v /= total;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerank::PrimeUser;
    use proptest::prelude::*;

    fn user(name: &str, r: &[(&str, f64)]) -> PrimeUser {
        PrimeUser {
            name: name.into(),
            profile: String::new(),
            ratings: r.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[3., 1., 2.], &[0.9, 0.1, 0.5]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors_and_guard() {
        assert!(matches!(pearson(&[1., 2.], &[1.]), Err(RerankError::LengthMismatch(2, 1))));
        assert!(matches!(pearson(&[1.], &[1.]), Err(RerankError::TooShort(1))));
        assert_eq!(pearson(&[2., 2., 2.], &[1., 2., 3.]).unwrap(), 0.0);
    }

    #[test]
    fn worked_example() {
        let r = RatingMatrix {
            prime_users: vec![
                user("u1", &[("A", 3.), ("B", 1.), ("C", 2.)]),
                user("u2", &[("A", 2.), ("B", 1.), ("C", 3.)]),
            ],
        };
        let ctr = CtrProfile::from_rates([("A", 0.9), ("B", 0.1), ("C", 0.5)]);
        let y = cf_scores(&r, &ctr, &ids(&["A", "B", "C"]));
        // S = [1.0, 0.5]; Y = (1*[3,1,2] + 0.5*[2,1,3]) / 1.5
        assert!((y["A"] - 4.0 / 1.5).abs() < 1e-9);
        assert!((y["B"] - 1.0).abs() < 1e-9);
        assert!((y["C"] - 3.5 / 1.5).abs() < 1e-9);
    }

    #[test]
    fn empty_ctr_gives_zero() {
        let r = RatingMatrix { prime_users: vec![user("u1", &[("A", 3.), ("B", 1.)])] };
        let y = cf_scores(&r, &CtrProfile::new(), &ids(&["A", "B"]));
        assert!(y.values().all(|&v| v == 0.0));
    }

    #[test]
    fn single_user_identity() {
        let r = RatingMatrix { prime_users: vec![user("u1", &[("A", 3.), ("B", 1.), ("C", 2.)])] };
        let ctr = CtrProfile::from_rates([("A", 0.9), ("B", 0.1), ("C", 0.5)]);
        let y = cf_scores(&r, &ctr, &ids(&["C", "A", "D"]));
        assert!((y["C"] - 2.0).abs() < 1e-12);
        assert!((y["A"] - 3.0).abs() < 1e-12);
        assert_eq!(y["D"], 0.0);
    }

    #[test]
    fn guard_paths() {
        let r = RatingMatrix {
            prime_users: vec![
                user("u1", &[("A", 3.), ("B", 1.), ("C", 2.)]),
                user("u2", &[("A", 1.), ("B", 3.), ("C", 2.)]),
            ],
        };
        // Flat CTR: zero variance on the agent side.
        let flat = CtrProfile::from_rates([("A", 0.5), ("B", 0.5), ("C", 0.5)]);
        assert!(cf_scores(&r, &flat, &ids(&["A", "B"])).values().all(|&v| v == 0.0));
        // Only one overlapping item.
        let one = CtrProfile::from_rates([("A", 0.5)]);
        assert!(cf_scores(&r, &one, &ids(&["A"])).values().all(|&v| v == 0.0));
        // Opposite users cancel: S = [1, -1], sum 0.
        let ctr = CtrProfile::from_rates([("A", 0.9), ("B", 0.1), ("C", 0.5)]);
        let y = cf_scores(&r, &ctr, &ids(&["A", "B", "C"]));
        assert!(y.values().all(|&v| v == 0.0));
    }

    #[test]
    fn clicks_never_exceed_impressions() {
        let mut p = CtrProfile::new();
        p.record_click("x");
        assert_eq!(p.clicks("x"), 0);
        p.record_impression("x");
        p.record_click("x");
        p.record_click("x");
        assert_eq!(p.clicks("x"), 1);
        assert_eq!(p.ctr("x"), Some(1.0));
        assert_eq!(p.ctr("y"), None);
    }

    proptest! {
        #[test]
        fn pearson_affine_and_symmetric(x in prop::collection::vec(-100.0f64..100.0, 2..20),
                                        a in 0.01f64..50.0, b in -50.0f64..50.0,
                                        y in prop::collection::vec(-100.0f64..100.0, 20)) {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            prop_assume!(x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() > 1e-6);
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&x, &ax).unwrap() - 1.0).abs() < 1e-9);
            let y = &y[..x.len()];
            prop_assert_eq!(pearson(&x, y).unwrap(), pearson(y, &x).unwrap());
        }
    }
}
