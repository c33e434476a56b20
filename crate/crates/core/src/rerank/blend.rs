use std::collections::{HashMap, HashSet};

use super::RerankError;

pub const DEFAULT_W_CF: f64 = 0.8;
pub const DEFAULT_W_DPP: f64 = 0.2;

const WEIGHT_TOL: f64 = 1e-9;

/// Maps BM25 scores into DPP qualities in `[0.1, 1.1]` by min-max scaling.
/// A constant score vector maps to 1.1 everywhere.
pub fn dpp_quality_scores(bm25: &[f64]) -> Vec<f64> {
    let min = bm25.iter().copied().fold(f64::INFINITY, f64::min);
    let max = bm25.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    bm25.iter()
        .map(|&s| if span > 0.0 { 0.1 + (s - min) / span } else { 1.1 })
        .collect()
}

/// Linear rank decay: first of `k` maps to 1, last to 0.
pub fn rank_weight(rank: usize, k: usize) -> f64 {
    if k <= 1 {
        1.0
    } else {
        1.0 - (rank - 1) as f64 / (k - 1) as f64
    }
}

/// Reorders `base` by `w_cf * minmax(cf) + w_dpp * rank_weight(dpp rank)`.
/// The sort is stable, so ties keep their order in `base`.
pub fn blend_rerank(
    base: &[String],
    cf: &HashMap<String, f64>,
    dpp_order: &[String],
    w_cf: f64,
    w_dpp: f64,
) -> Result<Vec<String>, RerankError> {
    if w_cf < 0.0 || w_dpp < 0.0 || (w_cf + w_dpp - 1.0).abs() > WEIGHT_TOL {
        return Err(RerankError::Weights(w_cf + w_dpp));
    }
    let base_set: HashSet<&String> = base.iter().collect();
    let dpp_set: HashSet<&String> = dpp_order.iter().collect();
    if base.len() != dpp_order.len() || base_set != dpp_set || base_set.len() != base.len() {
        return Err(RerankError::NotPermutation);
    }
    let k = base.len();
    let raw: Vec<f64> = base.iter().map(|id| cf.get(id).copied().unwrap_or(0.0)).collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let dpp_rank: HashMap<&String, usize> = dpp_order.iter().enumerate().map(|(i, id)| (id, i + 1)).collect();

    let mut scored: Vec<(f64, &String)> = base
        .iter()
        .zip(&raw)
        .map(|(id, &y)| {
            let cf_norm = if span > 0.0 { (y - min) / span } else { 0.0 };
            (w_cf * cf_norm + w_dpp * rank_weight(dpp_rank[id], k), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(scored.into_iter().map(|(_, id)| id.clone()).collect())
}
