//! Reward aggregation, success rate, alignment gaps and NDCG.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no records")]
    Empty,
    #[error("reference reward must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("ideal ranking has no positive relevance")]
    ZeroIdeal,
}

/// One finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub user: u32,
    pub task: u32,
    pub category: u8,
    pub reward: f64,
    pub success: bool,
    pub steps: u32,
    pub time_s: f64,
    pub money_usd: f64,
}

/// Success means a perfect reward.
pub fn is_success(reward: f64) -> bool {
    reward == 1.0
}

pub fn success_rate(rewards: &[f64]) -> Result<f64, MetricsError> {
    if rewards.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = rewards.iter().filter(|&&r| is_success(r)).count();
    Ok(100.0 * hits as f64 / rewards.len() as f64)
}

/// Aggregates over records; rewards are on the 0..100 display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub reward_mean: f64,
    pub sr: f64,
    pub time_mean: f64,
    pub money_mean: f64,
}

pub fn aggregate(records: &[TaskRecord]) -> Result<RunAggregate, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as f64;
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    Ok(RunAggregate {
        reward_mean: 100.0 * rewards.iter().sum::<f64>() / n,
        sr: success_rate(&rewards)?,
        time_mean: records.iter().map(|r| r.time_s).sum::<f64>() / n,
        money_mean: records.iter().map(|r| r.money_usd).sum::<f64>() / n,
    })
}

/// Relative reward drop from the full environment to an ablated one, in
/// percent. Negative when the ablated run scores higher.
pub fn alignment_gap(r_full: f64, r_ablated: f64) -> Result<f64, MetricsError> {
    if r_full.is_nan() || r_full <= 0.0 {
        return Err(MetricsError::NonPositiveReference(r_full));
    }
    Ok((r_full - r_ablated) / r_full * 100.0)
}

fn dcg(rel: &[f64], k: usize) -> f64 {
    rel.iter()
        .take(k)
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k with linear gain `rel / log2(i + 1)` (1-based positions).
/// `ideal` is sorted internally.
pub fn ndcg_at_k(ranking: &[f64], ideal: &[f64], k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let mut sorted = ideal.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&sorted, k);
    if idcg <= 0.0 {
        return Err(MetricsError::ZeroIdeal);
    }
    Ok(dcg(ranking, k) / idcg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn success_rate_cases() {
        assert_eq!(success_rate(&[1.0, 0.5, 1.0, 0.0]).unwrap(), 50.0);
        assert_eq!(success_rate(&[1.0, 1.0]).unwrap(), 100.0);
        assert_eq!(success_rate(&[0.2, 0.99]).unwrap(), 0.0);
        assert_eq!(success_rate(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn gap_cases() {
        assert!((alignment_gap(50.3, 44.4).unwrap() - 11.7).abs() < 0.05);
        assert_eq!(alignment_gap(42.0, 42.0).unwrap(), 0.0);
        assert!((alignment_gap(11.8, 19.1).unwrap() + 61.9).abs() < 0.1);
        assert!(alignment_gap(0.0, 1.0).is_err());
    }

    #[test]
    fn ndcg_cases() {
        assert_eq!(ndcg_at_k(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0], 3).unwrap(), 1.0);
        // DCG = 1/log2(3) + 2/2 = 1.6309; IDCG = 2 + 1/log2(3) = 2.6309.
        let v = ndcg_at_k(&[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0], 3).unwrap();
        assert!((v - 0.620).abs() < 0.001);
        assert_eq!(ndcg_at_k(&[5.0, 1.0], &[5.0, 1.0], 1).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&[0.0], &[0.0], 1), Err(MetricsError::ZeroIdeal));
        assert_eq!(ndcg_at_k(&[1.0], &[1.0], 0), Err(MetricsError::ZeroK));
    }

    #[test]
    fn aggregate_scales_rewards() {
        let rec = |reward: f64| TaskRecord {
            user: 0,
            task: 0,
            category: 1,
            reward,
            success: is_success(reward),
            steps: 4,
            time_s: 1.0,
            money_usd: 0.0,
        };
        let a = aggregate(&[rec(1.0), rec(0.5)]).unwrap();
        assert_eq!(a.reward_mean, 75.0);
        assert_eq!(a.sr, 50.0);
    }

    proptest! {
        #[test]
        fn gap_bounded_and_sign(full in 0.01f64..100.0, abl in 0.0f64..100.0) {
            let g = alignment_gap(full, abl).unwrap();
            prop_assert!(g <= 100.0);
            prop_assert_eq!(g < 0.0, abl > full);
        }

        #[test]
        fn sr_is_mean_of_flags(rewards in prop::collection::vec(prop_oneof![Just(1.0), 0.0f64..1.0], 1..50)) {
            let flags = rewards.iter().filter(|&&r| is_success(r)).count() as f64 / rewards.len() as f64;
            prop_assert!((success_rate(&rewards).unwrap() - 100.0 * flags).abs() < 1e-9);
        }

        #[test]
        fn ndcg_invariant_under_equal_relevance_swaps(rel in prop::collection::vec(0u8..3, 2..10), k in 1usize..10) {
            let rel: Vec<f64> = rel.into_iter().map(f64::from).collect();
            prop_assume!(rel.iter().any(|&r| r > 0.0));
            let base = ndcg_at_k(&rel, &rel, k).unwrap();
            // Swapping two equal relevances leaves the relevance sequence as is.
            let mut swapped = rel.clone();
            if let Some(j) = (1..rel.len()).find(|&j| rel[j] == rel[0]) {
                swapped.swap(0, j);
            }
            prop_assert_eq!(ndcg_at_k(&swapped, &rel, k).unwrap(), base);
        }
    }
}
