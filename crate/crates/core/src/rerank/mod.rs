//! Personalized reranking: user-based collaborative filtering over prime-user
//! ratings, greedy DPP MAP selection for diversity, and the weighted blend
//! of the two applied on top of BM25 results.

mod blend;
mod cf;
mod dpp;
mod ratings;
mod similarity;

pub use blend::{blend_rerank, dpp_quality_scores, rank_weight, DEFAULT_W_CF, DEFAULT_W_DPP};
pub use cf::{cf_scores, pearson, CtrProfile, SIMILARITY_SUM_EPS};
pub use dpp::{dpp_greedy_trace, dpp_map_select, DppSelection, DppWorkspace, GAIN_EPS};
pub use ratings::{generate_ratings, load_ratings, PrimeUser, RatingMatrix};
pub use similarity::{item_similarity, similarity_from_tokens, SimilarityMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("K must be at least 1")]
    ZeroK,
    #[error("K = {k} exceeds {n} candidates")]
    KTooLarge { k: usize, n: usize },
    #[error("score for candidate {0} must be positive and finite")]
    NonPositiveScore(usize),
    #[error("similarity matrix is {got}x{got}, expected {expected}x{expected}")]
    Shape { got: usize, expected: usize },
    #[error("blend weights must sum to 1, got {0}")]
    Weights(f64),
    #[error("dpp order is not a permutation of the candidates")]
    NotPermutation,
    #[error("rating matrix: {0}")]
    Ratings(String),
    #[error("failed to read rating matrix: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed rating matrix: {0}")]
    Json(#[from] serde_json::Error),
}
