use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RerankError;
use crate::catalog::Catalog;
use crate::seed::stream_rng;
use crate::vocab::{PROFILE_ATTRIBUTES, THEME_ATTRIBUTES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimeUser {
    pub name: String,
    #[serde(default)]
    pub profile: String,
    pub ratings: BTreeMap<String, f64>,
}

/// Ratings of simulated prime users; higher means preferred.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingMatrix {
    pub prime_users: Vec<PrimeUser>,
}

impl RatingMatrix {
    pub fn validate(&self) -> Result<(), RerankError> {
        for u in &self.prime_users {
            if u.ratings.len() < 2 {
                return Err(RerankError::Ratings(format!(
                    "prime user {:?} rates fewer than two items",
                    u.name
                )));
            }
            if let Some((id, _)) = u.ratings.iter().find(|(_, v)| !v.is_finite()) {
                return Err(RerankError::Ratings(format!(
                    "prime user {:?} has non-finite rating for {id}",
                    u.name
                )));
            }
        }
        Ok(())
    }

    /// Converts a best-first ranking into scores: rank r of n becomes n + 1 - r.
    pub fn scores_from_ranking(ranking: &[String]) -> BTreeMap<String, f64> {
        let n = ranking.len();
        ranking
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), (n - i) as f64))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ratings serialize")
    }
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingMatrix, RerankError> {
    let m: RatingMatrix = serde_json::from_str(&fs::read_to_string(path)?)?;
    m.validate()?;
    Ok(m)
}

/// Simulated prime users. Each favours a couple of attributes and ranks a
/// sample of catalog items, preferred items first.
pub fn generate_ratings(catalog: &Catalog, users: usize, per_user: usize, seed: u64) -> RatingMatrix {
    let mut rng = stream_rng(seed, "ratings");
    let likes: Vec<&str> = PROFILE_ATTRIBUTES.iter().chain(THEME_ATTRIBUTES).copied().collect();
    let per_user = per_user.min(catalog.len());
    let prime_users = (0..users)
        .map(|u| {
            let liked: Vec<&str> = likes.choose_multiple(&mut rng, 2).copied().collect();
            let mut sample: Vec<usize> = (0..catalog.len()).collect();
            sample.shuffle(&mut rng);
            sample.truncate(per_user);
            let mut scored: Vec<(f64, &str)> = sample
                .iter()
                .map(|&i| {
                    let item = catalog.item_at(i);
                    let affinity = liked.iter().filter(|a| item.has_attribute(a)).count() as f64;
                    (affinity + rng.random::<f64>(), item.id.as_str())
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let ranking: Vec<String> = scored.into_iter().map(|(_, id)| id.to_string()).collect();
            PrimeUser {
                name: format!("prime-{u:02}"),
                profile: format!("likes {}", liked.join(" and ")),
                ratings: RatingMatrix::scores_from_ranking(&ranking),
            }
        })
        .collect();
    RatingMatrix { prime_users }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{generate_catalog, CatalogSpec};

    #[test]
    fn ranking_conversion() {
        let ranking: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let s = RatingMatrix::scores_from_ranking(&ranking);
        assert_eq!(s["x"], 3.0);
        assert_eq!(s["z"], 1.0);
    }

    #[test]
    fn generated_is_valid_and_round_trips() {
        let cat = generate_catalog(&CatalogSpec { items: 300, seed: 2 });
        let m = generate_ratings(&cat, 30, 50, 4);
        assert_eq!(m.prime_users.len(), 30);
        m.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        fs::write(&p, m.to_json()).unwrap();
        assert_eq!(load_ratings(&p).unwrap(), m);
    }

    #[test]
    fn rejects_single_rating() {
        let m = RatingMatrix {
            prime_users: vec![PrimeUser {
                name: "a".into(),
                profile: String::new(),
                ratings: [("x".to_string(), 1.0)].into(),
            }],
        };
        assert!(m.validate().is_err());
    }
}
