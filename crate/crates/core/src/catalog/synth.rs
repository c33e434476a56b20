//! Seeded synthetic catalog generator.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Catalog, Item};
use crate::seed::stream_rng;
use crate::vocab::{
    group_attributes, group_options, BRANDS, CATEGORIES, DESCRIPTORS, PROFILE_ATTRIBUTES, REVIEWS,
    THEME_ATTRIBUTES,
};

#[derive(Debug, Clone, Copy)]
pub struct CatalogSpec {
    pub items: usize,
    pub seed: u64,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        CatalogSpec { items: 2000, seed: 0 }
    }
}

const PROFILE_RATE: f64 = 0.3;
const THEME_RATE: f64 = 0.3;

/// Generates a catalog with categories assigned round-robin so every
/// category is populated evenly. Every title carries a unique model code.
pub fn generate_catalog(spec: &CatalogSpec) -> Catalog {
    let mut rng = stream_rng(spec.seed, "catalog");
    let mut ids = HashSet::new();
    let mut codes = HashSet::new();
    let mut items = Vec::with_capacity(spec.items);
    for n in 0..spec.items {
        let cat = &CATEGORIES[n % CATEGORIES.len()];
        let id = unique(&mut rng, &mut ids, |r| format!("B0{}", token(r, 8, true)));
        let code = unique(&mut rng, &mut codes, model_code);

        let mut attributes = BTreeSet::new();
        for a in PROFILE_ATTRIBUTES {
            if rng.random_bool(PROFILE_RATE) {
                attributes.insert(a.to_string());
            }
        }
        for a in THEME_ATTRIBUTES {
            if rng.random_bool(THEME_RATE) {
                attributes.insert(a.to_string());
            }
        }
        let pool = group_attributes(cat.group);
        let k = rng.random_range(1..=3);
        for a in pool.choose_multiple(&mut rng, k) {
            attributes.insert(a.to_string());
        }

        let mut options = BTreeMap::new();
        for (name, values) in group_options(cat.group) {
            let k = rng.random_range(2..=values.len().min(4));
            let mut picked: Vec<usize> = (0..values.len()).collect();
            picked.shuffle(&mut rng);
            picked.truncate(k);
            picked.sort_unstable();
            options.insert(
                name.to_string(),
                picked.into_iter().map(|i| values[i].to_string()).collect(),
            );
        }

        let brand = BRANDS.choose(&mut rng).unwrap();
        let descriptor = DESCRIPTORS.choose(&mut rng).unwrap();
        let title = format!("{brand} {descriptor} {} {code}", cat.name);
        let attr_list: Vec<&str> = attributes.iter().map(String::as_str).collect();
        let description = format!(
            "This {} from {brand} is {}. Made for {descriptor} use.",
            cat.name,
            attr_list.join(", ")
        );
        let mut features: Vec<String> = attributes.iter().map(|a| format!("{a} design")).collect();
        features.push(format!("{brand} quality guarantee"));
        let n_reviews = rng.random_range(1..=3);
        let reviews = REVIEWS
            .choose_multiple(&mut rng, n_reviews)
            .map(|s| s.to_string())
            .collect();
        let price = (cat.base_price * rng.random_range(0.5..1.8) * 100.0).round() / 100.0;

        items.push(Item {
            id,
            title,
            description,
            features,
            reviews,
            price,
            options,
            attributes,
            category: cat.name.to_string(),
        });
    }
    Catalog::from_items(items).expect("generated catalog is valid")
}

fn unique(
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<String>,
    mut make: impl FnMut(&mut ChaCha8Rng) -> String,
) -> String {
    loop {
        let s = make(rng);
        if seen.insert(s.clone()) {
            return s;
        }
    }
}

fn token(rng: &mut ChaCha8Rng, len: usize, upper: bool) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len)
        .map(|_| {
            let c = ALNUM[rng.random_range(0..ALNUM.len())] as char;
            if upper {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

/// Letter, digit, then four alphanumerics: never an English word.
fn model_code(rng: &mut ChaCha8Rng) -> String {
    let letter = (b'a' + rng.random_range(0..26u8)) as char;
    let digit = (b'0' + rng.random_range(0..10u8)) as char;
    format!("{letter}{digit}{}", token(rng, 4, false))
}
