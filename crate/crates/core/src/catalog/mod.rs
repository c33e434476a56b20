//! Item catalog: JSON Lines loading, validation and lookup.
//!
//! The catalog is immutable after load and is shared read-only by every
//! session, index and generator in the crate.

mod synth;

pub use synth::{generate_catalog, CatalogSpec};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed item: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate item id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: empty item id")]
    EmptyId { line: usize },
    #[error("line {line}: invalid price {price}")]
    InvalidPrice { line: usize, price: f64 },
    #[error("line {line}: option {option:?} has no values")]
    EmptyOption { line: usize, option: String },
}

/// A purchasable item. `attributes` are the hidden attributes used by reward
/// computation; they are stored in normalized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: String,
    pub title: String,
    pub description: String,
    pub features: Vec<String>,
    pub reviews: Vec<String>,
    pub price: f64,
    pub options: BTreeMap<String, Vec<String>>,
    pub attributes: BTreeSet<String>,
    pub category: String,
}

impl Item {
    /// True when the item carries `attribute`, comparing by [`attribute_key`].
    pub fn has_attribute(&self, attribute: &str) -> bool {
        let key = attribute_key(attribute);
        self.attributes.iter().any(|a| attribute_key(a) == key)
    }

    /// Option name owning `value`, if any.
    pub fn option_for_value(&self, value: &str) -> Option<&str> {
        self.options
            .iter()
            .find(|(_, values)| values.iter().any(|v| v == value))
            .map(|(name, _)| name.as_str())
    }

    fn normalize(&mut self) {
        self.attributes = self
            .attributes
            .iter()
            .map(|a| normalize_attribute(a))
            .filter(|a| !a.is_empty())
            .collect();
    }
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_attribute(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Matching key for an attribute: normalized form with `-` treated as a
/// space, so "cruelty-free" and "Cruelty Free" compare equal.
pub fn attribute_key(raw: &str) -> String {
    normalize_attribute(&raw.replace('-', " "))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    items: Vec<Item>,
    by_id: HashMap<String, usize>,
}

impl Catalog {
    /// Builds a catalog from already-parsed items, validating and
    /// normalizing them. Line numbers in errors are 1-based item positions.
    pub fn from_items(items: Vec<Item>) -> Result<Self, CatalogError> {
        let mut catalog = Catalog::default();
        for (idx, item) in items.into_iter().enumerate() {
            catalog.push(idx + 1, item)?;
        }
        Ok(catalog)
    }

    fn push(&mut self, line: usize, mut item: Item) -> Result<(), CatalogError> {
        if item.id.trim().is_empty() {
            return Err(CatalogError::EmptyId { line });
        }
        if !(item.price.is_finite() && item.price >= 0.0) {
            return Err(CatalogError::InvalidPrice { line, price: item.price });
        }
        if let Some((name, _)) = item.options.iter().find(|(_, v)| v.is_empty()) {
            return Err(CatalogError::EmptyOption { line, option: name.clone() });
        }
        if self.by_id.contains_key(&item.id) {
            return Err(CatalogError::DuplicateId { line, id: item.id });
        }
        item.normalize();
        self.by_id.insert(item.id.clone(), self.items.len());
        self.items.push(item);
        Ok(())
    }

    /// Parses JSON Lines text. Blank lines are skipped but still counted.
    pub fn from_jsonl(text: &str) -> Result<Self, CatalogError> {
        let mut catalog = Catalog::default();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line = idx + 1;
            let item: Item = serde_json::from_str(raw)
                .map_err(|source| CatalogError::Malformed { line, source })?;
            catalog.push(line, item)?;
        }
        Ok(catalog)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("item serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CatalogError> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn ordinal(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn item_at(&self, ordinal: usize) -> &Item {
        &self.items[ordinal]
    }

    /// Every distinct attribute in the catalog, normalized.
    pub fn attribute_vocabulary(&self) -> BTreeSet<String> {
        self.items
            .iter()
            .flat_map(|i| i.attributes.iter().cloned())
            .collect()
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let text = fs::read_to_string(path)?;
    Catalog::from_jsonl(&text)
}

pub fn get_item<'a>(catalog: &'a Catalog, id: &str) -> Option<&'a Item> {
    catalog.get(id)
}
