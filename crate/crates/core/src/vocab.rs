//! Shared vocabulary for the synthetic catalog and the task generator.
//!
//! Attribute phrases never occur inside category names, option values or
//! profile sentences, so mention counting by substring stays exact.

pub struct CategoryDef {
    pub name: &'static str,
    pub group: Group,
    pub base_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Beauty,
    Home,
    Apparel,
    Electronics,
    Grocery,
}

pub const CATEGORIES: &[CategoryDef] = &[
    CategoryDef { name: "toner", group: Group::Beauty, base_price: 18.0 },
    CategoryDef { name: "shampoo", group: Group::Beauty, base_price: 14.0 },
    CategoryDef { name: "body wash", group: Group::Beauty, base_price: 12.0 },
    CategoryDef { name: "lip balm", group: Group::Beauty, base_price: 6.0 },
    CategoryDef { name: "hand cream", group: Group::Beauty, base_price: 11.0 },
    CategoryDef { name: "soap bar", group: Group::Beauty, base_price: 8.0 },
    CategoryDef { name: "nightstand", group: Group::Home, base_price: 120.0 },
    CategoryDef { name: "bookshelf", group: Group::Home, base_price: 150.0 },
    CategoryDef { name: "desk lamp", group: Group::Home, base_price: 40.0 },
    CategoryDef { name: "curtain", group: Group::Home, base_price: 35.0 },
    CategoryDef { name: "face towel", group: Group::Home, base_price: 16.0 },
    CategoryDef { name: "pants", group: Group::Apparel, base_price: 45.0 },
    CategoryDef { name: "t-shirt", group: Group::Apparel, base_price: 20.0 },
    CategoryDef { name: "sneakers", group: Group::Apparel, base_price: 70.0 },
    CategoryDef { name: "socks", group: Group::Apparel, base_price: 12.0 },
    CategoryDef { name: "headphones", group: Group::Electronics, base_price: 80.0 },
    CategoryDef { name: "phone case", group: Group::Electronics, base_price: 18.0 },
    CategoryDef { name: "charger", group: Group::Electronics, base_price: 25.0 },
    CategoryDef { name: "speaker", group: Group::Electronics, base_price: 60.0 },
    CategoryDef { name: "coffee", group: Group::Grocery, base_price: 15.0 },
    CategoryDef { name: "tea", group: Group::Grocery, base_price: 9.0 },
    CategoryDef { name: "snack bar", group: Group::Grocery, base_price: 22.0 },
];

/// Attributes tied to a user's basic preference.
pub const PROFILE_ATTRIBUTES: &[&str] = &[
    "cruelty-free",
    "eco friendly",
    "vegan",
    "organic",
    "non toxic",
    "fragrance free",
    "hypoallergenic",
    "recyclable packaging",
    "fair trade",
    "handmade",
];

/// Cross-category attributes that recent instruction streams revolve around.
pub const THEME_ATTRIBUTES: &[&str] = &[
    "sensitive skin",
    "long lasting",
    "lightweight",
    "travel size",
    "gift ready",
    "water resistant",
];

pub fn group_attributes(group: Group) -> &'static [&'static str] {
    match group {
        Group::Beauty => &[
            "paraben free",
            "sulfate free",
            "dry skin",
            "anti aging",
            "oil free",
            "natural ingredients",
        ],
        Group::Home => &[
            "easy install",
            "easy assembly",
            "solid wood",
            "space saving",
            "machine washable",
            "blackout lining",
        ],
        Group::Apparel => &[
            "breathable",
            "stretch fit",
            "moisture wicking",
            "slip resistant",
            "quick dry",
            "machine washable",
        ],
        Group::Electronics => &[
            "wireless",
            "fast charging",
            "noise cancelling",
            "shockproof",
            "type c port",
            "long battery life",
        ],
        Group::Grocery => &[
            "gluten free",
            "sugar free",
            "dairy free",
            "low sodium",
            "non gmo",
            "caffeine free",
        ],
    }
}

pub fn group_options(group: Group) -> &'static [(&'static str, &'static [&'static str])] {
    match group {
        Group::Beauty => &[
            ("size", &["2 fl oz", "3.4 fl oz", "8 fl oz", "16 fl oz"]),
            ("scent", &["unscented", "lavender", "grapefruit", "coconut", "tea tree"]),
        ],
        Group::Home => &[
            ("color", &["white", "black", "grey", "walnut", "oak"]),
            ("size", &["small", "medium", "large"]),
        ],
        Group::Apparel => &[
            ("color", &["grey", "navy", "black", "olive", "red"]),
            ("size", &["small", "medium", "large", "x-large"]),
        ],
        Group::Electronics => &[("color", &["black", "white", "blue", "red"])],
        Group::Grocery => &[
            ("pack", &["1 pack", "2 pack", "6 pack", "12 pack"]),
            ("flavor", &["original", "vanilla", "chocolate", "mint"]),
        ],
    }
}

pub const BRANDS: &[&str] = &[
    "Lumina", "Northwind", "Everleaf", "Brightwell", "Halcyon", "Kestrel", "Moss & Co", "Juniper",
    "Solstice", "Tidewater", "Amberly", "Foxglove",
];

pub const DESCRIPTORS: &[&str] = &[
    "everyday", "classic", "premium", "daily", "essential", "signature", "modern", "simple",
];

pub const REVIEWS: &[&str] = &[
    "Works exactly as described.",
    "Good value for the price.",
    "Arrived quickly and well packed.",
    "Would buy again.",
    "Decent, but the packaging could be better.",
    "My second time ordering this one.",
];

/// Basic preference sentence per profile attribute, parallel to
/// [`PROFILE_ATTRIBUTES`].
pub const PROFILE_SENTENCES: &[&str] = &[
    "I cannot care enough for the cute creatures in this world.",
    "I try to leave as small a footprint on the planet as I can.",
    "I keep every animal product out of my life.",
    "I only trust what was grown without synthetic chemicals.",
    "My toddler puts everything within reach into their mouth.",
    "Strong scents give me headaches.",
    "My allergies flare up at the slightest provocation.",
    "I hate seeing boxes and wrappers pile up in landfills.",
    "I want the people who make my things to be paid properly.",
    "I love things made by skilled hands rather than machines.",
];

pub const HISTORY_MARKER: &str = "Based on my purchase preference from history";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::attribute_key;

    fn all_attributes() -> Vec<&'static str> {
        let mut all: Vec<&str> = PROFILE_ATTRIBUTES.iter().chain(THEME_ATTRIBUTES).copied().collect();
        for g in [Group::Beauty, Group::Home, Group::Apparel, Group::Electronics, Group::Grocery] {
            all.extend(group_attributes(g));
        }
        all
    }

    #[test]
    fn attribute_phrases_do_not_leak_into_other_text() {
        let mut texts: Vec<String> = PROFILE_SENTENCES.iter().map(|s| s.to_string()).collect();
        texts.extend(CATEGORIES.iter().map(|c| c.name.to_string()));
        texts.push(HISTORY_MARKER.to_string());
        for g in [Group::Beauty, Group::Home, Group::Apparel, Group::Electronics, Group::Grocery] {
            for (name, values) in group_options(g) {
                texts.push(name.to_string());
                texts.extend(values.iter().map(|v| v.to_string()));
            }
        }
        for attr in all_attributes() {
            let key = attribute_key(attr);
            for text in &texts {
                assert!(!attribute_key(text).contains(&key), "{attr:?} inside {text:?}");
            }
        }
    }

    #[test]
    fn attributes_do_not_contain_each_other() {
        let attrs = all_attributes();
        for a in &attrs {
            for b in &attrs {
                let (ka, kb) = (attribute_key(a), attribute_key(b));
                assert!(ka == kb || !ka.contains(&kb), "{a:?} contains {b:?}");
            }
        }
    }

    #[test]
    fn profiles_parallel() {
        assert_eq!(PROFILE_ATTRIBUTES.len(), PROFILE_SENTENCES.len());
        assert_eq!(PROFILE_ATTRIBUTES.len(), 10);
    }
}
