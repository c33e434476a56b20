use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{attribute_key, Item};
use crate::tasks::{required_attributes, TaskError, TaskSpec, UserProfile};

/// What a purchase is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub attributes: BTreeSet<String>,
    pub goal_options: BTreeMap<String, String>,
    pub price_cap: Option<f64>,
    pub goal_category: String,
}

/// Builds the goal for a task. With `ablate_hi` only the attributes stated
/// in the instruction count; profile and history-inferred ones are dropped.
pub fn resolve_goal(
    task: &TaskSpec,
    profile: &UserProfile,
    history: &[String],
    vocab: &BTreeSet<String>,
    ablate_hi: bool,
) -> Result<GoalSpec, TaskError> {
    let attributes = if ablate_hi {
        task.explicit_attributes.clone()
    } else {
        required_attributes(task, profile, history, vocab)?
    };
    Ok(GoalSpec {
        attributes,
        goal_options: task.goal_options.clone(),
        price_cap: task.price_cap,
        goal_category: task.goal_category.clone(),
    })
}

/// `r_type * (attrs matched + options matched + price ok) / (|attrs| + |options| + 1)`
/// with `r_type` 1 on an exact category match and 0.1 otherwise.
pub fn compute_reward(item: &Item, chosen: &BTreeMap<String, String>, goal: &GoalSpec) -> f64 {
    let item_keys: BTreeSet<String> = item.attributes.iter().map(|a| attribute_key(a)).collect();
    let attr_hits = goal
        .attributes
        .iter()
        .filter(|a| item_keys.contains(&attribute_key(a)))
        .count();
    let opt_hits = goal
        .goal_options
        .iter()
        .filter(|(k, v)| chosen.get(*k) == Some(*v))
        .count();
    let price_ok = goal.price_cap.is_none_or(|cap| item.price <= cap) as usize;
    let r_type = if item.category == goal.goal_category { 1.0 } else { 0.1 };
    let total = goal.attributes.len() + goal.goal_options.len() + 1;
    r_type * (attr_hits + opt_hits + price_ok) as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item() -> Item {
        Item {
            id: "x".into(),
            title: "t".into(),
            description: String::new(),
            features: vec![],
            reviews: vec![],
            price: 20.0,
            options: [("color".to_string(), vec!["red".to_string(), "blue".to_string()])].into(),
            attributes: ["cruelty-free".to_string(), "sensitive skin".to_string()].into(),
            category: "toner".into(),
        }
    }

    fn goal(attrs: &[&str]) -> GoalSpec {
        GoalSpec {
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
            goal_options: [("color".to_string(), "red".to_string())].into(),
            price_cap: Some(30.0),
            goal_category: "toner".into(),
        }
    }

    fn red() -> BTreeMap<String, String> {
        [("color".to_string(), "red".to_string())].into()
    }

    #[test]
    fn full_match_is_one() {
        assert_eq!(compute_reward(&item(), &red(), &goal(&["cruelty free", "sensitive skin"])), 1.0);
    }

    #[test]
    fn partial_attribute_match() {
        assert_eq!(compute_reward(&item(), &red(), &goal(&["sensitive skin", "vegan"])), 0.75);
    }

    #[test]
    fn category_mismatch() {
        let mut g = goal(&["cruelty free", "sensitive skin"]);
        g.goal_category = "shampoo".into();
        assert!((compute_reward(&item(), &red(), &g) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn price_and_options() {
        let mut g = goal(&["sensitive skin"]);
        g.price_cap = Some(10.0);
        // attr 1 + option 0 + price 0 over 3
        assert!((compute_reward(&item(), &BTreeMap::new(), &g) - 1.0 / 3.0).abs() < 1e-15);
    }
}
