use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUY_NOW: &str = "Buy Now";
pub const NEXT_PAGE: &str = "Next >";
pub const PREV_PAGE: &str = "< Prev";
pub const DESCRIPTIONS: &str = "Descriptions";
pub const FEATURES: &str = "Features";
pub const REVIEWS: &str = "Reviews";
pub const BACK_TO_SEARCH: &str = "Back to Search";
pub const INSTRUCTION_HISTORY: &str = "Instruction History";

/// Placeholders listed in `valid_actions` for free-text actions.
pub const SEARCH_TEMPLATE: &str = "search[<query>]";
pub const THINK_TEMPLATE: &str = "think[<thought>]";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("ill-formed action {0:?}")]
pub struct ParseActionError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Action {
    Search(String),
    Click(String),
    Think(String),
}

impl Action {
    pub fn search(q: impl Into<String>) -> Self {
        Action::Search(q.into())
    }

    pub fn click(t: impl Into<String>) -> Self {
        Action::Click(t.into())
    }

    pub fn is_click(&self, target: &str) -> bool {
        matches!(self, Action::Click(t) if t == target)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Search(q) => write!(f, "search[{q}]"),
            Action::Click(t) => write!(f, "click[{t}]"),
            Action::Think(t) => write!(f, "think[{t}]"),
        }
    }
}

impl FromStr for Action {
    type Err = ParseActionError;

    /// Exact bracket grammar: `search[q]`, `click[target]`, `think[text]`.
    /// Search queries and click targets must be non-blank.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseActionError(s.to_string());
        let s = s.trim();
        let open = s.find('[').ok_or_else(err)?;
        if !s.ends_with(']') {
            return Err(err());
        }
        let body = &s[open + 1..s.len() - 1];
        match &s[..open] {
            "search" if !body.trim().is_empty() => Ok(Action::Search(body.trim().to_string())),
            "click" if !body.trim().is_empty() => Ok(Action::Click(body.trim().to_string())),
            "think" => Ok(Action::Think(body.to_string())),
            _ => Err(err()),
        }
    }
}

impl TryFrom<String> for Action {
    type Error = ParseActionError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Action> for String {
    fn from(a: Action) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_canonical_forms() {
        assert_eq!("search[red shirt]".parse(), Ok(Action::search("red shirt")));
        assert_eq!("click[Next >]".parse(), Ok(Action::click(NEXT_PAGE)));
        assert_eq!("click[< Prev]".parse(), Ok(Action::click(PREV_PAGE)));
        assert_eq!("think[]".parse(), Ok(Action::Think(String::new())));
    }

    #[test]
    fn rejects_ill_formed() {
        for bad in ["search red", "search[]", "click[ ]", "buy[x]", "click[x", "", "[x]"] {
            assert!(bad.parse::<Action>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(kind in 0u8..3, body in "[a-zA-Z0-9 <>&.,-]{1,30}") {
            prop_assume!(!body.trim().is_empty());
            let a = match kind {
                0 => Action::Search(body.trim().to_string()),
                1 => Action::Click(body.trim().to_string()),
                _ => Action::Think(body.clone()),
            };
            prop_assert_eq!(a.to_string().parse::<Action>().unwrap(), a);
        }
    }
}
