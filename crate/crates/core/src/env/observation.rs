use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tab {
    Descriptions,
    Features,
    Reviews,
}

impl Tab {
    pub fn label(self) -> &'static str {
        match self {
            Tab::Descriptions => super::DESCRIPTIONS,
            Tab::Features => super::FEATURES,
            Tab::Reviews => super::REVIEWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownItem {
    pub id: String,
    pub title: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PageView {
    Search,
    Results {
        page_no: usize,
        total_pages: usize,
        items: Vec<ShownItem>,
    },
    Item {
        id: String,
        title: String,
        price: f64,
        options: BTreeMap<String, Vec<String>>,
        selected: BTreeMap<String, String>,
        tab: Option<Tab>,
        tab_text: Vec<String>,
    },
    History {
        entries: Vec<String>,
    },
    Done {
        reward: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub page: PageView,
    pub instruction_text: String,
    pub valid_actions: Vec<String>,
    pub invalid_flag: bool,
    /// Short reply replacing the page body, e.g. "OK." after a thought.
    pub message: Option<String>,
}

impl Observation {
    pub fn is_done(&self) -> bool {
        matches!(self.page, PageView::Done { .. })
    }

    /// Item ids visible on a results page.
    pub fn shown_ids(&self) -> Vec<&str> {
        match &self.page {
            PageView::Results { items, .. } => items.iter().map(|i| i.id.as_str()).collect(),
            _ => Vec::new(),
        }
    }

    /// Plain-text rendering; stable byte for byte for a given observation.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(msg) = &self.message {
            out.push_str(msg);
            out.push('\n');
        } else {
            let _ = writeln!(out, "Instruction: {}", self.instruction_text);
            match &self.page {
                PageView::Search => out.push_str("[Search]\n"),
                PageView::Results { page_no, total_pages, items } => {
                    let _ = writeln!(out, "Results page {page_no} of {total_pages}");
                    if items.is_empty() {
                        out.push_str("No results.\n");
                    }
                    for it in items {
                        let _ = writeln!(out, "[{}] {} | ${:.2}", it.id, it.title, it.price);
                    }
                }
                PageView::Item { id, title, price, options, selected, tab, tab_text } => {
                    let _ = writeln!(out, "[{id}] {title}");
                    let _ = writeln!(out, "Price: ${price:.2}");
                    for (name, values) in options {
                        let _ = writeln!(out, "{name}: {}", values.join(" | "));
                    }
                    if selected.is_empty() {
                        out.push_str("Selected: none\n");
                    } else {
                        let sel: Vec<String> = selected.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        let _ = writeln!(out, "Selected: {}", sel.join(", "));
                    }
                    if let Some(tab) = tab {
                        let _ = writeln!(out, "{}:", tab.label());
                        for line in tab_text {
                            let _ = writeln!(out, "- {line}");
                        }
                    }
                }
                PageView::History { entries } => {
                    out.push_str("Instruction history (most recent first):\n");
                    for e in entries {
                        let _ = writeln!(out, "- {e}");
                    }
                }
                PageView::Done { reward } => {
                    let _ = writeln!(out, "Episode finished. Reward: {reward:.4}");
                }
            }
        }
        out.push_str("Valid actions:\n");
        for a in &self.valid_actions {
            out.push_str(a);
            out.push('\n');
        }
        out
    }
}
