//! Key-action extraction from finished trajectories.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use super::client::{Message, ModelClient, ModelRequest};
use super::{AgentError, Trajectory};
use crate::cost::{charge_api, CostLedger, PricingTable};
use crate::env::{Action, PageView, BUY_NOW, NEXT_PAGE};

/// Trajectories scoring below this are not mined for key actions.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Analysis {
    pub key_actions: Vec<String>,
    pub meta: String,
}

/// Tags key actions of a whole trajectory in a single invocation.
pub trait Analyzer: Send + Sync {
    fn analyze(&self, trajectory: &Trajectory, ledger: &mut CostLedger) -> Result<Analysis, AgentError>;
}

/// Keeps the last search, the page turns and click that reach the
/// purchased item, the final choice of each option, and Buy Now.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAnalyzer;

impl Analyzer for HeuristicAnalyzer {
    fn analyze(&self, trajectory: &Trajectory, _ledger: &mut CostLedger) -> Result<Analysis, AgentError> {
        Ok(heuristic_key_actions(trajectory))
    }
}

fn heuristic_key_actions(t: &Trajectory) -> Analysis {
    let steps = &t.steps;
    let valid = |i: usize| !steps[i].observation.invalid_flag;
    let parsed: Vec<Option<Action>> = steps.iter().map(|s| s.action.parse().ok()).collect();
    let Some(buy) = (0..steps.len())
        .rev()
        .find(|&i| valid(i) && parsed[i].as_ref().is_some_and(|a| a.is_click(BUY_NOW)))
    else {
        return Analysis::default();
    };
    // The click that opened the purchased item's page.
    let opened = (0..buy).rev().find(|&i| {
        i > 0
            && valid(i)
            && matches!(parsed[i], Some(Action::Click(_)))
            && matches!(steps[i - 1].observation.page, PageView::Results { .. })
            && matches!(steps[i].observation.page, PageView::Item { .. })
    });
    let Some(opened) = opened else { return Analysis::default() };
    let Some(search) = (0..opened)
        .rev()
        .find(|&i| valid(i) && matches!(parsed[i], Some(Action::Search(_))))
    else {
        return Analysis::default();
    };
    let page_no = match steps[opened - 1].observation.page {
        PageView::Results { page_no, .. } => page_no,
        _ => 1,
    };
    let mut keep = vec![search];
    keep.extend(
        (search + 1..opened)
            .filter(|&i| valid(i) && parsed[i].as_ref().is_some_and(|a| a.is_click(NEXT_PAGE)))
            .take(page_no - 1),
    );
    keep.push(opened);
    let option_names: BTreeMap<String, String> = match &steps[opened].observation.page {
        PageView::Item { options, .. } => options
            .iter()
            .flat_map(|(name, values)| values.iter().map(move |v| (v.clone(), name.clone())))
            .collect(),
        _ => BTreeMap::new(),
    };
    let mut last_choice: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, p) in parsed.iter().enumerate().take(buy).skip(opened + 1) {
        if let (true, Some(Action::Click(v))) = (valid(i), p) {
            if let Some(name) = option_names.get(v) {
                last_choice.insert(name, i);
            }
        }
    }
    let mut opts: Vec<usize> = last_choice.into_values().collect();
    opts.sort_unstable();
    keep.extend(opts);
    keep.push(buy);
    let item = match &steps[opened].observation.page {
        PageView::Item { id, .. } => id.clone(),
        _ => String::new(),
    };
    Analysis {
        key_actions: keep.into_iter().map(|i| steps[i].action.clone()).collect(),
        meta: format!("{} found {item} directly; reward {:.2}", steps[search].action, t.reward),
    }
}

/// Model-backed analyzer: one API call per trajectory, charged as
/// "analyzer".
pub struct ModelAnalyzer {
    pub client: Arc<dyn ModelClient>,
    pub pricing: Arc<PricingTable>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

const ANALYZER_PROMPT: &str = "You review a finished web-shopping episode. List the key actions, the ones \
that made the purchase faster or better, copied exactly, one per line and in their original order. \
Finish with one line starting with META: that states a reusable lesson.";

impl Analyzer for ModelAnalyzer {
    fn analyze(&self, trajectory: &Trajectory, ledger: &mut CostLedger) -> Result<Analysis, AgentError> {
        let mut body = format!("Instruction: {}\nReward: {:.4}\nActions:\n", trajectory.instruction, trajectory.reward);
        for (i, s) in trajectory.steps.iter().enumerate() {
            let _ = writeln!(body, "{}. {}{}", i + 1, s.action, if s.observation.invalid_flag { " (invalid)" } else { "" });
        }
        let request = ModelRequest {
            model: self.model.clone(),
            messages: vec![Message::system(ANALYZER_PROMPT), Message::user(body)],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let resp = self.client.complete(&request)?;
        charge_api(ledger, &self.pricing, &self.model, resp.prompt_tokens, resp.completion_tokens, "analyzer")?;
        Ok(parse_analysis(&resp.text))
    }
}

fn parse_analysis(text: &str) -> Analysis {
    let mut out = Analysis::default();
    for line in text.lines() {
        let line = line.trim();
        if let Some(meta) = line.strip_prefix("META:") {
            out.meta = meta.trim().to_string();
            continue;
        }
        // Tolerate list markers such as "3. " or "- ".
        let body = line.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == ' ');
        if let Ok(a) = body.parse::<Action>() {
            out.key_actions.push(a.to_string());
        }
    }
    out
}

/// Key actions of a trajectory, or nothing when it scored below
/// `threshold`. Analyzer output is reduced to an in-order subsequence of
/// the trajectory's actions; anything else is dropped.
pub fn extract_key_actions(
    trajectory: &Trajectory,
    analyzer: &dyn Analyzer,
    threshold: f64,
    ledger: &mut CostLedger,
) -> Result<Analysis, AgentError> {
    if trajectory.reward < threshold {
        return Ok(Analysis::default());
    }
    let raw = analyzer.analyze(trajectory, ledger)?;
    let canon = |s: &str| s.parse::<Action>().map(|a| a.to_string()).unwrap_or_else(|_| s.to_string());
    let actions: Vec<String> = trajectory.steps.iter().map(|s| canon(&s.action)).collect();
    let mut next = 0;
    let mut key_actions = Vec::new();
    for a in raw.key_actions.iter().map(|a| canon(a)) {
        if let Some(off) = actions[next..].iter().position(|x| *x == a) {
            key_actions.push(a);
            next += off + 1;
        }
    }
    Ok(Analysis { key_actions, meta: raw.meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::client::{FileMockClient, MockRule};
    use crate::agent::Step;
    use crate::env::{Observation, ShownItem};

    fn obs(page: PageView) -> Observation {
        Observation { page, instruction_text: "q".into(), valid_actions: vec![], invalid_flag: false, message: None }
    }

    fn results(page_no: usize) -> PageView {
        PageView::Results {
            page_no,
            total_pages: 3,
            items: vec![ShownItem { id: "X".into(), title: "t".into(), price: 1.0 }],
        }
    }

    fn item() -> PageView {
        PageView::Item {
            id: "X".into(),
            title: "t".into(),
            price: 1.0,
            options: [("color".to_string(), vec!["red".to_string(), "blue".to_string()])].into(),
            selected: BTreeMap::new(),
            tab: None,
            tab_text: vec![],
        }
    }

    fn traj(steps: Vec<(&str, PageView)>, reward: f64) -> Trajectory {
        Trajectory {
            instruction: "q".into(),
            steps: steps.into_iter().map(|(a, p)| Step { action: a.into(), observation: obs(p) }).collect(),
            reward,
        }
    }

    fn run(t: &Trajectory, a: &dyn Analyzer) -> Vec<String> {
        extract_key_actions(t, a, DEFAULT_THRESHOLD, &mut CostLedger::new()).unwrap().key_actions
    }

    #[test]
    fn prunes_tab_browsing() {
        let t = traj(
            vec![
                ("search[s]", results(1)),
                ("click[X]", item()),
                ("click[Features]", item()),
                ("click[Buy Now]", PageView::Done { reward: 1.0 }),
            ],
            1.0,
        );
        assert_eq!(run(&t, &HeuristicAnalyzer), ["search[s]", "click[X]", "click[Buy Now]"]);
    }

    #[test]
    fn keeps_page_turns_and_last_option() {
        let t = traj(
            vec![
                ("search[a]", results(1)),
                ("search[s]", results(1)),
                ("click[Next >]", results(2)),
                ("click[< Prev]", results(1)),
                ("click[Next >]", results(2)),
                ("click[Next >]", results(3)),
                ("click[X]", item()),
                ("click[red]", item()),
                ("click[Reviews]", item()),
                ("click[blue]", item()),
                ("click[Buy Now]", PageView::Done { reward: 1.0 }),
            ],
            1.0,
        );
        assert_eq!(
            run(&t, &HeuristicAnalyzer),
            ["search[s]", "click[Next >]", "click[Next >]", "click[X]", "click[blue]", "click[Buy Now]"]
        );
    }

    #[test]
    fn below_threshold_is_empty() {
        let t = traj(vec![("search[s]", results(1)), ("click[X]", item()), ("click[Buy Now]", PageView::Done { reward: 0.3 })], 0.3);
        assert!(run(&t, &HeuristicAnalyzer).is_empty());
    }

    #[test]
    fn hallucinated_actions_dropped() {
        let t = traj(vec![("search[s]", results(1)), ("click[X]", item()), ("click[Buy Now]", PageView::Done { reward: 1.0 })], 1.0);
        let mock = FileMockClient::new(vec![MockRule {
            contains: None,
            text: "1. search[s]\n2. click[Z]\n3. click[X]\n4. click[Buy Now]\nMETA: search the code".into(),
            prompt_tokens: 1000,
            completion_tokens: 100,
        }]);
        let analyzer = ModelAnalyzer {
            client: Arc::new(mock),
            pricing: Arc::new(PricingTable::default().with_model("m", 1.0, 2.0)),
            model: "m".into(),
            temperature: 0.0,
            max_tokens: 128,
        };
        let mut ledger = CostLedger::new();
        let out = extract_key_actions(&t, &analyzer, DEFAULT_THRESHOLD, &mut ledger).unwrap();
        assert_eq!(out.key_actions, ["search[s]", "click[X]", "click[Buy Now]"]);
        assert_eq!(out.meta, "search the code");
        assert_eq!(ledger.count_label("analyzer"), 1);
        assert!((ledger.money_usd() - (1000.0 + 200.0) / 1e6).abs() < 1e-15);
    }

    #[test]
    fn out_of_order_entries_dropped() {
        let t = traj(vec![("search[s]", results(1)), ("click[X]", item()), ("click[Buy Now]", PageView::Done { reward: 1.0 })], 1.0);
        struct Backwards;
        impl Analyzer for Backwards {
            fn analyze(&self, _: &Trajectory, _: &mut CostLedger) -> Result<Analysis, AgentError> {
                Ok(Analysis { key_actions: vec!["click[Buy Now]".into(), "search[s]".into()], meta: String::new() })
            }
        }
        assert_eq!(run(&t, &Backwards), ["click[Buy Now]"]);
    }
}
