//! Policies that choose the next action.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use super::client::{Message, ModelClient, ModelRequest};
use super::memory::Experience;
use super::{AgentError, Trajectory};
use crate::catalog::{Catalog, Item};
use crate::cost::{charge_api, CostLedger, PricingTable};
use crate::env::{
    compute_reward, Action, Environment, GoalSpec, Observation, PageView, BACK_TO_SEARCH, BUY_NOW,
    DESCRIPTIONS, FEATURES, NEXT_PAGE, PREV_PAGE, SEARCH_TEMPLATE, THINK_TEMPLATE,
};
use crate::search::tokenize;
use crate::seed::stream_rng;

/// What a policy sees before each step.
pub struct StepContext<'a> {
    pub env: &'a Environment,
    /// Privileged; only oracle policies may look at it.
    pub goal: &'a GoalSpec,
    pub user: u32,
    pub task: u32,
    pub instruction: &'a str,
    pub observation: &'a Observation,
    pub trajectory: &'a Trajectory,
    pub experience: Option<&'a Experience>,
}

pub trait Policy: Send {
    fn label(&self) -> String;

    /// Called once before the first action of every episode.
    fn begin(&mut self, _ctx: &StepContext) {}

    /// Next action as text. Model-backed policies may return text that
    /// does not parse; the episode loop deals with that.
    fn act(&mut self, ctx: &StepContext, ledger: &mut CostLedger) -> Result<String, AgentError>;
}

fn click(target: &str) -> String {
    Action::click(target).to_string()
}

fn is_valid(obs: &Observation, action: &str) -> bool {
    match action.parse::<Action>() {
        Ok(Action::Search(_)) => obs.valid_actions.iter().any(|a| a == SEARCH_TEMPLATE),
        Ok(Action::Think(_)) => !obs.is_done(),
        Ok(a @ Action::Click(_)) => obs.valid_actions.contains(&a.to_string()),
        Err(_) => false,
    }
}

/// First catalog item that earns a perfect reward under `goal`.
pub fn find_goal_item<'a>(catalog: &'a Catalog, goal: &GoalSpec) -> Option<&'a Item> {
    catalog.items().iter().find(|item| {
        goal.goal_options
            .iter()
            .all(|(k, v)| item.options.get(k).is_some_and(|vs| vs.contains(v)))
            && compute_reward(item, &goal.goal_options, goal) == 1.0
    })
}

/// Reads the goal, searches the rarest word of a matching item's title and
/// buys it with the requested options. With `inspect_tabs` it also opens
/// the description and feature tabs first, like a careful shopper.
#[derive(Debug, Clone, Default)]
pub struct OraclePolicy {
    pub inspect_tabs: bool,
    target: Option<String>,
    query: String,
}

impl OraclePolicy {
    pub fn new(inspect_tabs: bool) -> Self {
        OraclePolicy { inspect_tabs, ..Default::default() }
    }
}

impl Policy for OraclePolicy {
    fn label(&self) -> String {
        if self.inspect_tabs { "oracle-inspect".into() } else { "oracle".into() }
    }

    fn begin(&mut self, ctx: &StepContext) {
        let item = find_goal_item(ctx.env.catalog(), ctx.goal);
        self.target = item.map(|i| i.id.clone());
        self.query = item
            .and_then(|i| {
                let index = ctx.env.index();
                tokenize(&i.title).into_iter().min_by_key(|t| index.doc_freq(t))
            })
            .unwrap_or_default();
    }

    fn act(&mut self, ctx: &StepContext, _ledger: &mut CostLedger) -> Result<String, AgentError> {
        let obs = ctx.observation;
        let Some(target) = self.target.as_deref() else {
            return Ok("think[no item satisfies the request]".into());
        };
        let action = match &obs.page {
            PageView::Search => Action::search(self.query.clone()).to_string(),
            PageView::Results { .. } if obs.shown_ids().contains(&target) => click(target),
            PageView::Results { .. } if is_valid(obs, &click(NEXT_PAGE)) => click(NEXT_PAGE),
            PageView::Results { .. } => click(BACK_TO_SEARCH),
            PageView::Item { id, selected, tab, .. } if id == target => {
                let seen: BTreeSet<&str> = ctx
                    .trajectory
                    .steps
                    .iter()
                    .map(|s| s.action.as_str())
                    .collect();
                let tabs = [DESCRIPTIONS, FEATURES];
                let unread = tabs
                    .iter()
                    .find(|t| !seen.contains(click(t).as_str()) && tab.map(|x| x.label()) != Some(**t));
                let missing = ctx.goal.goal_options.iter().find(|(k, v)| selected.get(*k) != Some(*v));
                match (self.inspect_tabs, unread, missing) {
                    (true, Some(t), _) => click(t),
                    (_, _, Some((_, v))) => click(v),
                    _ => click(BUY_NOW),
                }
            }
            PageView::Item { .. } | PageView::History { .. } => click(PREV_PAGE),
            PageView::Done { .. } => "think[done]".into(),
        };
        Ok(action)
    }
}

/// Uniform choice among the valid actions (thinking excluded). Searches use
/// random words from the catalog titles.
pub struct RandomPolicy {
    seed: u64,
    words: Arc<Vec<String>>,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64, words: Arc<Vec<String>>) -> Self {
        RandomPolicy { seed, words, rng: stream_rng(seed, "policy/random") }
    }

    /// Distinct title tokens of the catalog, sorted.
    pub fn vocabulary(catalog: &Catalog) -> Vec<String> {
        let set: BTreeSet<String> = catalog.items().iter().flat_map(|i| tokenize(&i.title)).collect();
        set.into_iter().collect()
    }
}

impl Policy for RandomPolicy {
    fn label(&self) -> String {
        "random".into()
    }

    fn begin(&mut self, ctx: &StepContext) {
        self.rng = stream_rng(self.seed, &format!("policy/random/user{}/task{}", ctx.user, ctx.task));
    }

    fn act(&mut self, ctx: &StepContext, _ledger: &mut CostLedger) -> Result<String, AgentError> {
        let choices: Vec<&String> = ctx.observation.valid_actions.iter().filter(|a| *a != THINK_TEMPLATE).collect();
        let Some(pick) = choices.choose(&mut self.rng) else {
            return Ok("think[]".into());
        };
        if *pick == SEARCH_TEMPLATE {
            let words: Vec<&str> = self
                .words
                .choose_multiple(&mut self.rng, 2)
                .map(String::as_str)
                .collect();
            let q = if words.is_empty() { "item".to_string() } else { words.join(" ") };
            return Ok(Action::search(q).to_string());
        }
        Ok((*pick).clone())
    }
}

/// Instruction-following baseline: searches the request, opens the top
/// result, picks any option values the instruction names and buys.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrowsePolicy;

impl Policy for BrowsePolicy {
    fn label(&self) -> String {
        "browse".into()
    }

    fn act(&mut self, ctx: &StepContext, _ledger: &mut CostLedger) -> Result<String, AgentError> {
        let obs = ctx.observation;
        let words: BTreeSet<String> = tokenize(ctx.instruction).into_iter().collect();
        let action = match &obs.page {
            PageView::Search => {
                let q = ctx.instruction.split(", and price").next().unwrap_or(ctx.instruction);
                Action::search(q.trim_end_matches('.').to_string()).to_string()
            }
            PageView::Results { items, .. } => match items.first() {
                Some(first) => click(&first.id),
                None => click(BACK_TO_SEARCH),
            },
            PageView::Item { options, selected, .. } => options
                .iter()
                .filter(|(name, _)| !selected.contains_key(*name))
                .find_map(|(_, values)| {
                    values.iter().find(|v| tokenize(v).iter().all(|t| words.contains(t)))
                })
                .map(|v| click(v))
                .unwrap_or_else(|| click(BUY_NOW)),
            PageView::History { .. } => click(PREV_PAGE),
            PageView::Done { .. } => "think[done]".into(),
        };
        Ok(action)
    }
}

/// Emits a fixed action list, then thinks.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    actions: Vec<String>,
    pos: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<String>) -> Self {
        ScriptedPolicy { actions, pos: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn label(&self) -> String {
        "scripted".into()
    }

    fn begin(&mut self, _ctx: &StepContext) {
        self.pos = 0;
    }

    fn act(&mut self, _ctx: &StepContext, _ledger: &mut CostLedger) -> Result<String, AgentError> {
        let a = self.actions.get(self.pos).cloned().unwrap_or_else(|| "think[]".into());
        self.pos += 1;
        Ok(a)
    }
}

const POLICY_PROMPT: &str = "You are shopping on a website for a user. Reply with exactly one action: \
search[<query>] on the search page, click[<button or item id>] for anything listed under Valid actions, \
or think[<thought>] to reason. Reply with the action only.";

/// ReAct-style policy backed by an external model; each step is one API
/// call charged as "policy".
pub struct ModelPolicy {
    pub client: Arc<dyn ModelClient>,
    pub pricing: Arc<PricingTable>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelPolicy {
    pub fn prompt(ctx: &StepContext) -> String {
        let mut p = format!("Instruction: {}\n", ctx.instruction);
        if let Some(exp) = ctx.experience {
            let _ = writeln!(p, "A similar earlier instruction: {}", exp.q);
            let _ = writeln!(p, "Key actions that worked then:");
            for a in &exp.key_actions {
                let _ = writeln!(p, "- {a}");
            }
            if !exp.meta.is_empty() {
                let _ = writeln!(p, "Notes: {}", exp.meta);
            }
        }
        if !ctx.trajectory.steps.is_empty() {
            p.push_str("Your actions so far:\n");
            for s in &ctx.trajectory.steps {
                let _ = writeln!(p, "- {}", s.action);
            }
        }
        p.push_str("Current page:\n");
        p.push_str(&ctx.observation.render());
        p
    }
}

/// First line of a reply that parses as an action, or the trimmed reply.
pub fn extract_action(text: &str) -> String {
    text.lines()
        .map(|l| l.trim().trim_start_matches("Action:").trim())
        .find(|l| l.parse::<Action>().is_ok())
        .map(str::to_string)
        .unwrap_or_else(|| text.trim().to_string())
}

impl Policy for ModelPolicy {
    fn label(&self) -> String {
        format!("model:{}", self.model)
    }

    fn act(&mut self, ctx: &StepContext, ledger: &mut CostLedger) -> Result<String, AgentError> {
        let request = ModelRequest {
            model: self.model.clone(),
            messages: vec![Message::system(POLICY_PROMPT), Message::user(Self::prompt(ctx))],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let resp = self.client.complete(&request)?;
        charge_api(ledger, &self.pricing, &self.model, resp.prompt_tokens, resp.completion_tokens, "policy")?;
        Ok(extract_action(&resp.text))
    }
}

/// Replays the key actions of a retrieved experience when the instruction
/// repeats verbatim, handing control to `inner` as soon as a planned
/// action is not available.
pub struct MemoryPolicy<P> {
    pub inner: P,
    plan: VecDeque<String>,
}

impl<P: Policy> MemoryPolicy<P> {
    pub fn new(inner: P) -> Self {
        MemoryPolicy { inner, plan: VecDeque::new() }
    }
}

impl<P: Policy> Policy for MemoryPolicy<P> {
    fn label(&self) -> String {
        format!("{}+memory", self.inner.label())
    }

    fn begin(&mut self, ctx: &StepContext) {
        self.plan = match ctx.experience {
            Some(e) if e.q == ctx.instruction => e.key_actions.iter().cloned().collect(),
            _ => VecDeque::new(),
        };
        self.inner.begin(ctx);
    }

    fn act(&mut self, ctx: &StepContext, ledger: &mut CostLedger) -> Result<String, AgentError> {
        if let Some(next) = self.plan.pop_front() {
            if is_valid(ctx.observation, &next) {
                return Ok(next);
            }
            self.plan.clear();
        }
        self.inner.act(ctx, ledger)
    }
}

impl Policy for Box<dyn Policy> {
    fn label(&self) -> String {
        (**self).label()
    }

    fn begin(&mut self, ctx: &StepContext) {
        (**self).begin(ctx)
    }

    fn act(&mut self, ctx: &StepContext, ledger: &mut CostLedger) -> Result<String, AgentError> {
        (**self).act(ctx, ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_action_from_reply() {
        assert_eq!(extract_action("Thought: hmm\nAction: click[Buy Now]"), "click[Buy Now]");
        assert_eq!(extract_action("  search[red toner] "), "search[red toner]");
        assert_eq!(extract_action("I will buy it"), "I will buy it");
    }
}
