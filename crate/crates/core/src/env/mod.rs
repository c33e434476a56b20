//! The interactive shopping environment.
//!
//! An [`Environment`] holds the read-only catalog, index and prime-user
//! ratings; a [`Session`] is one episode of one user's task. Sessions are
//! single-writer and own their cost ledger.
//!
//! Reranking inside an episode uses the CTR profile as it stood at reset.
//! Clicks and impressions of the episode are recorded on the live profile,
//! which the caller carries into the user's next task.

mod action;
mod observation;
mod reward;

pub use action::*;
pub use observation::{Observation, PageView, ShownItem, Tab};
pub use reward::{compute_reward, resolve_goal, GoalSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::cost::{charge_action, ActionCharge, CostLedger};
use crate::rerank::{
    blend_rerank, cf_scores, dpp_map_select, dpp_quality_scores, item_similarity, CtrProfile,
    RatingMatrix, RerankError, DEFAULT_W_CF, DEFAULT_W_DPP,
};
use crate::search::{InvertedIndex, SearchError};
use crate::tasks::{InstructionGroup, TaskError, TaskSpec, UserProfile};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished")]
    Finished,
    #[error("task index {index} out of range for user {user}")]
    NoSuchTask { user: u32, index: usize },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub page_size: usize,
    pub top_n: usize,
    pub w_cf: f64,
    pub w_dpp: f64,
    pub max_steps: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            page_size: 10,
            top_n: 50,
            w_cf: DEFAULT_W_CF,
            w_dpp: DEFAULT_W_DPP,
            max_steps: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Drop profile and history-inferred attributes from the reward.
    pub ablate_hi: bool,
    /// Disable personalized reranking.
    pub ablate_ed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Purchase {
    pub item_id: String,
    pub options: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Page {
    Search,
    Results { page: usize },
    Item { id: String, tab: Option<Tab>, results_page: usize },
    History { back: Box<Page> },
    Done,
}

#[derive(Debug, Clone)]
pub struct Session {
    user: UserProfile,
    task: TaskSpec,
    history: Vec<String>,
    goal: GoalSpec,
    flags: AblationFlags,
    max_steps: u32,
    step_count: u32,
    candidates: Vec<String>,
    page: Page,
    selected_options: BTreeMap<String, String>,
    ctr: CtrProfile,
    ctr_at_reset: CtrProfile,
    purchased: Option<Purchase>,
    reward: Option<f64>,
    ledger: CostLedger,
}

impl Session {
    pub fn user(&self) -> &UserProfile {
        &self.user
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    /// Privileged goal; only scripted oracles and the harness read this.
    pub fn goal(&self) -> &GoalSpec {
        &self.goal
    }

    pub fn flags(&self) -> AblationFlags {
        self.flags
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn is_done(&self) -> bool {
        self.page == Page::Done
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn purchased(&self) -> Option<&Purchase> {
        self.purchased.as_ref()
    }

    /// Final reward; `None` while the episode runs.
    pub fn reward(&self) -> Option<f64> {
        self.reward
    }

    pub fn ctr(&self) -> &CtrProfile {
        &self.ctr
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut CostLedger {
        &mut self.ledger
    }

    pub fn into_parts(self) -> (CtrProfile, CostLedger) {
        (self.ctr, self.ledger)
    }

    /// Ends the episode without a purchase.
    pub fn abandon(&mut self) {
        if !self.is_done() {
            self.finish(0.0);
        }
    }

    fn finish(&mut self, reward: f64) {
        self.page = Page::Done;
        self.reward = Some(reward);
    }
}

pub struct Environment {
    catalog: Arc<Catalog>,
    index: InvertedIndex,
    ratings: RatingMatrix,
    vocab: BTreeSet<String>,
    config: EnvConfig,
}

impl Environment {
    pub fn new(catalog: Arc<Catalog>, ratings: RatingMatrix, config: EnvConfig) -> Result<Self, EnvError> {
        let index = InvertedIndex::build(&catalog)?;
        let vocab = catalog.attribute_vocabulary();
        Ok(Environment { catalog, index, ratings, vocab, config })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn catalog_arc(&self) -> Arc<Catalog> {
        Arc::clone(&self.catalog)
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Starts an episode for task `task_index` of `group`. `ctr` is the
    /// user's profile carried over from earlier tasks.
    pub fn reset(
        &self,
        group: &InstructionGroup,
        task_index: usize,
        ctr: CtrProfile,
        flags: AblationFlags,
    ) -> Result<(Session, Observation), EnvError> {
        let task = group
            .tasks
            .get(task_index)
            .ok_or(EnvError::NoSuchTask { user: group.user.user_id, index: task_index })?
            .clone();
        let history = group.history_before(task_index);
        let goal = resolve_goal(&task, &group.user, &history, &self.vocab, flags.ablate_hi)?;
        let mut ledger = CostLedger::new();
        charge_action(&mut ledger, ActionCharge::Reset);
        let session = Session {
            user: group.user.clone(),
            task,
            history,
            goal,
            flags,
            max_steps: self.config.max_steps,
            step_count: 0,
            candidates: Vec::new(),
            page: Page::Search,
            selected_options: BTreeMap::new(),
            ctr_at_reset: ctr.clone(),
            ctr,
            purchased: None,
            reward: None,
            ledger,
        };
        let obs = self.observe(&session, false, None);
        Ok((session, obs))
    }

    /// Raw BM25 hits with a positive score, best first.
    pub fn bm25_candidates(&self, query: &str) -> Vec<(String, f64)> {
        self.index
            .search(query, self.config.top_n)
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(o, s)| (self.catalog.item_at(o).id.clone(), s))
            .collect()
    }

    /// Result list for `query`: BM25 top-n, then personalized reranking
    /// unless `ablate_ed` is set.
    pub fn search_candidates(&self, query: &str, ctr: &CtrProfile, ablate_ed: bool) -> Result<Vec<String>, EnvError> {
        let hits = self.bm25_candidates(query);
        let ids: Vec<String> = hits.iter().map(|(id, _)| id.clone()).collect();
        if ablate_ed || ids.len() < 2 {
            return Ok(ids);
        }
        let scores: Vec<f64> = hits.iter().map(|(_, s)| *s).collect();
        let cf = cf_scores(&self.ratings, ctr, &ids);
        let sim = item_similarity(&self.catalog, &ids);
        let dpp_order = dpp_map_select(&ids, &dpp_quality_scores(&scores), &sim, ids.len())?;
        Ok(blend_rerank(&ids, &cf, &dpp_order, self.config.w_cf, self.config.w_dpp)?)
    }

    fn total_pages(&self, session: &Session) -> usize {
        session.candidates.len().div_ceil(self.config.page_size).max(1)
    }

    fn page_items<'a>(&self, session: &'a Session, page: usize) -> &'a [String] {
        let start = ((page - 1) * self.config.page_size).min(session.candidates.len());
        let end = (start + self.config.page_size).min(session.candidates.len());
        &session.candidates[start..end]
    }

    fn record_impressions(&self, session: &mut Session, page: usize) {
        let shown: Vec<String> = self.page_items(session, page).to_vec();
        for id in &shown {
            session.ctr.record_impression(id);
        }
    }

    /// Parses and applies one action. Ill-formed text is an invalid action.
    pub fn step(&self, session: &mut Session, text: &str) -> Result<(Observation, bool), EnvError> {
        match text.parse::<Action>() {
            Ok(action) => self.step_action(session, &action),
            Err(_) => {
                if session.is_done() {
                    return Err(EnvError::Finished);
                }
                Ok(self.apply_invalid(session))
            }
        }
    }

    pub fn step_action(&self, session: &mut Session, action: &Action) -> Result<(Observation, bool), EnvError> {
        if session.is_done() {
            return Err(EnvError::Finished);
        }
        let Some(charge) = self.classify(session, action) else {
            return Ok(self.apply_invalid(session));
        };
        session.step_count += 1;
        charge_action(&mut session.ledger, charge);
        let mut message = None;
        match action {
            Action::Think(_) => message = Some("OK.".to_string()),
            Action::Search(q) => {
                session.candidates = self.search_candidates(q, &session.ctr_at_reset, session.flags.ablate_ed)?;
                session.page = Page::Results { page: 1 };
                self.record_impressions(session, 1);
            }
            Action::Click(target) => self.apply_click(session, target),
        }
        self.enforce_cap(session);
        let done = session.is_done();
        Ok((self.observe(session, false, message), done))
    }

    fn apply_invalid(&self, session: &mut Session) -> (Observation, bool) {
        session.step_count += 1;
        charge_action(&mut session.ledger, ActionCharge::Invalid);
        self.enforce_cap(session);
        let done = session.is_done();
        (self.observe(session, !done, None), done)
    }

    fn enforce_cap(&self, session: &mut Session) {
        if !session.is_done() && session.step_count >= session.max_steps {
            session.finish(0.0);
        }
    }

    /// Cost class of `action` on the current page, or `None` when the
    /// action is not available there.
    fn classify(&self, session: &Session, action: &Action) -> Option<ActionCharge> {
        let target = match action {
            Action::Think(_) => return Some(ActionCharge::Think),
            Action::Search(_) => {
                return matches!(session.page, Page::Search).then_some(ActionCharge::Search)
            }
            Action::Click(t) => t.as_str(),
        };
        let charge = match (&session.page, target) {
            (Page::Done, _) => return None,
            (Page::History { .. }, INSTRUCTION_HISTORY) => return None,
            (_, INSTRUCTION_HISTORY) => ActionCharge::InstructionHistory,
            (Page::Search, BACK_TO_SEARCH) => return None,
            (_, BACK_TO_SEARCH) => ActionCharge::BackToSearch,
            (Page::Results { page }, NEXT_PAGE) if *page < self.total_pages(session) => ActionCharge::NextPage,
            (Page::Results { page }, PREV_PAGE) if *page > 1 => ActionCharge::PrevPage,
            (Page::Item { .. } | Page::History { .. }, PREV_PAGE) => ActionCharge::PrevPage,
            (Page::Item { .. }, DESCRIPTIONS) => ActionCharge::Descriptions,
            (Page::Item { .. }, FEATURES) => ActionCharge::Features,
            (Page::Item { .. }, REVIEWS) => ActionCharge::Reviews,
            (Page::Item { .. }, BUY_NOW) => ActionCharge::BuyNow,
            (Page::Results { page }, id) if self.page_items(session, *page).iter().any(|c| c == id) => {
                ActionCharge::OtherClick
            }
            (Page::Item { id, .. }, value) if self.catalog.get(id)?.option_for_value(value).is_some() => {
                ActionCharge::OtherClick
            }
            _ => return None,
        };
        Some(charge)
    }

    fn apply_click(&self, session: &mut Session, target: &str) {
        let current = session.page.clone();
        match (current, target) {
            (page, INSTRUCTION_HISTORY) => session.page = Page::History { back: Box::new(page) },
            (_, BACK_TO_SEARCH) => {
                session.page = Page::Search;
                session.candidates.clear();
            }
            (Page::Results { page }, NEXT_PAGE) => self.show_results(session, page + 1),
            (Page::Results { page }, PREV_PAGE) => self.show_results(session, page - 1),
            (Page::Item { results_page, .. }, PREV_PAGE) => self.show_results(session, results_page),
            (Page::History { back }, PREV_PAGE) => match *back {
                Page::Results { page } => self.show_results(session, page),
                other => session.page = other,
            },
            (Page::Item { id, results_page, .. }, BUY_NOW) => {
                let item = self.catalog.get(&id).expect("item page shows a catalog item");
                let reward = compute_reward(item, &session.selected_options, &session.goal);
                session.purchased = Some(Purchase { item_id: id, options: session.selected_options.clone() });
                let _ = results_page;
                session.finish(reward);
            }
            (Page::Item { id, results_page, .. }, tab @ (DESCRIPTIONS | FEATURES | REVIEWS)) => {
                let tab = match tab {
                    DESCRIPTIONS => Tab::Descriptions,
                    FEATURES => Tab::Features,
                    _ => Tab::Reviews,
                };
                session.page = Page::Item { id, tab: Some(tab), results_page };
            }
            (Page::Item { id, .. }, value) => {
                let item = self.catalog.get(&id).expect("item page shows a catalog item");
                if let Some(name) = item.option_for_value(value) {
                    session.selected_options.insert(name.to_string(), value.to_string());
                }
            }
            (Page::Results { page }, id) => {
                session.ctr.record_click(id);
                session.selected_options.clear();
                session.page = Page::Item { id: id.to_string(), tab: None, results_page: page };
            }
            (other, _) => session.page = other,
        }
    }

    fn show_results(&self, session: &mut Session, page: usize) {
        session.page = Page::Results { page };
        self.record_impressions(session, page);
    }

    fn observe(&self, session: &Session, invalid: bool, message: Option<String>) -> Observation {
        let mut valid = Vec::new();
        let page = match &session.page {
            Page::Search => {
                valid.push(SEARCH_TEMPLATE.to_string());
                PageView::Search
            }
            Page::Results { page } => {
                let total = self.total_pages(session);
                let items: Vec<ShownItem> = self
                    .page_items(session, *page)
                    .iter()
                    .map(|id| {
                        let it = self.catalog.get(id).expect("candidate in catalog");
                        ShownItem { id: id.clone(), title: it.title.clone(), price: it.price }
                    })
                    .collect();
                valid.push(click(BACK_TO_SEARCH));
                if *page < total {
                    valid.push(click(NEXT_PAGE));
                }
                if *page > 1 {
                    valid.push(click(PREV_PAGE));
                }
                valid.extend(items.iter().map(|i| click(&i.id)));
                PageView::Results { page_no: *page, total_pages: total, items }
            }
            Page::Item { id, tab, .. } => {
                let it = self.catalog.get(id).expect("item page shows a catalog item");
                valid.push(click(BACK_TO_SEARCH));
                valid.push(click(PREV_PAGE));
                for t in [DESCRIPTIONS, FEATURES, REVIEWS] {
                    valid.push(click(t));
                }
                for values in it.options.values() {
                    valid.extend(values.iter().map(|v| click(v)));
                }
                valid.push(click(BUY_NOW));
                let tab_text = match tab {
                    Some(Tab::Descriptions) => vec![it.description.clone()],
                    Some(Tab::Features) => it.features.clone(),
                    Some(Tab::Reviews) => it.reviews.clone(),
                    None => Vec::new(),
                };
                PageView::Item {
                    id: id.clone(),
                    title: it.title.clone(),
                    price: it.price,
                    options: it.options.clone(),
                    selected: session.selected_options.clone(),
                    tab: *tab,
                    tab_text,
                }
            }
            Page::History { .. } => {
                valid.push(click(BACK_TO_SEARCH));
                valid.push(click(PREV_PAGE));
                PageView::History { entries: session.history.iter().rev().cloned().collect() }
            }
            Page::Done => PageView::Done { reward: session.reward.unwrap_or(0.0) },
        };
        if !matches!(session.page, Page::Done | Page::History { .. }) {
            valid.push(click(INSTRUCTION_HISTORY));
        }
        if !matches!(session.page, Page::Done) {
            valid.push(THINK_TEMPLATE.to_string());
        }
        Observation {
            page,
            instruction_text: session.task.instruction_text.clone(),
            valid_actions: valid,
            invalid_flag: invalid,
            message,
        }
    }
}

fn click(target: &str) -> String {
    Action::click(target).to_string()
}
