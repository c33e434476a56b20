//! User profiles and instruction groups.
//!
//! Each user gets 50 instructions in three categories: the basic profile
//! preference applies (30), it does not (10), or it applies together with an
//! extra preference that must be inferred from the recent instruction
//! history (10). The group order is arranged so every history-inferred task
//! sees its target attribute dominate the preceding window by a margin of at
//! least five mentions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{attribute_key, Catalog, Item};
use crate::par::{self, Execution};
use crate::seed::stream_rng;
use crate::vocab::{
    group_attributes, Group, CATEGORIES, HISTORY_MARKER, PROFILE_ATTRIBUTES, PROFILE_SENTENCES,
    THEME_ATTRIBUTES,
};

pub const WINDOW: usize = 10;
pub const MARGIN: usize = 5;
pub const GROUP_SIZE: usize = 50;
pub const CATEGORY_COUNTS: [usize; 3] = [30, 10, 10];

/// Tasks per preference phase; each phase has its own dominant attribute.
const PHASE_LEN: usize = 25;
const PRICE_CAPS: &[f64] = &[10.0, 20.0, 30.0, 40.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0];
const MAX_GROUP_ATTEMPTS: u64 = 20;
const MAX_ITEM_DRAWS: usize = 400;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("catalog too sparse: {0}")]
    SparseCatalog(String),
    #[error("basic attribute {0:?} is not in the catalog vocabulary")]
    UnknownAttribute(String),
    #[error("task {index}: no attribute dominates the instruction window")]
    InferenceFailed { index: usize },
    #[error("invalid suite: {0}")]
    Invalid(String),
    #[error("failed to read suite: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed suite: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub profile_sentence: String,
    pub basic_attribute: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Category {
    ProfileApplies = 1,
    ProfileExempt = 2,
    HistoryInferred = 3,
}

impl Category {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Category {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Category::ProfileApplies),
            2 => Ok(Category::ProfileExempt),
            3 => Ok(Category::HistoryInferred),
            other => Err(format!("category must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<Category> for u8 {
    fn from(c: Category) -> u8 {
        c as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub index: u32,
    pub category: Category,
    pub instruction_text: String,
    pub explicit_attributes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_cap: Option<f64>,
    #[serde(default)]
    pub goal_options: BTreeMap<String, String>,
    pub goal_category: String,
    /// Attribute a history-inferred task expects the window to reveal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inferred_attribute: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionGroup {
    #[serde(flatten)]
    pub user: UserProfile,
    pub tasks: Vec<TaskSpec>,
}

impl InstructionGroup {
    /// Instruction texts strictly before `index`, oldest first.
    pub fn history_before(&self, index: usize) -> Vec<String> {
        self.tasks[..index.min(self.tasks.len())]
            .iter()
            .map(|t| t.instruction_text.clone())
            .collect()
    }

    pub fn category_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for t in &self.tasks {
            h[t.category as usize - 1] += 1;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub users: Vec<InstructionGroup>,
}

impl TaskSuite {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("suite serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let suite: TaskSuite = serde_json::from_str(text)?;
        suite.check_shape()?;
        Ok(suite)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaskError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TaskError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    fn check_shape(&self) -> Result<(), TaskError> {
        for g in &self.users {
            for (i, t) in g.tasks.iter().enumerate() {
                if t.index as usize != i {
                    return Err(TaskError::Invalid(format!(
                        "user {} task {i} carries index {}",
                        g.user.user_id, t.index
                    )));
                }
                if t.category == Category::HistoryInferred
                    && !t.instruction_text.to_lowercase().contains(&HISTORY_MARKER.to_lowercase())
                {
                    return Err(TaskError::Invalid(format!(
                        "user {} task {i} lacks the history marker",
                        g.user.user_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The ten built-in users, one per basic preference.
pub fn default_profiles() -> Vec<UserProfile> {
    PROFILE_ATTRIBUTES
        .iter()
        .zip(PROFILE_SENTENCES)
        .enumerate()
        .map(|(i, (attr, sentence))| UserProfile {
            user_id: i as u32,
            profile_sentence: sentence.to_string(),
            basic_attribute: crate::catalog::normalize_attribute(attr),
        })
        .collect()
}

/// Last [`WINDOW`] entries of `history`.
pub fn window_of(history: &[String]) -> &[String] {
    &history[history.len().saturating_sub(WINDOW)..]
}

/// Number of entries in `window` that mention each attribute, keyed by
/// attribute match key.
pub fn mention_counts(window: &[String], vocab: &BTreeSet<String>) -> BTreeMap<String, usize> {
    let texts: Vec<String> = window.iter().map(|t| attribute_key(t)).collect();
    let mut counts = BTreeMap::new();
    for attr in vocab {
        let key = attribute_key(attr);
        let n = texts.iter().filter(|t| t.contains(&key)).count();
        counts.insert(key, n);
    }
    counts
}

/// The attribute whose mention count beats every other attribute's by at
/// least [`MARGIN`], if one exists. Returned in the vocabulary's spelling.
pub fn infer_window_attribute(window: &[String], vocab: &BTreeSet<String>) -> Option<String> {
    if window.is_empty() {
        return None;
    }
    let counts = mention_counts(window, vocab);
    let (best_key, &best) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
    let runner_up = counts
        .iter()
        .filter(|(k, _)| *k != best_key)
        .map(|(_, &n)| n)
        .max()
        .unwrap_or(0);
    if best == 0 || best < runner_up + MARGIN {
        return None;
    }
    vocab.iter().find(|a| attribute_key(a) == *best_key).cloned()
}

/// Hidden attribute set a purchase must carry for `task`. `history` holds
/// the instruction texts strictly before the task.
pub fn required_attributes(
    task: &TaskSpec,
    profile: &UserProfile,
    history: &[String],
    vocab: &BTreeSet<String>,
) -> Result<BTreeSet<String>, TaskError> {
    let mut set = task.explicit_attributes.clone();
    match task.category {
        Category::ProfileApplies => {
            set.insert(profile.basic_attribute.clone());
        }
        Category::ProfileExempt => {}
        Category::HistoryInferred => {
            set.insert(profile.basic_attribute.clone());
            let inferred = infer_window_attribute(window_of(history), vocab)
                .ok_or(TaskError::InferenceFailed { index: task.index as usize })?;
            set.insert(inferred);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Theme,
    Exempt,
    Inferred,
}

/// Positions 0..50 with a period-5 pattern of three theme tasks then two
/// other tasks; the other slots eligible for history inference are those
/// whose window already holds six mentions of the phase theme.
fn layout(rng: &mut ChaCha8Rng) -> Vec<Slot> {
    let is_theme = |p: usize| p % 5 < 3;
    let eligible: Vec<usize> = (0..GROUP_SIZE)
        .filter(|&p| !is_theme(p))
        .filter(|&p| {
            let phase = p / PHASE_LEN;
            let same = (p.saturating_sub(WINDOW)..p)
                .filter(|&q| is_theme(q) && q / PHASE_LEN == phase)
                .count();
            let other = (p.saturating_sub(WINDOW)..p)
                .filter(|&q| is_theme(q) && q / PHASE_LEN != phase)
                .count();
            same > MARGIN && other + MARGIN <= same
        })
        .collect();
    let mut chosen = eligible;
    chosen.shuffle(rng);
    chosen.truncate(CATEGORY_COUNTS[2]);
    (0..GROUP_SIZE)
        .map(|p| {
            if is_theme(p) {
                Slot::Theme
            } else if chosen.contains(&p) {
                Slot::Inferred
            } else {
                Slot::Exempt
            }
        })
        .collect()
}

fn group_of(category: &str) -> Group {
    CATEGORIES
        .iter()
        .find(|c| c.name == category)
        .map(|c| c.group)
        .unwrap_or(Group::Beauty)
}

struct Draft {
    item_ordinal: usize,
    explicit: String,
}

fn draw(
    rng: &mut ChaCha8Rng,
    catalog: &Catalog,
    must_have: &[&str],
    explicit_from_group: bool,
    avoid: &BTreeSet<String>,
) -> Option<Draft> {
    for _ in 0..MAX_ITEM_DRAWS {
        let ordinal = rng.random_range(0..catalog.len());
        let item = catalog.item_at(ordinal);
        if !must_have.iter().all(|a| item.has_attribute(a)) {
            continue;
        }
        if !explicit_from_group {
            return Some(Draft { item_ordinal: ordinal, explicit: String::new() });
        }
        let pool: Vec<&str> = group_attributes(group_of(&item.category))
            .iter()
            .copied()
            .filter(|a| item.has_attribute(a) && !avoid.contains(&attribute_key(a)))
            .collect();
        if let Some(a) = pool.choose(rng) {
            return Some(Draft { item_ordinal: ordinal, explicit: a.to_string() });
        }
    }
    None
}

fn render_options(opts: &BTreeMap<String, String>) -> String {
    if opts.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = opts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    format!(" with {}", parts.join(" and "))
}

fn build_task(
    rng: &mut ChaCha8Rng,
    index: usize,
    category: Category,
    profile: &UserProfile,
    item: &Item,
    explicit: &str,
    inferred: Option<&str>,
) -> TaskSpec {
    let mut goal_options = BTreeMap::new();
    let n_opts = *[0usize, 1, 1, 2].choose(rng).unwrap();
    let names: Vec<&String> = item.options.keys().collect();
    for name in names.choose_multiple(rng, n_opts.min(names.len())) {
        let value = item.options[*name].choose(rng).unwrap();
        goal_options.insert((*name).clone(), value.clone());
    }
    let price_cap = if rng.random_bool(0.5) {
        PRICE_CAPS.iter().copied().find(|&c| c >= item.price)
    } else {
        None
    };
    let noun = &item.category;
    let request = match category {
        Category::HistoryInferred => {
            format!("{HISTORY_MARKER}, help me to buy {explicit} {noun}")
        }
        _ => match rng.random_range(0..3) {
            0 => format!("i am looking for {noun} that is {explicit}"),
            1 => format!("i need some {explicit} {noun}"),
            _ => format!("please get me {noun} with {explicit}"),
        },
    };
    let price = price_cap.map_or(String::new(), |c| format!(", and price lower than {c:.2} dollars"));
    let instruction_text = format!(
        "{} {request}{}{price}.",
        profile.profile_sentence,
        render_options(&goal_options)
    );
    TaskSpec {
        index: index as u32,
        category,
        instruction_text,
        explicit_attributes: [crate::catalog::normalize_attribute(explicit)].into(),
        price_cap,
        goal_options,
        goal_category: item.category.clone(),
        inferred_attribute: inferred.map(str::to_string),
    }
}

/// Generates the 50-task group for `profile`, deterministic in
/// `(catalog, profile, seed)`.
pub fn generate_group(catalog: &Catalog, profile: &UserProfile, seed: u64) -> Result<InstructionGroup, TaskError> {
    let vocab = catalog.attribute_vocabulary();
    let basic_key = attribute_key(&profile.basic_attribute);
    if !vocab.iter().any(|a| attribute_key(a) == basic_key) {
        return Err(TaskError::UnknownAttribute(profile.basic_attribute.clone()));
    }
    let mut last_err = None;
    for attempt in 0..MAX_GROUP_ATTEMPTS {
        let name = format!("suite/user{}/attempt{attempt}", profile.user_id);
        match try_generate(catalog, profile, &vocab, &mut stream_rng(seed, &name)) {
            Ok(g) => return Ok(g),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn try_generate(
    catalog: &Catalog,
    profile: &UserProfile,
    vocab: &BTreeSet<String>,
    rng: &mut ChaCha8Rng,
) -> Result<InstructionGroup, TaskError> {
    let basic = profile.basic_attribute.as_str();
    let candidate_themes: Vec<&str> = THEME_ATTRIBUTES
        .iter()
        .copied()
        .filter(|t| attribute_key(t) != attribute_key(basic))
        .collect();
    let themes: Vec<&str> = candidate_themes
        .choose_multiple(rng, GROUP_SIZE.div_ceil(PHASE_LEN))
        .copied()
        .collect();
    let slots = layout(rng);
    let mut tasks: Vec<TaskSpec> = Vec::with_capacity(GROUP_SIZE);
    for (p, slot) in slots.iter().enumerate() {
        let theme = themes[p / PHASE_LEN];
        // Explicit attributes of non-theme tasks stay distinct within any window.
        let recent: BTreeSet<String> = tasks[p.saturating_sub(WINDOW - 1)..]
            .iter()
            .filter(|t| t.category != Category::ProfileApplies)
            .flat_map(|t| t.explicit_attributes.iter().map(|a| attribute_key(a)))
            .collect();
        let task = match slot {
            Slot::Theme => {
                let d = draw(rng, catalog, &[basic, theme], false, &recent).ok_or_else(|| {
                    TaskError::SparseCatalog(format!("no item with {basic:?} and {theme:?}"))
                })?;
                let item = catalog.item_at(d.item_ordinal);
                build_task(rng, p, Category::ProfileApplies, profile, item, theme, None)
            }
            Slot::Exempt => {
                let d = draw(rng, catalog, &[], true, &recent)
                    .ok_or_else(|| TaskError::SparseCatalog("no item for a profile-exempt task".into()))?;
                let item = catalog.item_at(d.item_ordinal);
                build_task(rng, p, Category::ProfileExempt, profile, item, &d.explicit, None)
            }
            Slot::Inferred => {
                let d = draw(rng, catalog, &[basic, theme], true, &recent).ok_or_else(|| {
                    TaskError::SparseCatalog(format!("no item with {basic:?}, {theme:?} and a group attribute"))
                })?;
                let item = catalog.item_at(d.item_ordinal);
                let history: Vec<String> = tasks.iter().map(|t| t.instruction_text.clone()).collect();
                let inferred = infer_window_attribute(window_of(&history), vocab);
                if inferred.as_deref().map(attribute_key) != Some(attribute_key(theme)) {
                    return Err(TaskError::InferenceFailed { index: p });
                }
                build_task(rng, p, Category::HistoryInferred, profile, item, &d.explicit, inferred.as_deref())
            }
        };
        tasks.push(task);
    }
    let group = InstructionGroup { user: profile.clone(), tasks };
    debug_assert_eq!(group.category_histogram(), CATEGORY_COUNTS);
    Ok(group)
}

/// Generates groups for every profile; users are independent so this fans
/// out across threads when enabled.
pub fn generate_suite(catalog: &Catalog, profiles: &[UserProfile], seed: u64, exec: Execution) -> Result<TaskSuite, TaskError> {
    let users = par::map(exec, profiles, |p| generate_group(catalog, p, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaskSuite { users })
}
