//! Episode loop, policies and per-user structured memory.

pub mod analyzer;
pub mod client;
pub mod memory;
pub mod policy;

pub use analyzer::{extract_key_actions, Analysis, Analyzer, HeuristicAnalyzer, ModelAnalyzer, DEFAULT_THRESHOLD};
pub use client::{ClientError, FileMockClient, Message, MockRule, ModelClient, ModelRequest, ModelResponse};
#[cfg(feature = "http")]
pub use client::HttpModelClient;
pub use memory::{retrieve_experience, update_memory, Experience, MemoryEntry, StructuredMemory};
pub use policy::{
    extract_action, find_goal_item, BrowsePolicy, MemoryPolicy, ModelPolicy, OraclePolicy, Policy, RandomPolicy,
    ScriptedPolicy, StepContext,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostLedger};
use crate::env::{AblationFlags, Action, EnvError, Environment, Observation, Session};
use crate::rerank::CtrProfile;
use crate::tasks::InstructionGroup;

/// Consecutive unparseable outputs that end an episode.
pub const MAX_PARSE_FAILURES: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: String,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instruction: String,
    pub steps: Vec<Step>,
    pub reward: f64,
}

impl Trajectory {
    pub fn actions(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.action.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub reward: f64,
    pub experience: Option<Experience>,
    pub aborted: bool,
}

/// Drives `policy` on a freshly reset session until it finishes. When
/// `memory` is given, experience is retrieved once before the first step.
pub fn run_episode(
    env: &Environment,
    session: &mut Session,
    first: Observation,
    policy: &mut dyn Policy,
    memory: Option<&StructuredMemory>,
) -> Result<Episode, AgentError> {
    let instruction = session.task().instruction_text.clone();
    let goal = session.goal().clone();
    let (user, task) = (session.user().user_id, session.task().index);
    let experience = memory.and_then(|m| retrieve_experience(m, &instruction));
    let mut trajectory = Trajectory { instruction: instruction.clone(), steps: Vec::new(), reward: 0.0 };
    let mut observation = first;
    let mut failures = 0;
    let mut aborted = false;
    let mut started = false;
    while !session.is_done() {
        let ctx = StepContext {
            env,
            goal: &goal,
            user,
            task,
            instruction: &instruction,
            observation: &observation,
            trajectory: &trajectory,
            experience: experience.as_ref(),
        };
        if !started {
            policy.begin(&ctx);
            started = true;
        }
        let text = policy.act(&ctx, session.ledger_mut())?;
        failures = if text.parse::<Action>().is_ok() { 0 } else { failures + 1 };
        let (next, _) = env.step(session, &text)?;
        trajectory.steps.push(Step { action: text, observation: next.clone() });
        observation = next;
        if failures >= MAX_PARSE_FAILURES && !session.is_done() {
            session.abandon();
            aborted = true;
        }
    }
    let reward = session.reward().unwrap_or(0.0);
    trajectory.reward = reward;
    Ok(Episode { trajectory, reward, experience, aborted })
}

/// Mines a finished episode and stores the result. Returns whether memory
/// changed.
pub fn learn(
    memory: &mut StructuredMemory,
    episode: &Episode,
    analyzer: &dyn Analyzer,
    threshold: f64,
    ledger: &mut CostLedger,
) -> Result<bool, AgentError> {
    let analysis = extract_key_actions(&episode.trajectory, analyzer, threshold, ledger)?;
    Ok(update_memory(
        memory,
        &episode.trajectory.instruction,
        analysis.key_actions,
        &analysis.meta,
        episode.reward,
        episode.experience.as_ref().map(|e| e.index),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// Every action was accepted and the last one ended the episode.
    pub valid: bool,
    pub reward: Option<f64>,
}

/// Replays `actions` on a fresh session of the given task.
pub fn replay_actions(
    env: &Environment,
    group: &InstructionGroup,
    task_index: usize,
    ctr: CtrProfile,
    flags: AblationFlags,
    actions: &[String],
) -> Result<Replay, AgentError> {
    let (mut session, _) = env.reset(group, task_index, ctr, flags)?;
    for (i, a) in actions.iter().enumerate() {
        if session.is_done() {
            return Ok(Replay { valid: false, reward: session.reward() });
        }
        let (obs, done) = env.step(&mut session, a)?;
        if obs.invalid_flag || (done && i + 1 < actions.len()) {
            return Ok(Replay { valid: false, reward: session.reward() });
        }
    }
    Ok(Replay { valid: session.is_done(), reward: session.reward() })
}

#[cfg(test)]
mod tests;
