use std::sync::Arc;

use super::*;
use crate::catalog::{generate_catalog, CatalogSpec};
use crate::cost::PricingTable;
use crate::env::{EnvConfig, Environment};
use crate::rerank::generate_ratings;
use crate::tasks::{default_profiles, generate_group, InstructionGroup};

fn fixture() -> (Environment, InstructionGroup) {
    let catalog = generate_catalog(&CatalogSpec { items: 1000, seed: 3 });
    let ratings = generate_ratings(&catalog, 30, 60, 3);
    let group = generate_group(&catalog, &default_profiles()[0], 3).unwrap();
    let env = Environment::new(Arc::new(catalog), ratings, EnvConfig::default()).unwrap();
    (env, group)
}

fn episode(env: &Environment, group: &InstructionGroup, i: usize, ctr: CtrProfile, policy: &mut dyn Policy) -> (Episode, Session) {
    let (mut s, first) = env.reset(group, i, ctr, AblationFlags::default()).unwrap();
    let ep = run_episode(env, &mut s, first, policy, None).unwrap();
    (ep, s)
}

#[test]
fn oracle_solves_every_task_quickly() {
    let (env, group) = fixture();
    let mut ctr = CtrProfile::new();
    let mut oracle = OraclePolicy::new(false);
    for i in 0..group.tasks.len() {
        let (ep, s) = episode(&env, &group, i, ctr, &mut oracle);
        assert_eq!(ep.reward, 1.0, "task {i}: {:?}", ep.trajectory.actions());
        assert!(ep.trajectory.len() <= 6);
        ctr = s.into_parts().0;
    }
}

#[test]
fn thinking_only_hits_the_cap() {
    let (env, group) = fixture();
    let mut p = ScriptedPolicy::new(vec![]);
    let (ep, s) = episode(&env, &group, 0, CtrProfile::new(), &mut p);
    assert_eq!(ep.trajectory.len(), 15);
    assert_eq!(ep.reward, 0.0);
    assert!((s.ledger().time_s() - 0.1874).abs() < 1e-12);
}

#[test]
fn random_policy_rarely_succeeds() {
    let (env, group) = fixture();
    let words = Arc::new(RandomPolicy::vocabulary(env.catalog()));
    let mut below = 0;
    for seed in 0..100u64 {
        let mut p = RandomPolicy::new(seed, Arc::clone(&words));
        let (ep, _) = episode(&env, &group, (seed % 50) as usize, CtrProfile::new(), &mut p);
        assert!(!ep.aborted);
        if ep.reward < 1.0 {
            below += 1;
        }
    }
    assert!(below >= 95, "{below}");
}

#[test]
fn three_unparseable_outputs_abort() {
    let (env, group) = fixture();
    let mut p = ScriptedPolicy::new(vec!["search[x]".into(), "buy it".into(), "??".into(), "hmm".into(), "click[Next >]".into()]);
    let (ep, s) = episode(&env, &group, 0, CtrProfile::new(), &mut p);
    assert!(ep.aborted);
    assert_eq!(ep.reward, 0.0);
    assert_eq!(ep.trajectory.len(), 4);
    assert_eq!(s.ledger().count_label("invalid"), 3);
}

#[test]
fn memory_replay_shortens_a_repeat() {
    let (env, group) = fixture();
    let mut memory = StructuredMemory::new();
    let mut base = OraclePolicy::new(true);
    let (first, mut s) = episode(&env, &group, 0, CtrProfile::new(), &mut base);
    assert_eq!(first.reward, 1.0);
    assert!(learn(&mut memory, &first, &HeuristicAnalyzer, DEFAULT_THRESHOLD, s.ledger_mut()).unwrap());
    let stored = memory.entries()[0].key_actions.clone();
    assert!(stored.len() < first.trajectory.len());

    let mut with_memory = MemoryPolicy::new(OraclePolicy::new(true));
    let (mut s2, obs) = env.reset(&group, 0, CtrProfile::new(), AblationFlags::default()).unwrap();
    let again = run_episode(&env, &mut s2, obs, &mut with_memory, Some(&memory)).unwrap();
    assert_eq!(again.reward, 1.0);
    assert_eq!(again.trajectory.actions(), stored.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(again.trajectory.len() < first.trajectory.len());

    let replay = replay_actions(&env, &group, 0, CtrProfile::new(), AblationFlags::default(), &stored).unwrap();
    assert_eq!(replay, Replay { valid: true, reward: Some(1.0) });
}

#[test]
fn stale_plan_falls_back_to_inner_policy() {
    let (env, group) = fixture();
    let mut memory = StructuredMemory::new();
    let q = group.tasks[0].instruction_text.clone();
    update_memory(&mut memory, &q, vec!["search[zzzz]".into(), "click[NOPE]".into()], "", 1.0, None);
    let mut p = MemoryPolicy::new(OraclePolicy::new(false));
    let (mut s, obs) = env.reset(&group, 0, CtrProfile::new(), AblationFlags::default()).unwrap();
    let ep = run_episode(&env, &mut s, obs, &mut p, Some(&memory)).unwrap();
    assert_eq!(ep.trajectory.steps[0].action, "search[zzzz]");
    assert_eq!(ep.reward, 1.0);
}

#[test]
fn model_policy_charges_each_call() {
    let (env, group) = fixture();
    let mock = FileMockClient::new(vec![MockRule {
        contains: None,
        text: "Thought: not sure\nAction: think[look around]".into(),
        prompt_tokens: 500,
        completion_tokens: 20,
    }]);
    let mut p = ModelPolicy {
        client: Arc::new(mock),
        pricing: Arc::new(PricingTable::default().with_model("m", 2.0, 8.0)),
        model: "m".into(),
        temperature: 0.0,
        max_tokens: 64,
    };
    let (ep, s) = episode(&env, &group, 0, CtrProfile::new(), &mut p);
    assert_eq!(ep.trajectory.len(), 15);
    assert_eq!(s.ledger().count_label("policy"), 15);
    let per_call = (500.0 * 2.0 + 20.0 * 8.0) / 1e6;
    assert!((s.ledger().money_usd() - 15.0 * per_call).abs() < 1e-12);
}

#[test]
fn trajectory_matches_replay() {
    let (env, group) = fixture();
    let mut p = OraclePolicy::new(true);
    let (ep, _) = episode(&env, &group, 4, CtrProfile::new(), &mut p);
    let (mut s, _) = env.reset(&group, 4, CtrProfile::new(), AblationFlags::default()).unwrap();
    for step in &ep.trajectory.steps {
        let (obs, _) = env.step(&mut s, &step.action).unwrap();
        assert_eq!(obs, step.observation);
    }
}
