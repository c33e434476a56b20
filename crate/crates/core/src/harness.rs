//! Benchmark orchestration: run a policy over every user's task stream,
//! write per-task records and a summary, compare runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    self, learn, run_episode, AgentError, Analyzer, BrowsePolicy, ClientError, FileMockClient, HeuristicAnalyzer,
    MemoryPolicy, ModelAnalyzer, ModelClient, ModelPolicy, OraclePolicy, Policy, RandomPolicy, StructuredMemory,
    DEFAULT_THRESHOLD,
};
use crate::catalog::{load_catalog, CatalogError};
use crate::cost::{summarize, CostError, CostLedger, PricingTable};
use crate::env::{AblationFlags, EnvConfig, EnvError, Environment};
use crate::metrics::{aggregate, alignment_gap, is_success, MetricsError, TaskRecord};
use crate::par::{self, Execution};
use crate::rerank::{load_ratings, CtrProfile, RerankError};
use crate::tasks::{default_profiles, generate_suite, InstructionGroup, TaskError, TaskSuite};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("suite hash mismatch: {0} vs {1}")]
    SuiteMismatch(String, String),
    #[error("policy mismatch: {0} vs {1}")]
    PolicyMismatch(String, String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    #[default]
    None,
    Hi,
    Ed,
}

impl Ablation {
    pub fn flags(self) -> AblationFlags {
        AblationFlags { ablate_hi: self == Ablation::Hi, ablate_ed: self == Ablation::Ed }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::Hi => "hi",
            Ablation::Ed => "ed",
        }
    }
}

impl FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Ablation::None),
            "hi" => Ok(Ablation::Hi),
            "ed" => Ok(Ablation::Ed),
            other => Err(format!("ablation must be none, hi or ed, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Canned responses instead of a live endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_max_tokens() -> u32 {
    256
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PolicySpec {
    Oracle {
        #[serde(default)]
        inspect_tabs: bool,
    },
    Random,
    Browse,
    Model(ModelSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AnalyzerSpec {
    #[default]
    Heuristic,
    Model(ModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: PathBuf,
    pub ratings: PathBuf,
    /// Generated from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub policy: PolicySpec,
    #[serde(default)]
    pub analyzer: AnalyzerSpec,
    #[serde(default)]
    pub memory: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_env")]
    pub env: EnvConfig,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_env() -> EnvConfig {
    EnvConfig::default()
}

fn default_parallel() -> bool {
    true
}

impl RunConfig {
    pub fn new(catalog: impl Into<PathBuf>, ratings: impl Into<PathBuf>, policy: PolicySpec) -> Self {
        RunConfig {
            catalog: catalog.into(),
            ratings: ratings.into(),
            suite: None,
            seed: 0,
            policy,
            analyzer: AnalyzerSpec::default(),
            memory: false,
            threshold: DEFAULT_THRESHOLD,
            ablation: Ablation::None,
            pricing: None,
            out: default_out(),
            env: EnvConfig::default(),
            parallel: true,
        }
    }

    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.catalog);
        fix(&mut cfg.ratings);
        fix(&mut cfg.out);
        cfg.suite.as_mut().map(fix);
        cfg.pricing.as_mut().map(fix);
        for spec in [model_spec_mut(&mut cfg.policy), analyzer_spec_mut(&mut cfg.analyzer)].into_iter().flatten() {
            spec.mock.as_mut().map(fix);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.env;
        if !(e.w_cf >= 0.0 && e.w_dpp >= 0.0 && (e.w_cf + e.w_dpp - 1.0).abs() < 1e-9) {
            return Err(HarnessError::Config(format!("blend weights must be non-negative and sum to 1, got {} and {}", e.w_cf, e.w_dpp)));
        }
        if e.max_steps == 0 || e.page_size == 0 || e.top_n == 0 {
            return Err(HarnessError::Config("max_steps, page_size and top_n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(HarnessError::Config(format!("threshold must be in [0, 1], got {}", self.threshold)));
        }
        let mut specs = vec![];
        if let PolicySpec::Model(m) = &self.policy {
            specs.push(m);
        }
        if let (true, AnalyzerSpec::Model(m)) = (self.memory, &self.analyzer) {
            specs.push(m);
        }
        for m in specs {
            if m.endpoint.is_some() == m.mock.is_some() {
                return Err(HarnessError::Config(format!("model {:?} needs exactly one of endpoint or mock", m.model)));
            }
            if self.pricing.is_none() {
                return Err(HarnessError::Config(format!("model {:?} needs a pricing table", m.model)));
            }
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel { Execution::Parallel } else { Execution::Sequential }
    }
}

fn model_spec_mut(p: &mut PolicySpec) -> Option<&mut ModelSpec> {
    match p {
        PolicySpec::Model(m) => Some(m),
        _ => None,
    }
}

fn analyzer_spec_mut(a: &mut AnalyzerSpec) -> Option<&mut ModelSpec> {
    match a {
        AnalyzerSpec::Model(m) => Some(m),
        AnalyzerSpec::Heuristic => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub suite_hash: String,
    pub reward_mean: f64,
    pub sr: f64,
    pub time_mean: f64,
    pub money_mean: f64,
    #[serde(default)]
    pub policy: String,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub episodes: usize,
}

impl Summary {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = dir.as_ref().join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path, source })
    }
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LEDGERS_FILE: &str = "ledgers.jsonl";

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<TaskRecord>,
    pub ledgers: Vec<CostLedger>,
    pub memories: Vec<(u32, StructuredMemory)>,
    pub summary: Summary,
}

/// Everything a run needs, loaded up front so input errors surface before
/// the first episode.
pub struct Prepared {
    pub env: Environment,
    pub suite: TaskSuite,
    pub pricing: Arc<PricingTable>,
    policy_client: Option<Arc<dyn ModelClient>>,
    analyzer: Arc<dyn Analyzer>,
    words: Arc<Vec<String>>,
}

fn make_client(spec: &ModelSpec) -> Result<Arc<dyn ModelClient>, HarnessError> {
    if let Some(path) = &spec.mock {
        return Ok(Arc::new(FileMockClient::load(path)?));
    }
    let endpoint = spec.endpoint.as_deref().unwrap_or_default();
    #[cfg(feature = "http")]
    {
        Ok(Arc::new(agent::HttpModelClient::new(endpoint, Duration::from_secs(spec.timeout_s))))
    }
    #[cfg(not(feature = "http"))]
    {
        let _ = (endpoint, Duration::from_secs(spec.timeout_s));
        Err(HarnessError::Config("built without the http feature".into()))
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, HarnessError> {
    config.validate()?;
    let catalog = load_catalog(&config.catalog)?;
    let ratings = load_ratings(&config.ratings)?;
    let suite = match &config.suite {
        Some(path) => TaskSuite::load(path)?,
        None => generate_suite(&catalog, &default_profiles(), config.seed, config.execution())?,
    };
    let pricing = Arc::new(match &config.pricing {
        Some(p) => PricingTable::load(p)?,
        None => PricingTable::default(),
    });
    let policy_client = match &config.policy {
        PolicySpec::Model(m) => {
            check_priced(&pricing, &m.model)?;
            Some(make_client(m)?)
        }
        _ => None,
    };
    let analyzer: Arc<dyn Analyzer> = match &config.analyzer {
        AnalyzerSpec::Model(m) if config.memory => {
            check_priced(&pricing, &m.model)?;
            Arc::new(ModelAnalyzer {
                client: make_client(m)?,
                pricing: Arc::clone(&pricing),
                model: m.model.clone(),
                temperature: m.temperature,
                max_tokens: m.max_tokens,
            })
        }
        _ => Arc::new(HeuristicAnalyzer),
    };
    let words = Arc::new(RandomPolicy::vocabulary(&catalog));
    let env = Environment::new(Arc::new(catalog), ratings, config.env)?;
    Ok(Prepared { env, suite, pricing, policy_client, analyzer, words })
}

fn check_priced(pricing: &PricingTable, model: &str) -> Result<(), HarnessError> {
    if pricing.0.contains_key(model) {
        Ok(())
    } else {
        Err(CostError::UnknownModel(model.to_string()).into())
    }
}

fn make_policy(config: &RunConfig, prep: &Prepared) -> Box<dyn Policy> {
    let base: Box<dyn Policy> = match &config.policy {
        PolicySpec::Oracle { inspect_tabs } => Box::new(OraclePolicy::new(*inspect_tabs)),
        PolicySpec::Random => Box::new(RandomPolicy::new(config.seed, Arc::clone(&prep.words))),
        PolicySpec::Browse => Box::new(BrowsePolicy),
        PolicySpec::Model(m) => Box::new(ModelPolicy {
            client: Arc::clone(prep.policy_client.as_ref().expect("client prepared")),
            pricing: Arc::clone(&prep.pricing),
            model: m.model.clone(),
            temperature: m.temperature,
            max_tokens: m.max_tokens,
        }),
    };
    if config.memory {
        Box::new(MemoryPolicy::new(base))
    } else {
        base
    }
}

pub fn policy_label(config: &RunConfig) -> String {
    let base = match &config.policy {
        PolicySpec::Oracle { inspect_tabs: false } => "oracle".to_string(),
        PolicySpec::Oracle { inspect_tabs: true } => "oracle-inspect".to_string(),
        PolicySpec::Random => "random".to_string(),
        PolicySpec::Browse => "browse".to_string(),
        PolicySpec::Model(m) => format!("model:{}", m.model),
    };
    if config.memory { format!("{base}+memory") } else { base }
}

struct UserRun {
    records: Vec<TaskRecord>,
    ledgers: Vec<CostLedger>,
    memory: StructuredMemory,
}

/// One user's stream, strictly in task order: CTR and memory carry over.
fn run_user(config: &RunConfig, prep: &Prepared, group: &InstructionGroup) -> Result<UserRun, HarnessError> {
    let mut policy = make_policy(config, prep);
    let flags = config.ablation.flags();
    let mut ctr = CtrProfile::new();
    let mut memory = StructuredMemory::new();
    let mut records = Vec::with_capacity(group.tasks.len());
    let mut ledgers = Vec::with_capacity(group.tasks.len());
    for (i, task) in group.tasks.iter().enumerate() {
        let (mut session, first) = prep.env.reset(group, i, ctr, flags)?;
        let mem = config.memory.then_some(&memory);
        let episode = run_episode(&prep.env, &mut session, first, policy.as_mut(), mem)?;
        if config.memory {
            learn(&mut memory, &episode, prep.analyzer.as_ref(), config.threshold, session.ledger_mut())?;
        }
        let (next_ctr, ledger) = session.into_parts();
        ctr = next_ctr;
        records.push(TaskRecord {
            user: group.user.user_id,
            task: task.index,
            category: task.category.number(),
            reward: episode.reward,
            success: is_success(episode.reward),
            steps: episode.trajectory.len() as u32,
            time_s: ledger.time_s(),
            money_usd: ledger.money_usd(),
        });
        ledgers.push(ledger);
    }
    Ok(UserRun { records, ledgers, memory })
}

/// Runs every user stream (users in parallel when enabled) and returns
/// the report without touching the filesystem.
pub fn execute(config: &RunConfig, prep: &Prepared) -> Result<RunReport, HarnessError> {
    let runs = par::map(config.execution(), &prep.suite.users, |g| run_user(config, prep, g));
    let mut records = Vec::new();
    let mut ledgers = Vec::new();
    let mut memories = Vec::new();
    for (group, run) in prep.suite.users.iter().zip(runs) {
        let run = run?;
        records.extend(run.records);
        ledgers.extend(run.ledgers);
        if config.memory {
            memories.push((group.user.user_id, run.memory));
        }
    }
    let agg = aggregate(&records)?;
    let (time_mean, money_mean) = summarize(&ledgers)?;
    let summary = Summary {
        suite_hash: prep.suite.content_hash(),
        reward_mean: agg.reward_mean,
        sr: agg.sr,
        time_mean,
        money_mean,
        policy: policy_label(config),
        ablation: config.ablation,
        episodes: records.len(),
    };
    Ok(RunReport { records, ledgers, memories, summary })
}

pub fn write_report(report: &RunReport, out: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut records = String::new();
    for r in &report.records {
        records.push_str(&serde_json::to_string(r).expect("record serializes"));
        records.push('\n');
    }
    let mut ledgers = String::new();
    for l in &report.ledgers {
        ledgers.push_str(&l.to_json());
        ledgers.push('\n');
    }
    let summary = serde_json::to_string_pretty(&report.summary).expect("summary serializes") + "\n";
    for (name, body) in [(RECORDS_FILE, records), (LEDGERS_FILE, ledgers), (SUMMARY_FILE, summary)] {
        let path = out.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    if !report.memories.is_empty() {
        let dir = out.join("memory");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (user, m) in &report.memories {
            let path = dir.join(format!("user{user}.json"));
            m.save(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Loads inputs, runs the benchmark and writes reports to `config.out`.
pub fn run_benchmark(config: &RunConfig) -> Result<RunReport, HarnessError> {
    let prep = prepare(config)?;
    let report = execute(config, &prep)?;
    write_report(&report, &config.out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub suite_hash: String,
    pub policy: String,
    pub g_hi: f64,
    pub g_ed: f64,
}

fn same_run(a: &Summary, b: &Summary) -> Result<(), HarnessError> {
    if a.suite_hash != b.suite_hash {
        return Err(HarnessError::SuiteMismatch(a.suite_hash.clone(), b.suite_hash.clone()));
    }
    if a.policy != b.policy {
        return Err(HarnessError::PolicyMismatch(a.policy.clone(), b.policy.clone()));
    }
    Ok(())
}

pub fn compute_gaps(full: &Summary, hi: &Summary, ed: &Summary) -> Result<GapReport, HarnessError> {
    same_run(full, hi)?;
    same_run(full, ed)?;
    Ok(GapReport {
        suite_hash: full.suite_hash.clone(),
        policy: full.policy.clone(),
        g_hi: alignment_gap(full.reward_mean, hi.reward_mean)?,
        g_ed: alignment_gap(full.reward_mean, ed.reward_mean)?,
    })
}

pub const TABLE_COLUMNS: [&str; 7] = ["Method", "Reward", "SR (%)", "G_HI (%)", "G_ED (%)", "Time (s)", "Money ($)"];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub reward: f64,
    pub sr: f64,
    pub g_hi: Option<f64>,
    pub g_ed: Option<f64>,
    pub time_s: f64,
    pub money_usd: f64,
}

/// One row per policy. The full-environment run supplies reward, SR and
/// costs; gaps appear when matching ablated runs are present.
pub fn table_rows(summaries: &[Summary]) -> Result<Vec<TableRow>, HarnessError> {
    let mut policies: Vec<&str> = Vec::new();
    for s in summaries {
        if !policies.contains(&s.policy.as_str()) {
            policies.push(&s.policy);
        }
    }
    let mut rows = Vec::new();
    for p in policies {
        let of = |a: Ablation| summaries.iter().find(|s| s.policy == p && s.ablation == a);
        let base = of(Ablation::None).unwrap_or_else(|| summaries.iter().find(|s| s.policy == p).unwrap());
        let gap = |a: Ablation| -> Result<Option<f64>, HarnessError> {
            match (base.ablation, of(a)) {
                (Ablation::None, Some(other)) => {
                    same_run(base, other)?;
                    Ok(Some(alignment_gap(base.reward_mean, other.reward_mean)?))
                }
                _ => Ok(None),
            }
        };
        rows.push(TableRow {
            method: p.to_string(),
            reward: base.reward_mean,
            sr: base.sr,
            g_hi: gap(Ablation::Hi)?,
            g_ed: gap(Ablation::Ed)?,
            time_s: base.time_mean,
            money_usd: base.money_mean,
        });
    }
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(rows: &[TableRow]) -> String {
    let mut out = TABLE_COLUMNS.join(",") + "\n";
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.method),
            r.reward,
            r.sr,
            opt(r.g_hi),
            opt(r.g_ed),
            r.time_s,
            r.money_usd
        );
    }
    out
}

pub fn render_text(rows: &[TableRow]) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{:.1}", r.reward),
                format!("{:.1}", r.sr),
                opt(r.g_hi),
                opt(r.g_ed),
                format!("{:.2}", r.time_s),
                format!("{:.4}", r.money_usd),
            ]
        })
        .collect();
    let mut widths = TABLE_COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[&str]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, &TABLE_COLUMNS);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}

/// Text and CSV renderings of the comparison table.
pub fn emit_table(summaries: &[Summary]) -> Result<(String, String), HarnessError> {
    if summaries.is_empty() {
        return Err(HarnessError::Config("no summaries to tabulate".into()));
    }
    let rows = table_rows(summaries)?;
    Ok((render_text(&rows), render_csv(&rows)))
}
