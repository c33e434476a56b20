//! Runtime budget accounting.
//!
//! Environment actions are charged from a static table of estimated response
//! delays. Model calls are charged in USD from a configurable pricing table;
//! their wall time is not counted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("no pricing for model {0:?}")]
    UnknownModel(String),
    #[error("negative price for model {0:?}")]
    NegativePrice(String),
    #[error("cannot summarize zero ledgers")]
    Empty,
    #[error("failed to read pricing: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed pricing: {0}")]
    Json(#[from] serde_json::Error),
}

/// Time is tracked in units of 0.1 ms so table sums are exact.
const TICKS_PER_SECOND: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionCharge {
    Reset,
    Search,
    InstructionHistory,
    BackToSearch,
    NextPage,
    PrevPage,
    Descriptions,
    Features,
    Reviews,
    BuyNow,
    OtherClick,
    Think,
    Invalid,
}

impl ActionCharge {
    /// Estimated delay in 0.1 ms ticks.
    pub fn ticks(self) -> u64 {
        match self {
            ActionCharge::Reset => 1874,
            ActionCharge::Search => 5966,
            ActionCharge::InstructionHistory => 2645,
            ActionCharge::BackToSearch => 1197,
            ActionCharge::NextPage => 2693,
            ActionCharge::PrevPage => 2545,
            ActionCharge::Descriptions => 2401,
            ActionCharge::Features => 2167,
            ActionCharge::Reviews => 1275,
            ActionCharge::BuyNow => 1920,
            ActionCharge::OtherClick => 2896,
            ActionCharge::Think => 0,
            ActionCharge::Invalid => 3234,
        }
    }

    pub fn seconds(self) -> f64 {
        self.ticks() as f64 / TICKS_PER_SECOND
    }

    pub fn label(self) -> &'static str {
        match self {
            ActionCharge::Reset => "reset",
            ActionCharge::Search => "search",
            ActionCharge::InstructionHistory => "click[Instruction History]",
            ActionCharge::BackToSearch => "click[Back to Search]",
            ActionCharge::NextPage => "click[Next >]",
            ActionCharge::PrevPage => "click[< Prev]",
            ActionCharge::Descriptions => "click[Descriptions]",
            ActionCharge::Features => "click[Features]",
            ActionCharge::Reviews => "click[Reviews]",
            ActionCharge::BuyNow => "click[Buy Now]",
            ActionCharge::OtherClick => "click[other valid tag]",
            ActionCharge::Think => "think",
            ActionCharge::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    TimeS,
    MoneyUsd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEvent {
    pub label: String,
    pub amount: f64,
    pub kind: CostKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    time_ticks: u64,
    money_usd: f64,
    events: Vec<CostEvent>,
}

#[derive(Serialize)]
struct LedgerExport<'a> {
    time_s: f64,
    money_usd: f64,
    events: &'a [CostEvent],
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn time_s(&self) -> f64 {
        self.time_ticks as f64 / TICKS_PER_SECOND
    }

    pub fn money_usd(&self) -> f64 {
        self.money_usd
    }

    pub fn events(&self) -> &[CostEvent] {
        &self.events
    }

    pub fn count_label(&self, label: &str) -> usize {
        self.events.iter().filter(|e| e.label == label).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&LedgerExport {
            time_s: self.time_s(),
            money_usd: self.money_usd,
            events: &self.events,
        })
        .expect("ledger serializes")
    }
}

pub fn charge_action(ledger: &mut CostLedger, action: ActionCharge) {
    ledger.time_ticks += action.ticks();
    ledger.events.push(CostEvent {
        label: action.label().to_string(),
        amount: action.seconds(),
        kind: CostKind::TimeS,
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPrice {
    pub in_per_1m: f64,
    pub out_per_1m: f64,
}

/// USD per million tokens, keyed by model name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PricingTable(pub BTreeMap<String, ModelPrice>);

impl PricingTable {
    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let table: PricingTable = serde_json::from_str(text)?;
        for (model, p) in &table.0 {
            if !(p.in_per_1m >= 0.0 && p.out_per_1m >= 0.0) {
                return Err(CostError::NegativePrice(model.clone()));
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn with_model(mut self, model: &str, in_per_1m: f64, out_per_1m: f64) -> Self {
        self.0.insert(model.to_string(), ModelPrice { in_per_1m, out_per_1m });
        self
    }
}

/// Charges one model call under `label` and returns the USD added.
pub fn charge_api(
    ledger: &mut CostLedger,
    pricing: &PricingTable,
    model: &str,
    prompt_tokens: u64,
    completion_tokens: u64,
    label: &str,
) -> Result<f64, CostError> {
    let price = pricing
        .0
        .get(model)
        .ok_or_else(|| CostError::UnknownModel(model.to_string()))?;
    let usd = prompt_tokens as f64 * price.in_per_1m / 1e6
        + completion_tokens as f64 * price.out_per_1m / 1e6;
    ledger.money_usd += usd;
    ledger.events.push(CostEvent {
        label: label.to_string(),
        amount: usd,
        kind: CostKind::MoneyUsd,
    });
    Ok(usd)
}

/// Mean seconds and mean USD per ledger.
pub fn summarize(ledgers: &[CostLedger]) -> Result<(f64, f64), CostError> {
    if ledgers.is_empty() {
        return Err(CostError::Empty);
    }
    let n = ledgers.len() as f64;
    let ticks: u64 = ledgers.iter().map(|l| l.time_ticks).sum();
    let money: f64 = ledgers.iter().map(|l| l.money_usd).sum();
    Ok((ticks as f64 / TICKS_PER_SECOND / n, money / n))
}
