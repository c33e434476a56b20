//! Personalized web-shopping simulator and agent benchmark.

pub mod agent;
pub mod catalog;
pub mod cost;
pub mod env;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod rerank;
pub mod search;
pub mod seed;
pub mod tasks;
pub mod vocab;
