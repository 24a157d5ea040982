use serde::Serialize;
use serde_json::Value;

use crate::config::{Command, RunConfig};

/// What a command hands back before it is wrapped in a [`Report`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub result: Value,
    /// One or more lines for stderr.
    pub summary: String,
}

/// The JSON document every command emits.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Command,
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub passed: bool,
    pub result: Value,
}

impl Report {
    pub fn new(command: Command, config: RunConfig, outcome: &Outcome) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed(),
            config_hash: config.hash(),
            config,
            passed: outcome.passed,
            result: outcome.result.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
