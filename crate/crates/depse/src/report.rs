//! Machine-readable run reports.
//!
//! Reports are deterministic given (config, inputs, seed) apart from the
//! wall-clock fields.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(default)]
    pub utterances: Vec<UtteranceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub status: String,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<crate::metrics::BssScores>,
}

impl Report {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Report {
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            config,
            utterances: Vec::new(),
            summary: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn write(&self, path: &str) -> crate::Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
