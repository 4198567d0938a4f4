use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::files::InputRecord;

/// Provenance block embedded in every report. Everything except `timestamp`
/// is a function of the inputs and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputRecord>,
    /// Parameters after defaults were applied.
    pub params: serde_json::Value,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, inputs: Vec<InputRecord>, params: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs,
            params,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: OffsetDateTime::now_utc()
                .format(&Rfc3339)
                .unwrap_or_else(|_| "unknown".into()),
        }
    }
}
