//! The versioned `report.json` document.

use std::fs;
use std::io;
use std::path::Path;

use fkwave::WaveError;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub name: String,
    pub message: String,
}

impl From<&WaveError> for ErrorInfo {
    fn from(e: &WaveError) -> Self {
        Self {
            name: e.name().to_string(),
            message: e.to_string(),
        }
    }
}

/// Report body. Contains no timestamps, so identical runs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub status: String,
    pub error: Option<ErrorInfo>,
    pub result: Value,
}

impl Report {
    pub fn ok(config: RunConfig, argv: Vec<String>, result: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: config.command.clone(),
            argv,
            config,
            status: "ok".into(),
            error: None,
            result,
        }
    }

    pub fn failed(config: RunConfig, argv: Vec<String>, error: ErrorInfo, partial: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: config.command.clone(),
            argv,
            config,
            status: "error".into(),
            error: Some(error),
            result: partial,
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("report.json"), text + "\n")
    }
}
