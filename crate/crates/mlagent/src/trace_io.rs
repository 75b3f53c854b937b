//! JSON-lines trace files.

use std::path::Path;

use mlagent_core::runtime::trace_digest;
use mlagent_core::{Trace, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("FileNotFound: {0}")]
    FileNotFound(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("ParseError at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Writes the canonical text and returns its digest.
pub fn write_trace(path: &Path, trace: &Trace) -> Result<String, TraceError> {
    std::fs::write(path, trace.to_jsonl()).map_err(|e| TraceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(trace_digest(trace))
}

/// Parses trace text. Blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| TraceError::Parse {
            line: i + 1,
            column: e.column(),
            message: crate::strip_location(&e.to_string()),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TraceError::FileNotFound(path.display().to_string()),
        _ => TraceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        },
    })?;
    parse_trace(&text)
}
