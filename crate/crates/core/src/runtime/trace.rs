//! Trace records and their canonical serialization.
//!
//! The canonical form is one compact JSON object per record, each followed
//! by `\n`. The digest is the lowercase hex SHA-256 of that text.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{AgentId, CommunicationAct, Value};
use crate::protocol::ProtocolEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Micro,
    Macro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TraceRecord {
    Round {
        round: u64,
    },
    Delivered {
        round: u64,
        scope: Scope,
        act: CommunicationAct,
    },
    KnowledgeWrite {
        round: u64,
        agent: AgentId,
        key: String,
        value: Value,
    },
    EnvChange {
        round: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agent: Option<AgentId>,
        key: String,
        value: Value,
    },
    Protocol {
        round: u64,
        flagged: bool,
        event: ProtocolEvent,
    },
}

impl TraceRecord {
    pub fn round(&self) -> u64 {
        match self {
            TraceRecord::Round { round }
            | TraceRecord::Delivered { round, .. }
            | TraceRecord::KnowledgeWrite { round, .. }
            | TraceRecord::EnvChange { round, .. }
            | TraceRecord::Protocol { round, .. } => *round,
        }
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self, TraceRecord::Protocol { flagged: true, .. })
    }

    /// Compact JSON without the trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

/// Append-only record list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends; panics if the record's round is older than the last one.
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                record.round() >= last.round(),
                "trace rounds must be nondecreasing"
            );
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, TraceRecord> {
        self.records.iter()
    }

    /// Canonical JSON-lines text.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json());
            out.push('\n');
        }
        out
    }

    pub fn delivered(&self, scope: Scope) -> impl Iterator<Item = &CommunicationAct> {
        self.records.iter().filter_map(move |r| match r {
            TraceRecord::Delivered { scope: s, act, .. } if *s == scope => Some(act),
            _ => None,
        })
    }

    pub fn flagged(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.is_flagged())
    }
}

impl FromIterator<TraceRecord> for Trace {
    fn from_iter<I: IntoIterator<Item = TraceRecord>>(iter: I) -> Self {
        let mut t = Trace::new();
        for r in iter {
            t.push(r);
        }
        t
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in hash.iter() {
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

/// SHA-256 of the canonical serialization, as 64 hex digits.
pub fn trace_digest(trace: &Trace) -> String {
    let mut h = Sha256::new();
    for r in trace.iter() {
        h.update(r.to_json().as_bytes());
        h.update(b"\n");
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize().iter() {
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_digest() {
        assert_eq!(
            trace_digest(&Trace::new()),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn digest_matches_text() {
        let t: Trace = [
            TraceRecord::Round { round: 0 },
            TraceRecord::Round { round: 1 },
        ]
        .into_iter()
        .collect();
        assert_eq!(
            t.to_jsonl(),
            "{\"kind\":\"round\",\"round\":0}\n{\"kind\":\"round\",\"round\":1}\n"
        );
        assert_eq!(trace_digest(&t), digest_bytes(t.to_jsonl().as_bytes()));
        let u: Trace = [
            TraceRecord::Round { round: 0 },
            TraceRecord::Round { round: 2 },
        ]
        .into_iter()
        .collect();
        assert_ne!(trace_digest(&t), trace_digest(&u));
    }

    #[test]
    #[should_panic(expected = "nondecreasing")]
    fn rounds_only_grow() {
        let mut t = Trace::new();
        t.push(TraceRecord::Round { round: 3 });
        t.push(TraceRecord::Round { round: 2 });
    }
}
