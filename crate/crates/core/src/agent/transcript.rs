//! NDJSON transcript: one record per memory entry, enough to replay a run's
//! backend turns.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EntryKind, MemoryEntry, Provenance};
use crate::net::PhaseId;
use crate::tools::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub cycle: u64,
    pub t: u64,
    pub junction: String,
    /// system, assistant, tool, user or decision.
    pub role: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub args: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observation: Option<Observation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub content: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decision: Option<PhaseId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub justification: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<Provenance>,
}

impl TranscriptRecord {
    fn bare(entry: &MemoryEntry, role: &str) -> TranscriptRecord {
        TranscriptRecord {
            cycle: entry.cycle,
            t: entry.t,
            junction: entry.junction.clone(),
            role: role.to_string(),
            tool: None,
            args: None,
            observation: None,
            error: None,
            content: None,
            decision: None,
            justification: None,
            provenance: None,
        }
    }

    pub fn from_entry(entry: &MemoryEntry) -> TranscriptRecord {
        match &entry.kind {
            EntryKind::Task { text } => TranscriptRecord {
                content: Some(text.clone()),
                ..Self::bare(entry, "system")
            },
            EntryKind::Message { message } => {
                let mut r = Self::bare(entry, "assistant");
                r.content = Some(message.content.clone());
                if let Some(call) = &message.tool_call {
                    r.tool = Some(call.tool.clone());
                    r.args = Some(call.args.clone());
                }
                r
            }
            EntryKind::Tool {
                tool,
                args,
                observation,
                error,
            } => TranscriptRecord {
                tool: Some(tool.clone()),
                args: Some(args.clone()),
                observation: observation.clone(),
                error: error.clone(),
                ..Self::bare(entry, "tool")
            },
            EntryKind::Feedback { text } => TranscriptRecord {
                content: Some(text.clone()),
                ..Self::bare(entry, "user")
            },
            EntryKind::Decision { decision } => TranscriptRecord {
                decision: Some(decision.action),
                justification: Some(decision.justification.clone()),
                provenance: Some(decision.provenance.clone()),
                ..Self::bare(entry, "decision")
            },
        }
    }
}

pub fn write_transcript<W: Write>(mut out: W, records: &[TranscriptRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads NDJSON records; blank lines are skipped.
pub fn read_transcript<R: BufRead>(input: R) -> std::io::Result<Vec<TranscriptRecord>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("transcript line {}: {e}", n + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}
