//! The closed-loop decision agent: dialogue memory, prompt assembly, a
//! pluggable decision backend and the bounded decision cycle with fallback
//! to the auxiliary controller.

mod llm;
mod noise;
pub mod parse;
mod prompt;
mod replay;
mod scripted;
mod transcript;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::control::{run_control_loop, PhaseDecider};
use crate::controllers::ControllerParams;
use crate::net::PhaseId;
use crate::sim::{SimError, SimEvent, SimState};
use crate::tools::{
    check_feasibility, Observation, ToolContext, ToolError, ToolRegistry, TrailEntry, EVALUATE_ACTION_FEASIBILITY,
    GET_AUXILIARY_DECISION, GET_INTERSECTION_LAYOUT, GET_OCCUPANCY, GET_PHASE_ID, GET_QUEUE_LENGTH,
    GET_SIGNAL_PHASE_STRUCTURE, JUSTIFY_DECISION_LOGIC,
};

pub use llm::{llm_chat_call, LlmBackend, LlmConfig};
pub use noise::NoiseBackend;
pub use prompt::{build_messages, build_system_prompt, ATTENTION_POINTS, DEFAULT_TASK_DESCRIPTION};
pub use replay::ReplayBackend;
pub use scripted::ScriptedBackend;
pub use transcript::{read_transcript, write_transcript, TranscriptRecord};

/// Whether the backend may call tools or only sees a state dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentMode {
    Tools,
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Total simulated time in seconds.
    pub horizon: u64,
    /// Seconds between decision cycles.
    pub delta_t: u64,
    pub task_description: String,
    pub max_tool_calls_per_cycle: u32,
    pub max_format_retries: u32,
    /// Previous cycles shown in the prompt's chat history.
    pub history_cycles: u64,
    pub mode: AgentMode,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            horizon: 3600,
            delta_t: 15,
            task_description: DEFAULT_TASK_DESCRIPTION.to_string(),
            max_tool_calls_per_cycle: 10,
            max_format_retries: 3,
            history_cycles: 2,
            mode: AgentMode::Tools,
        }
    }
}

impl AgentConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.delta_t <= crate::sim::YELLOW_S as u64 {
            return Err(format!("delta_t must exceed the {} s yellow, got {}", crate::sim::YELLOW_S, self.delta_t));
        }
        if self.max_tool_calls_per_cycle == 0 {
            return Err("max_tool_calls_per_cycle must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: Value,
}

/// One backend turn: a tool call or decision text, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendMessage {
    pub role: Role,
    pub content: String,
    pub tool_call: Option<ToolCall>,
}

impl BackendMessage {
    pub fn text(content: impl Into<String>) -> BackendMessage {
        BackendMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn call(tool: &str, args: Value) -> BackendMessage {
        BackendMessage {
            role: Role::Assistant,
            content: String::new(),
            tool_call: Some(ToolCall {
                tool: tool.to_string(),
                args,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: String,
    pub retries: u32,
    pub tool_calls: u32,
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub junction: String,
    pub cycle: u64,
    pub t: u64,
    pub action: PhaseId,
    pub justification: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum EntryKind {
    Task { text: String },
    Message { message: BackendMessage },
    Tool {
        tool: String,
        args: Value,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        observation: Option<Observation>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        error: Option<String>,
    },
    Feedback { text: String },
    Decision { decision: Decision },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub cycle: u64,
    pub t: u64,
    pub junction: String,
    #[serde(flatten)]
    pub kind: EntryKind,
}

/// Append-only record of one junction agent's episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueMemory {
    pub entries: Vec<MemoryEntry>,
    pub cycle: u64,
}

impl DialogueMemory {
    fn push(&mut self, t: u64, junction: &str, kind: EntryKind) {
        self.entries.push(MemoryEntry {
            cycle: self.cycle,
            t,
            junction: junction.to_string(),
            kind,
        });
    }

    /// Entries of one cycle.
    pub fn cycle_entries(&self, cycle: u64) -> impl Iterator<Item = &MemoryEntry> {
        // cycles are appended in nondecreasing order
        let start = self.entries.partition_point(|e| e.cycle < cycle);
        let end = self.entries.partition_point(|e| e.cycle <= cycle);
        self.entries[start..end].iter()
    }

    /// Latest successful observation of `tool` in `cycle`.
    pub fn observation(&self, cycle: u64, tool: &str) -> Option<&Observation> {
        self.cycle_entries(cycle).filter_map(|e| match &e.kind {
            EntryKind::Tool { tool: t, observation: Some(o), .. } if t == tool => Some(o),
            _ => None,
        }).last()
    }

    fn trail(&self, cycle: u64) -> Vec<TrailEntry> {
        self.cycle_entries(cycle)
            .filter_map(|e| match &e.kind {
                EntryKind::Tool { tool, observation, error, .. } => Some(TrailEntry {
                    tool: tool.clone(),
                    reading: observation
                        .as_ref()
                        .map(|o| o.text.clone())
                        .or_else(|| error.clone())
                        .unwrap_or_default(),
                }),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no recorded message for junction {junction} cycle {cycle}")]
    Exhausted { junction: String, cycle: u64 },
}

/// What a backend sees when asked for its next turn.
pub struct BackendRequest<'a> {
    pub junction: &'a str,
    pub cycle: u64,
    pub clock: u64,
    pub memory: &'a DialogueMemory,
    pub registry: &'a ToolRegistry,
    pub config: &'a AgentConfig,
}

impl BackendRequest<'_> {
    pub fn system_prompt(&self) -> String {
        build_system_prompt(self.config, self.registry, self.memory, self.junction)
    }
}

pub trait DecisionBackend {
    /// Short name recorded in decision provenance.
    fn kind(&self) -> String;
    fn respond(&mut self, request: &BackendRequest<'_>) -> Result<BackendMessage, BackendError>;
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("fallback produced an invalid phase: {0}")]
    InternalInconsistency(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<ToolError> for AgentError {
    fn from(e: ToolError) -> Self {
        match e {
            ToolError::Sim(s) => AgentError::Sim(s),
            other => AgentError::InternalInconsistency(other.to_string()),
        }
    }
}

/// Tools whose output forms the vanilla-mode state dump.
pub const STATE_DUMP_TOOLS: [&str; 5] = [
    GET_INTERSECTION_LAYOUT,
    GET_SIGNAL_PHASE_STRUCTURE,
    GET_PHASE_ID,
    GET_OCCUPANCY,
    GET_QUEUE_LENGTH,
];

fn junction_args(junction: &str) -> Value {
    json!({ "junction_id": junction })
}

struct Cycle<'a> {
    registry: &'a ToolRegistry,
    params: &'a ControllerParams,
    sim: &'a SimState,
    junction: &'a str,
}

impl Cycle<'_> {
    fn run_tool(&self, memory: &mut DialogueMemory, tool: &str, args: Value) -> Result<Observation, ToolError> {
        let trail = memory.trail(memory.cycle);
        let ctx = ToolContext {
            sim: self.sim,
            params: self.params,
            trail: &trail,
        };
        let result = self.registry.invoke(tool, &args, &ctx);
        let (observation, error) = match &result {
            Ok(inv) => (Some(inv.observation.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        memory.push(
            self.sim.clock(),
            self.junction,
            EntryKind::Tool {
                tool: tool.to_string(),
                args,
                observation,
                error,
            },
        );
        result.map(|inv| inv.observation)
    }
}

/// Runs one bounded decision cycle for `junction`. Every failure path ends
/// in the auxiliary decision with the fallback flag set.
#[allow(clippy::too_many_arguments)]
pub fn decision_cycle(
    config: &AgentConfig,
    memory: &mut DialogueMemory,
    backend: &mut dyn DecisionBackend,
    registry: &ToolRegistry,
    sim: &SimState,
    junction: &str,
    params: &ControllerParams,
) -> Result<Decision, AgentError> {
    let t = sim.clock();
    let cycle = Cycle {
        registry,
        params,
        sim,
        junction,
    };
    memory.push(
        t,
        junction,
        EntryKind::Task {
            text: config.task_description.clone(),
        },
    );
    if config.mode == AgentMode::Vanilla {
        for tool in STATE_DUMP_TOOLS {
            cycle.run_tool(memory, tool, junction_args(junction))?;
        }
    }
    let mut tool_calls = 0u32;
    let mut failures = 0u32;
    let accepted: Result<(PhaseId, String), String> = loop {
        let request = BackendRequest {
            junction,
            cycle: memory.cycle,
            clock: t,
            memory,
            registry,
            config,
        };
        let message = match backend.respond(&request) {
            Ok(m) => m,
            Err(e) => break Err(e.to_string()),
        };
        memory.push(t, junction, EntryKind::Message { message: message.clone() });
        if let Some(call) = message.tool_call {
            if config.mode == AgentMode::Vanilla {
                failures += 1;
                if failures > config.max_format_retries {
                    break Err(format!("{failures} invalid answers"));
                }
                memory.push(
                    t,
                    junction,
                    EntryKind::Feedback {
                        text: "No tools are available in this mode; answer with the decision JSON.".into(),
                    },
                );
                continue;
            }
            if tool_calls >= config.max_tool_calls_per_cycle {
                break Err(format!("tool-call budget of {} exhausted", config.max_tool_calls_per_cycle));
            }
            tool_calls += 1;
            // errors are recorded in memory for the backend to read
            let _ = cycle.run_tool(memory, &call.tool, call.args);
            continue;
        }
        let proposal = json!({ "junction_id": junction, "proposed": message.content });
        cycle.run_tool(memory, EVALUATE_ACTION_FEASIBILITY, proposal)?;
        let (phase, reason) = check_feasibility(sim, junction, &message.content)?;
        match phase {
            Some(p) => {
                let justification = parse::parse_decision(&message.content)
                    .map(|d| d.justification)
                    .unwrap_or_default();
                break Ok((p, justification));
            }
            None => {
                failures += 1;
                if failures > config.max_format_retries {
                    break Err(format!("{failures} invalid answers, last: {reason}"));
                }
                memory.push(
                    t,
                    junction,
                    EntryKind::Feedback {
                        text: format!("Your answer was rejected ({reason}). Revise and resubmit."),
                    },
                );
            }
        }
    };
    let retries = failures.min(config.max_format_retries);
    let (action, justification, fallback_reason) = match accepted {
        Ok((p, j)) => (p, j, None),
        Err(reason) => {
            let obs = cycle.run_tool(memory, GET_AUXILIARY_DECISION, junction_args(junction))?;
            let phase = obs.data["recommended"]
                .as_str()
                .and_then(|s| s.parse::<PhaseId>().ok())
                .filter(|p| sim.phase_ids(junction).map(|ids| ids.contains(p)).unwrap_or(false))
                .ok_or_else(|| AgentError::InternalInconsistency(obs.data.to_string()))?;
            (phase, format!("Fallback to the auxiliary decision: {reason}."), Some(reason))
        }
    };
    let decision = Decision {
        junction: junction.to_string(),
        cycle: memory.cycle,
        t,
        action,
        justification: justification.clone(),
        provenance: Provenance {
            backend: backend.kind(),
            retries,
            tool_calls,
            fallback: fallback_reason.is_some(),
            fallback_reason,
        },
    };
    memory.push(
        t,
        junction,
        EntryKind::Decision {
            decision: decision.clone(),
        },
    );
    cycle.run_tool(
        memory,
        JUSTIFY_DECISION_LOGIC,
        json!({ "junction_id": junction, "decision": action, "justification": justification }),
    )?;
    Ok(decision)
}

/// One agent per junction, all sharing a backend.
pub struct Agent<'a> {
    pub config: AgentConfig,
    pub params: ControllerParams,
    pub registry: ToolRegistry,
    backend: &'a mut dyn DecisionBackend,
    memories: BTreeMap<String, DialogueMemory>,
    decisions: Vec<Decision>,
    error: Option<AgentError>,
}

impl<'a> Agent<'a> {
    pub fn new(config: AgentConfig, params: ControllerParams, backend: &'a mut dyn DecisionBackend) -> Agent<'a> {
        Agent {
            config,
            params,
            registry: ToolRegistry::new(),
            backend,
            memories: BTreeMap::new(),
            decisions: Vec::new(),
            error: None,
        }
    }

    pub fn memory(&self, junction: &str) -> Option<&DialogueMemory> {
        self.memories.get(junction)
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Full transcript ordered by cycle, then junction.
    pub fn transcript(&self) -> Vec<TranscriptRecord> {
        let mut entries: Vec<&MemoryEntry> = self.memories.values().flat_map(|m| m.entries.iter()).collect();
        entries.sort_by_key(|e| e.cycle);
        entries.into_iter().map(TranscriptRecord::from_entry).collect()
    }
}

impl PhaseDecider for Agent<'_> {
    fn decide(&mut self, sim: &SimState, junction: &str, cycle: u64) -> Result<Option<PhaseId>, SimError> {
        if self.error.is_some() {
            return Ok(None);
        }
        let memory = self.memories.entry(junction.to_string()).or_default();
        memory.cycle = cycle;
        match decision_cycle(&self.config, memory, self.backend, &self.registry, sim, junction, &self.params) {
            Ok(d) => {
                let action = d.action;
                self.decisions.push(d);
                Ok(Some(action))
            }
            Err(AgentError::Sim(e)) => Err(e),
            Err(e) => {
                self.error = Some(e);
                Ok(None)
            }
        }
    }
}

/// Result of a complete agent-controlled run.
pub struct AgentRun {
    pub decisions: Vec<Decision>,
    pub transcript: Vec<TranscriptRecord>,
    pub events: Vec<SimEvent>,
}

/// Runs the agent until the horizon: one decision cycle per junction every
/// `delta_t` seconds, then the simulation advances.
pub fn control_loop(
    config: &AgentConfig,
    params: &ControllerParams,
    sim: &mut SimState,
    backend: &mut dyn DecisionBackend,
) -> Result<AgentRun, AgentError> {
    let mut agent = Agent::new(config.clone(), params.clone(), backend);
    let events = run_control_loop(sim, &mut agent, config.delta_t)?;
    if let Some(e) = agent.error.take() {
        return Err(e);
    }
    Ok(AgentRun {
        transcript: agent.transcript(),
        decisions: std::mem::take(&mut agent.decisions),
        events,
    })
}

#[cfg(test)]
mod tests;
