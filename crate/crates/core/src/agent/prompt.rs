use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AgentConfig, AgentMode, BackendRequest, DialogueMemory, EntryKind};
use crate::tools::ToolRegistry;

pub const DEFAULT_TASK_DESCRIPTION: &str = "You operate the traffic signal of one intersection in a simulated road network. \
At each decision point you choose which signal phase shows next. Aim for short travel and waiting times for all vehicles \
and get emergency vehicles through without delay. Use the tools to inspect the intersection, then state your decision.";

pub const ATTENTION_POINTS: [&str; 5] = [
    "An approaching emergency vehicle has priority: give green to a phase that serves its movement.",
    "Movements that lead into a blocked road cannot discharge. Do not pick a phase containing them while the block lasts.",
    "An occupancy of -100% or a queue of -1 means the detector has failed, not that the road is empty. Estimate that approach's demand from the other readings.",
    "Every phase change costs a 3 s yellow interval, so avoid switching without a reason.",
    "Only the phase ids listed by Get_Available_Actions are valid answers.",
];

const OUTPUT_FORMAT: &str = "To call a tool, reply with exactly one JSON object {\"tool\": \"<tool name>\", \"args\": {...}}.\n\
To decide, reply with exactly one JSON object {\"action\": \"P<k>\", \"justification\": \"<short reason>\"}.\n\
Never put a tool call and a decision in the same reply.";

const VANILLA_OUTPUT_FORMAT: &str = "Reply with exactly one JSON object {\"action\": \"P<k>\", \"justification\": \"<short reason>\"}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

fn render_cycle(out: &mut String, memory: &DialogueMemory, cycle: u64) {
    let before = out.len();
    let mut n = 0;
    for e in memory.cycle_entries(cycle) {
        match &e.kind {
            EntryKind::Tool {
                tool,
                args,
                observation,
                error,
            } => {
                n += 1;
                let _ = writeln!(out, "[{n}] {tool} {args}");
                if let Some(o) = observation {
                    let _ = writeln!(out, "{}", o.text);
                }
                if let Some(err) = error {
                    let _ = writeln!(out, "error: {err}");
                }
            }
            EntryKind::Message { message } if message.tool_call.is_none() => {
                let _ = writeln!(out, "Your reply: {}", message.content);
            }
            EntryKind::Feedback { text } => {
                let _ = writeln!(out, "Feedback: {text}");
            }
            _ => {}
        }
    }
    if out.len() == before {
        out.push_str("(nothing yet)\n");
    }
}

fn render_history(out: &mut String, memory: &DialogueMemory, keep: u64) {
    let first = memory.cycle.saturating_sub(keep);
    let mut any = false;
    for cycle in first..memory.cycle {
        let entries: Vec<_> = memory.cycle_entries(cycle).collect();
        let Some(head) = entries.first() else { continue };
        any = true;
        let tools: Vec<&str> = entries
            .iter()
            .filter_map(|e| match &e.kind {
                EntryKind::Tool { tool, .. } => Some(tool.as_str()),
                _ => None,
            })
            .collect();
        let _ = writeln!(out, "Cycle {cycle} (t = {} s): tools used: {}", head.t, tools.join(", "));
        for e in &entries {
            if let EntryKind::Decision { decision } = &e.kind {
                let _ = writeln!(out, "Decision: {} ({})", decision.action, decision.justification);
            }
        }
    }
    if !any {
        out.push_str("(no earlier cycles)\n");
    }
}

/// The five prompt sections in order: task, tools, observations, attention
/// points, output format.
pub fn build_system_prompt(config: &AgentConfig, registry: &ToolRegistry, memory: &DialogueMemory, junction: &str) -> String {
    let t = memory.cycle_entries(memory.cycle).next().map(|e| e.t).unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "# Task description\n{}", config.task_description);
    let _ = writeln!(out, "Intersection: {junction}. Decision cycle {}, t = {t} s.\n", memory.cycle);
    out.push_str("# Tools\n");
    match config.mode {
        AgentMode::Tools => {
            for spec in registry.specs() {
                let _ = writeln!(out, "{}", spec.render());
            }
        }
        AgentMode::Vanilla => out.push_str("No tools are available. The current intersection state is listed under Observations.\n"),
    }
    out.push_str("\n# Observations\n## This cycle:\n");
    render_cycle(&mut out, memory, memory.cycle);
    let _ = writeln!(out, "## Earlier cycles (last {}):", config.history_cycles);
    render_history(&mut out, memory, config.history_cycles);
    out.push_str("\n# Attention points\n");
    for point in ATTENTION_POINTS {
        let _ = writeln!(out, "- {point}");
    }
    out.push_str("\n# Output format\n");
    out.push_str(match config.mode {
        AgentMode::Tools => OUTPUT_FORMAT,
        AgentMode::Vanilla => VANILLA_OUTPUT_FORMAT,
    });
    out.push('\n');
    out
}

/// Chat messages for one backend turn.
pub fn build_messages(request: &BackendRequest<'_>) -> Vec<ChatMessage> {
    vec![
        ChatMessage {
            role: "system".into(),
            content: request.system_prompt(),
        },
        ChatMessage {
            role: "user".into(),
            content: format!(
                "Intersection {}, t = {} s: {}",
                request.junction,
                request.clock,
                match request.config.mode {
                    AgentMode::Tools => "call one tool or give your decision.",
                    AgentMode::Vanilla => "give your decision.",
                }
            ),
        },
    ]
}
