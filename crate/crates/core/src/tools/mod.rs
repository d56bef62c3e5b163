//! The ten intersection tools offered to the decision agent. Each tool has a
//! four-part prompt card (description, input, output, example), a checked
//! argument list and a read-only implementation over the simulation.

mod specs;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::agent::parse::{parse_decision, phase_from_value};
use crate::controllers::{maxpressure_decide, phase_pressures, zero_imputed_queues, ControllerInputs, ControllerParams};
use crate::net::{Direction, PhaseId};
use crate::sim::{SignalMode, SimError, SimState, SituationItem};

pub use specs::{ParamKind, ParamSpec, ToolSpec};

pub const GET_INTERSECTION_LAYOUT: &str = "Get_Intersection_Layout";
pub const GET_SIGNAL_PHASE_STRUCTURE: &str = "Get_Signal_Phase_Structure";
pub const GET_OCCUPANCY: &str = "Get_Occupancy";
pub const GET_QUEUE_LENGTH: &str = "Get_Queue_Length";
pub const GET_PHASE_ID: &str = "Get_Phase_ID";
pub const GET_JUNCTION_SITUATION: &str = "Get_Junction_Situation";
pub const GET_AUXILIARY_DECISION: &str = "Get_Auxiliary_Decision";
pub const GET_AVAILABLE_ACTIONS: &str = "Get_Available_Actions";
pub const EVALUATE_ACTION_FEASIBILITY: &str = "Evaluate_Action_Feasibility";
pub const JUSTIFY_DECISION_LOGIC: &str = "Justify_Decision_Logic";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("unknown tool {name}; available tools: {}", available.join(", "))]
    UnknownTool { name: String, available: Vec<String> },
    #[error("bad arguments for {tool}: {message}")]
    ArgumentError { tool: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Structured result plus its prompt rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub data: Value,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool: String,
    pub args: Value,
    pub observation: Observation,
    pub clock: u64,
}

/// One step of the tool trail attached to a justification record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub tool: String,
    pub reading: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationRecord {
    pub clock: u64,
    pub junction: String,
    pub decision: PhaseId,
    pub justification: String,
    /// Set when the backend gave no justification text.
    pub none_given: bool,
    pub trail: Vec<TrailEntry>,
    pub situation: Vec<SituationItem>,
}

/// What a tool may read during one call.
pub struct ToolContext<'a> {
    pub sim: &'a SimState,
    pub params: &'a ControllerParams,
    /// Tools used so far in the current decision cycle.
    pub trail: &'a [TrailEntry],
}

#[derive(Debug, Clone)]
pub struct ToolRegistry {
    specs: Vec<ToolSpec>,
}

impl Default for ToolRegistry {
    fn default() -> Self {
        ToolRegistry::new()
    }
}

/// Validated arguments of one call.
struct Args<'a> {
    map: &'a Map<String, Value>,
}

impl Args<'_> {
    fn text(&self, key: &str) -> &str {
        self.map.get(key).and_then(Value::as_str).unwrap_or("")
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Left => "left",
        Direction::Straight => "through",
        Direction::Right => "right",
    }
}

fn percent(occupancy: f64) -> f64 {
    occupancy * 100.0
}

impl ToolRegistry {
    pub fn new() -> ToolRegistry {
        ToolRegistry { specs: specs::all() }
    }

    pub fn specs(&self) -> &[ToolSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.to_string()).collect()
    }

    /// Machine-readable catalog in function-calling style.
    pub fn catalog(&self) -> Value {
        Value::Array(self.specs.iter().map(ToolSpec::to_catalog_entry).collect())
    }

    fn check_args<'a>(&self, spec: &ToolSpec, args: &'a Value) -> Result<Args<'a>, ToolError> {
        let bad = |message: String| ToolError::ArgumentError {
            tool: spec.name.to_string(),
            message,
        };
        let map = args
            .as_object()
            .ok_or_else(|| bad(format!("arguments must be a JSON object, got {args}")))?;
        for key in map.keys() {
            if !spec.input.iter().any(|p| p.name == key) {
                let known: Vec<&str> = spec.input.iter().map(|p| p.name).collect();
                return Err(bad(format!("unexpected argument {key:?} (expected: {})", known.join(", "))));
            }
        }
        for param in &spec.input {
            match map.get(param.name) {
                None if param.required => return Err(bad(format!("missing required argument {:?}", param.name))),
                None => {}
                Some(v) => {
                    let ok = match param.kind {
                        ParamKind::Text => v.is_string(),
                        ParamKind::Phase => v.is_string() || v.is_u64(),
                    };
                    if !ok {
                        return Err(bad(format!("argument {:?} has the wrong type: {v}", param.name)));
                    }
                }
            }
        }
        Ok(Args { map })
    }

    /// Validates `args` and runs tool `name`. Never mutates the simulation.
    pub fn invoke(&self, name: &str, args: &Value, ctx: &ToolContext<'_>) -> Result<ToolInvocation, ToolError> {
        let spec = self.spec(name).ok_or_else(|| ToolError::UnknownTool {
            name: name.to_string(),
            available: self.names(),
        })?;
        let args_ok = self.check_args(spec, args)?;
        let junction = args_ok.text("junction_id");
        let observation = match spec.name {
            GET_INTERSECTION_LAYOUT => layout(ctx.sim, junction)?,
            GET_SIGNAL_PHASE_STRUCTURE => phase_structure(ctx.sim, junction)?,
            GET_OCCUPANCY => occupancy(ctx.sim, junction)?,
            GET_QUEUE_LENGTH => queue_length(ctx.sim, junction)?,
            GET_PHASE_ID => phase_id(ctx.sim, junction)?,
            GET_JUNCTION_SITUATION => situation(ctx.sim, junction)?,
            GET_AUXILIARY_DECISION => auxiliary(ctx.sim, ctx.params, junction)?,
            GET_AVAILABLE_ACTIONS => available_actions(ctx.sim, junction)?,
            EVALUATE_ACTION_FEASIBILITY => feasibility(ctx.sim, junction, args_ok.text("proposed"))?,
            JUSTIFY_DECISION_LOGIC => justify(ctx, junction, &args_ok)?,
            other => unreachable!("tool {other} has a spec but no implementation"),
        };
        Ok(ToolInvocation {
            tool: spec.name.to_string(),
            args: args.clone(),
            observation,
            clock: ctx.sim.clock(),
        })
    }
}

fn layout(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let j = sim.junction_idx(junction)?;
    let info = &sim.topology().junctions[j];
    let mut data = Map::new();
    let mut text = format!("Intersection {junction} signalized movements:");
    for m in info.movements.iter().filter(|m| m.signalized()) {
        let approach = &info.approaches[m.approach].id;
        let lanes = m.lanes.len();
        data.insert(
            m.id.clone(),
            json!({"approach": approach, "direction": m.direction, "number_of_lanes": lanes}),
        );
        let _ = write!(
            text,
            "\n- {}: from {approach} ({}), {}, {lanes} lane{}",
            m.id,
            info.approaches[m.approach].compass,
            direction_name(m.direction),
            if lanes == 1 { "" } else { "s" }
        );
    }
    Ok(Observation {
        data: Value::Object(data),
        text,
    })
}

fn phase_structure(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let j = sim.junction_idx(junction)?;
    let info = &sim.topology().junctions[j];
    let mut data = Map::new();
    let mut text = format!("Intersection {junction} phases in cycle order:");
    for (i, phase) in info.phases.iter().enumerate() {
        let id = PhaseId::from_index(i).to_string();
        let ids: Vec<&str> = phase.iter().map(|&m| info.movements[m].id.as_str()).collect();
        let labels: Vec<String> = phase
            .iter()
            .map(|&m| format!("{} ({})", info.movements[m].id, info.movements[m].label))
            .collect();
        let _ = write!(text, "\n- {id}: {}", labels.join(", "));
        data.insert(id, json!(ids));
    }
    Ok(Observation {
        data: Value::Object(data),
        text,
    })
}

fn occupancy(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let snap = sim.detector_read(junction)?;
    let mut data = Map::new();
    let mut text = format!("Occupancy within 150 m of the stop line at {junction}:");
    for r in &snap.readings {
        let pct = percent(r.occupancy);
        data.insert(r.movement.clone(), json!(pct));
        let _ = write!(text, "\n- {} ({}): {pct:.2}%", r.movement, r.label);
    }
    Ok(Observation {
        data: Value::Object(data),
        text,
    })
}

fn queue_length(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let snap = sim.detector_read(junction)?;
    let mut data = Map::new();
    let mut text = format!("Queued vehicles at {junction}:");
    for r in &snap.readings {
        data.insert(r.movement.clone(), json!(r.queue_count));
        let _ = write!(text, "\n- {} ({}): {}", r.movement, r.label, r.queue_count);
    }
    Ok(Observation {
        data: Value::Object(data),
        text,
    })
}

fn phase_id(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let s = sim.signal(junction)?;
    let (data, text) = match s.mode {
        SignalMode::Green => (
            json!({"phase": s.active_phase, "mode": "green", "green_elapsed": s.green_elapsed}),
            format!("{junction} shows {} green, held for {} s.", s.active_phase, s.green_elapsed),
        ),
        SignalMode::Yellow { remaining, next_phase } => (
            json!({"phase": s.active_phase, "mode": "yellow", "next_phase": next_phase, "remaining": remaining}),
            format!(
                "{junction} is in yellow after {}, switching to {next_phase} in {remaining} s.",
                s.active_phase
            ),
        ),
    };
    Ok(Observation { data, text })
}

pub(crate) fn render_situation(items: &[SituationItem]) -> String {
    if items.is_empty() {
        return "No emergency vehicles or roadblocks.".to_string();
    }
    let mut lines = Vec::new();
    for item in items {
        lines.push(match item {
            SituationItem::Emv {
                vehicle,
                movement,
                label,
                distance,
                queued_ahead,
            } => format!(
                "- Emergency vehicle {vehicle} on {movement} ({label}), {distance:.1} m from the stop line, {queued_ahead} vehicles queued ahead."
            ),
            SituationItem::Roadblock { link, movements } => format!(
                "- Roadblock on outgoing link {link}; movements {} cannot discharge.",
                movements.join(", ")
            ),
        });
    }
    lines.join("\n")
}

fn situation(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let items = sim.junction_situation_scan(junction)?;
    Ok(Observation {
        text: render_situation(&items),
        data: serde_json::to_value(&items).expect("situation serializes"),
    })
}

fn auxiliary(sim: &SimState, params: &ControllerParams, junction: &str) -> Result<Observation, SimError> {
    let inputs = ControllerInputs::gather(sim, junction)?;
    let choice = maxpressure_decide(params, &inputs);
    let pressures = phase_pressures(&inputs.plan, &zero_imputed_queues(&inputs.snapshot), &inputs.downstream);
    let mut pressure_map = Map::new();
    for (i, p) in pressures.iter().enumerate() {
        pressure_map.insert(PhaseId::from_index(i).to_string(), json!(p));
    }
    let listing: Vec<String> = pressures
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{} {p}", PhaseId::from_index(i)))
        .collect();
    Ok(Observation {
        text: format!(
            "Max-pressure recommends {choice} (phase pressures: {}).",
            listing.join(", ")
        ),
        data: json!({
            "recommended": choice,
            "source": "maxpressure",
            "pressures": pressure_map,
            "downstream": inputs.downstream,
            "min_green": params.mp_g_min,
        }),
    })
}

fn available_actions(sim: &SimState, junction: &str) -> Result<Observation, SimError> {
    let phases: Vec<String> = sim.phase_ids(junction)?.iter().map(ToString::to_string).collect();
    Ok(Observation {
        text: format!("Available actions at {junction}: {}.", phases.join(", ")),
        data: json!(phases),
    })
}

/// Checks a proposed decision text; the reason says what to fix.
pub fn check_feasibility(sim: &SimState, junction: &str, proposed: &str) -> Result<(Option<PhaseId>, String), SimError> {
    let phases = sim.phase_ids(junction)?;
    Ok(match parse_decision(proposed) {
        Err(e) => (None, format!("format violation: {e}")),
        Ok(d) if !phases.contains(&d.action) => {
            let list: Vec<String> = phases.iter().map(ToString::to_string).collect();
            (None, format!("unknown phase {} (available: {})", d.action, list.join(", ")))
        }
        Ok(d) => (Some(d.action), format!("{} is a valid phase", d.action)),
    })
}

fn feasibility(sim: &SimState, junction: &str, proposed: &str) -> Result<Observation, SimError> {
    let (phase, reason) = check_feasibility(sim, junction, proposed)?;
    let ok = phase.is_some();
    Ok(Observation {
        text: if ok {
            format!("Feasible: {reason}.")
        } else {
            format!("Not feasible: {reason}. Revise and resubmit.")
        },
        data: json!({"ok": ok, "reason": reason, "action": phase}),
    })
}

fn justify(ctx: &ToolContext<'_>, junction: &str, args: &Args<'_>) -> Result<Observation, ToolError> {
    let phases = ctx.sim.phase_ids(junction)?;
    let raw = args.map.get("decision").cloned().unwrap_or(Value::Null);
    let decision = phase_from_value(&raw)
        .filter(|p| phases.contains(p))
        .ok_or_else(|| ToolError::ArgumentError {
            tool: JUSTIFY_DECISION_LOGIC.to_string(),
            message: format!("decision {raw} is not an available phase"),
        })?;
    let justification = args.text("justification").trim().to_string();
    let record = JustificationRecord {
        clock: ctx.sim.clock(),
        junction: junction.to_string(),
        decision,
        none_given: justification.is_empty(),
        justification: if justification.is_empty() {
            "none given".to_string()
        } else {
            justification
        },
        trail: ctx.trail.to_vec(),
        situation: ctx.sim.junction_situation_scan(junction)?,
    };
    let tools: Vec<&str> = record.trail.iter().map(|t| t.tool.as_str()).collect();
    Ok(Observation {
        text: format!(
            "Recorded {} at t={} for {junction}: {} (tools used: {}).",
            record.decision,
            record.clock,
            record.justification,
            if tools.is_empty() { "none".to_string() } else { tools.join(", ") }
        ),
        data: serde_json::to_value(&record).expect("record serializes"),
    })
}
