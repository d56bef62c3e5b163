//! Deterministic rule-based backend. It never looks at the simulation
//! directly; every input comes from tool observations in memory.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::{AgentMode, BackendError, BackendMessage, BackendRequest, DecisionBackend, DialogueMemory};
use crate::controllers::{maxpressure_choose, phase_pressures};
use crate::net::PhaseId;
use crate::sim::{SignalMode, SignalState, SituationItem};
use crate::tools::{
    GET_AUXILIARY_DECISION, GET_INTERSECTION_LAYOUT, GET_JUNCTION_SITUATION, GET_OCCUPANCY, GET_PHASE_ID,
    GET_QUEUE_LENGTH, GET_SIGNAL_PHASE_STRUCTURE,
};

/// Tools consulted each cycle, in order.
pub const SCRIPTED_SEQUENCE: [&str; 7] = [
    GET_INTERSECTION_LAYOUT,
    GET_SIGNAL_PHASE_STRUCTURE,
    GET_PHASE_ID,
    GET_OCCUPANCY,
    GET_QUEUE_LENGTH,
    GET_JUNCTION_SITUATION,
    GET_AUXILIARY_DECISION,
];

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend;

impl ScriptedBackend {
    pub fn new() -> ScriptedBackend {
        ScriptedBackend
    }
}

impl DecisionBackend for ScriptedBackend {
    fn kind(&self) -> String {
        "scripted".into()
    }

    fn respond(&mut self, request: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        let memory = request.memory;
        if request.config.mode == AgentMode::Tools {
            for tool in SCRIPTED_SEQUENCE {
                if memory.observation(request.cycle, tool).is_none() {
                    return Ok(BackendMessage::call(tool, json!({ "junction_id": request.junction })));
                }
            }
        }
        let view = View::read(memory, request.cycle);
        let (action, justification) = decide(&view);
        Ok(BackendMessage::text(
            json!({ "action": action, "justification": justification }).to_string(),
        ))
    }
}

#[derive(Debug, Clone, Default)]
struct Movement {
    approach: String,
    direction: String,
}

/// What the scripted rules know after reading this cycle's observations.
#[derive(Debug, Clone, Default)]
struct View {
    movements: BTreeMap<String, Movement>,
    plan: Vec<Vec<String>>,
    signal: Option<SignalState>,
    queues: BTreeMap<String, i64>,
    failed: BTreeSet<String>,
    situation: Vec<SituationItem>,
    recommended: Option<PhaseId>,
    downstream: BTreeMap<String, u32>,
    min_green: u64,
}

impl View {
    fn read(memory: &DialogueMemory, cycle: u64) -> View {
        let data = |tool: &str| memory.observation(cycle, tool).map(|o| o.data.clone()).unwrap_or(Value::Null);
        let mut view = View::default();
        if let Value::Object(layout) = data(GET_INTERSECTION_LAYOUT) {
            for (id, m) in layout {
                view.movements.insert(
                    id,
                    Movement {
                        approach: m["approach"].as_str().unwrap_or_default().to_string(),
                        direction: m["direction"].as_str().unwrap_or_default().to_string(),
                    },
                );
            }
        }
        if let Value::Object(phases) = data(GET_SIGNAL_PHASE_STRUCTURE) {
            view.plan = phases
                .values()
                .map(|ms| {
                    ms.as_array()
                        .map(|a| a.iter().filter_map(|m| m.as_str().map(str::to_string)).collect())
                        .unwrap_or_default()
                })
                .collect();
        }
        let phase = data(GET_PHASE_ID);
        if let Some(active) = phase["phase"].as_str().and_then(|p| p.parse().ok()) {
            view.signal = Some(SignalState {
                junction: String::new(),
                active_phase: active,
                mode: SignalMode::Green,
                green_elapsed: phase["green_elapsed"].as_u64().unwrap_or(0),
            });
        }
        if let Value::Object(queues) = data(GET_QUEUE_LENGTH) {
            for (m, q) in queues {
                let q = q.as_i64().unwrap_or(0);
                if q < 0 {
                    view.failed.insert(m.clone());
                }
                view.queues.insert(m, q);
            }
        }
        if let Value::Object(occupancy) = data(GET_OCCUPANCY) {
            for (m, o) in occupancy {
                if o.as_f64().is_some_and(|o| o < 0.0) {
                    view.failed.insert(m);
                }
            }
        }
        view.situation = serde_json::from_value(data(GET_JUNCTION_SITUATION)).unwrap_or_default();
        let aux = data(GET_AUXILIARY_DECISION);
        view.recommended = aux["recommended"].as_str().and_then(|p| p.parse().ok());
        view.downstream = serde_json::from_value(aux["downstream"].clone()).unwrap_or_default();
        view.min_green = aux["min_green"].as_u64().unwrap_or(5);
        view
    }

    /// Queues with failed detectors replaced by the largest observed queue.
    fn effective_queues(&self) -> (BTreeMap<String, i64>, i64) {
        let observed = self
            .queues
            .iter()
            .filter(|(m, _)| !self.failed.contains(*m))
            .map(|(_, &q)| q)
            .max()
            .unwrap_or(0)
            .max(0);
        let queues = self
            .queues
            .iter()
            .map(|(m, &q)| (m.clone(), if self.failed.contains(m) { observed } else { q.max(0) }))
            .collect();
        (queues, observed)
    }

    fn blocked(&self) -> (BTreeSet<String>, Vec<String>) {
        let mut movements = BTreeSet::new();
        let mut links = Vec::new();
        for item in &self.situation {
            if let SituationItem::Roadblock { link, movements: ms } = item {
                links.push(link.clone());
                movements.extend(ms.iter().cloned());
            }
        }
        (movements, links)
    }

    /// Signalized movement whose green would let a vehicle on `movement` go.
    fn served_movement(&self, movement: &str) -> Option<String> {
        if self.plan.iter().any(|p| p.iter().any(|m| m == movement)) {
            return Some(movement.to_string());
        }
        // right turns share the kerb lane with the through movement
        let approach = self.movements.get(movement).map(|m| m.approach.clone());
        let approach = approach.or_else(|| {
            self.situation.iter().find_map(|i| match i {
                SituationItem::Emv { movement: m, label, .. } if m == movement => {
                    label.split('-').next().map(str::to_string)
                }
                _ => None,
            })
        })?;
        self.movements
            .iter()
            .find(|(_, m)| m.approach == approach && m.direction == "s")
            .map(|(id, _)| id.clone())
    }
}

fn list(items: &[String]) -> String {
    items.join(", ")
}

fn best_of(candidates: &[usize], pressures: &[i64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &c in candidates {
        if best.is_none_or(|b| pressures[c] > pressures[b]) {
            best = Some(c);
        }
    }
    best
}

/// The rule table: emergency vehicle, roadblock, failed detector, otherwise
/// the auxiliary recommendation.
fn decide(view: &View) -> (PhaseId, String) {
    let fallback = view.recommended.unwrap_or(PhaseId(1));
    let Some(signal) = view.signal.as_ref() else {
        return (fallback, "Phase state unknown; following the auxiliary decision.".into());
    };
    if view.plan.is_empty() {
        return (fallback, "Phase structure unknown; following the auxiliary decision.".into());
    }
    let current = signal.active_phase.index();
    let (queues, imputed) = view.effective_queues();
    let pressures = phase_pressures(&view.plan, &queues, &view.downstream);
    let (blocked, blocked_links) = view.blocked();
    let feasible: Vec<usize> = (0..view.plan.len())
        .filter(|&p| view.plan[p].iter().all(|m| !blocked.contains(m)))
        .collect();

    for item in &view.situation {
        let SituationItem::Emv {
            vehicle,
            movement,
            label,
            distance,
            queued_ahead,
        } = item
        else {
            continue;
        };
        let Some(target) = view.served_movement(movement) else { continue };
        let serving: Vec<usize> = (0..view.plan.len())
            .filter(|&p| view.plan[p].contains(&target))
            .collect();
        let open: Vec<usize> = serving.iter().copied().filter(|p| feasible.contains(p)).collect();
        let pool = if open.is_empty() { serving } else { open };
        let choice = if pool.contains(&current) {
            Some(current)
        } else {
            best_of(&pool, &pressures)
        };
        if let Some(p) = choice {
            let phase = PhaseId::from_index(p);
            return (
                phase,
                format!(
                    "Emergency vehicle {vehicle} on {movement} ({label}) is {distance:.0} m from the stop line with {queued_ahead} vehicles ahead; {phase} gives {target} green."
                ),
            );
        }
    }

    let any_failed = !view.failed.is_empty();
    let failed: Vec<String> = view.failed.iter().cloned().collect();
    let imputation_note = || {
        format!(
            "Detectors for {} read -100% occupancy, so their queues are imputed as {imputed}, the largest observed queue",
            list(&failed)
        )
    };

    if !blocked.is_empty() && !feasible.is_empty() {
        let excluded: Vec<String> = (0..view.plan.len())
            .filter(|p| !feasible.contains(p))
            .map(|p| PhaseId::from_index(p).to_string())
            .collect();
        let best = best_of(&feasible, &pressures).expect("feasible is not empty");
        let hold = feasible.contains(&current)
            && (signal.green_elapsed < view.min_green || pressures[best] <= pressures[current]);
        let phase = PhaseId::from_index(if hold { current } else { best });
        let mut text = format!(
            "Roadblock on {} stops {}; {} excluded, {phase} has the highest pressure among the remaining phases.",
            list(&blocked_links),
            list(&blocked.iter().cloned().collect::<Vec<_>>()),
            list(&excluded)
        );
        if any_failed {
            text = format!("{}. {text}", imputation_note());
        }
        return (phase, text);
    }

    if any_failed {
        let phase = maxpressure_choose(&view.plan, &queues, &view.downstream, signal, view.min_green);
        return (phase, format!("{}; max pressure on the imputed queues selects {phase}.", imputation_note()));
    }

    (fallback, format!("No incidents; following the max-pressure recommendation {fallback}."))
}
