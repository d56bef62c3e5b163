//! Classical signal controllers: fixed time, real-time Webster, SOTL and
//! max pressure. Each decision is a function of the controller memory and
//! one [`ControllerInputs`] sample.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::net::PhaseId;
use crate::sim::{DetectorSnapshot, SignalState, SimError, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Fixed,
    Webster,
    Sotl,
    Maxpressure,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Fixed,
        ControllerKind::Webster,
        ControllerKind::Sotl,
        ControllerKind::Maxpressure,
    ];
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Fixed => "fixed",
            ControllerKind::Webster => "webster",
            ControllerKind::Sotl => "sotl",
            ControllerKind::Maxpressure => "maxpressure",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(ControllerKind::Fixed),
            "webster" => Ok(ControllerKind::Webster),
            "sotl" => Ok(ControllerKind::Sotl),
            "maxpressure" | "max-pressure" => Ok(ControllerKind::Maxpressure),
            other => Err(format!("unknown controller {other:?}")),
        }
    }
}

/// Tunable constants of all four controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub fixed_green: u64,
    pub webster_window: u64,
    /// Saturation flow, veh/h per lane.
    pub webster_saturation: f64,
    pub webster_min_cycle: f64,
    pub webster_max_cycle: f64,
    pub webster_max_y: f64,
    /// Lost time per phase, seconds.
    pub webster_lost_per_phase: f64,
    pub webster_min_split: f64,
    pub sotl_g_min: u64,
    pub sotl_g_max: u64,
    pub sotl_theta: u32,
    pub mp_g_min: u64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            fixed_green: 30,
            webster_window: 300,
            webster_saturation: 1800.0,
            webster_min_cycle: 30.0,
            webster_max_cycle: 120.0,
            webster_max_y: 0.95,
            webster_lost_per_phase: 3.0,
            webster_min_split: 5.0,
            sotl_g_min: 5,
            sotl_g_max: 60,
            sotl_theta: 3,
            mp_g_min: 5,
        }
    }
}

impl ControllerParams {
    pub const KEYS: [&'static str; 12] = [
        "fixed.green",
        "webster.window",
        "webster.saturation",
        "webster.min_cycle",
        "webster.max_cycle",
        "webster.max_y",
        "webster.lost_per_phase",
        "webster.min_split",
        "sotl.g_min",
        "sotl.g_max",
        "sotl.theta",
        "maxpressure.g_min",
    ];

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .trim()
                .parse()
                .map_err(|_| format!("{key}: cannot parse {value:?}"))
        }
        match key {
            "fixed.green" => self.fixed_green = num(key, value)?,
            "webster.window" => self.webster_window = num(key, value)?,
            "webster.saturation" => self.webster_saturation = num(key, value)?,
            "webster.min_cycle" => self.webster_min_cycle = num(key, value)?,
            "webster.max_cycle" => self.webster_max_cycle = num(key, value)?,
            "webster.max_y" => self.webster_max_y = num(key, value)?,
            "webster.lost_per_phase" => self.webster_lost_per_phase = num(key, value)?,
            "webster.min_split" => self.webster_min_split = num(key, value)?,
            "sotl.g_min" => self.sotl_g_min = num(key, value)?,
            "sotl.g_max" => self.sotl_g_max = num(key, value)?,
            "sotl.theta" => self.sotl_theta = num(key, value)?,
            "maxpressure.g_min" => self.mp_g_min = num(key, value)?,
            _ => {
                return Err(format!(
                    "unknown controller parameter {key:?} (known: {})",
                    Self::KEYS.join(", ")
                ))
            }
        }
        self.check()
    }

    pub fn check(&self) -> Result<(), String> {
        if self.fixed_green == 0 || self.webster_window == 0 {
            return Err("fixed.green and webster.window must be positive".into());
        }
        if self.webster_saturation.is_nan() || self.webster_saturation <= 0.0 {
            return Err("webster.saturation must be positive".into());
        }
        if !(self.webster_min_cycle > 0.0 && self.webster_min_cycle <= self.webster_max_cycle) {
            return Err("webster cycle bounds must satisfy 0 < min_cycle <= max_cycle".into());
        }
        if !(self.webster_max_y > 0.0 && self.webster_max_y < 1.0) {
            return Err("webster.max_y must lie in (0, 1)".into());
        }
        if self.sotl_g_min > self.sotl_g_max {
            return Err("sotl.g_min must not exceed sotl.g_max".into());
        }
        Ok(())
    }
}

/// Everything a controller sees at one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerInputs {
    pub snapshot: DetectorSnapshot,
    /// Queue on each movement's outgoing link.
    pub downstream: BTreeMap<String, u32>,
    pub signal: SignalState,
    /// Movement ids per phase, P1 first.
    pub plan: Vec<Vec<String>>,
}

impl ControllerInputs {
    pub fn gather(sim: &SimState, junction: &str) -> Result<ControllerInputs, SimError> {
        Ok(ControllerInputs {
            snapshot: sim.detector_read(junction)?,
            downstream: sim.downstream_queues(junction)?,
            signal: sim.signal(junction)?.clone(),
            plan: sim.phase_movements(junction)?.into_iter().map(|(_, ms)| ms).collect(),
        })
    }
}

fn next_phase(current: PhaseId, count: usize) -> PhaseId {
    PhaseId::from_index((current.index() + 1) % count)
}

/// Cycles P1..Pk with a fixed green per phase.
pub fn fixed_time_decide(params: &ControllerParams, signal: &SignalState, phase_count: usize) -> PhaseId {
    if signal.green_elapsed >= params.fixed_green {
        next_phase(signal.active_phase, phase_count)
    } else {
        signal.active_phase
    }
}

/// Holds while the current phase has a long queue, within `[g_min, g_max)`.
/// Sentinel readings count as an empty queue.
pub fn sotl_decide(params: &ControllerParams, inputs: &ControllerInputs) -> PhaseId {
    let signal = &inputs.signal;
    if signal.green_elapsed < params.sotl_g_min {
        return signal.active_phase;
    }
    let current = &inputs.plan[signal.active_phase.index()];
    let queue = current
        .iter()
        .filter_map(|m| inputs.snapshot.reading(m))
        .map(|r| r.queue_or_zero())
        .max()
        .unwrap_or(0);
    if queue >= params.sotl_theta && signal.green_elapsed < params.sotl_g_max {
        signal.active_phase
    } else {
        next_phase(signal.active_phase, inputs.plan.len())
    }
}

/// Pressure of every phase from upstream and downstream queue counts.
/// Movements missing from either map count as 0.
pub fn phase_pressures(
    plan: &[Vec<String>],
    upstream: &BTreeMap<String, i64>,
    downstream: &BTreeMap<String, u32>,
) -> Vec<i64> {
    plan.iter()
        .map(|movements| {
            movements
                .iter()
                .map(|m| {
                    upstream.get(m).copied().unwrap_or(0) - downstream.get(m).copied().unwrap_or(0) as i64
                })
                .sum()
        })
        .collect()
}

/// Max-pressure choice over explicit upstream queues. The first phase with
/// the highest pressure wins; the current phase is kept while it has served
/// less than `g_min` or when the winner does not strictly beat it.
pub fn maxpressure_choose(
    plan: &[Vec<String>],
    upstream: &BTreeMap<String, i64>,
    downstream: &BTreeMap<String, u32>,
    signal: &SignalState,
    g_min: u64,
) -> PhaseId {
    let pressures = phase_pressures(plan, upstream, downstream);
    let mut best = 0;
    for (i, &p) in pressures.iter().enumerate() {
        if p > pressures[best] {
            best = i;
        }
    }
    let current = signal.active_phase.index();
    if current >= pressures.len() {
        return PhaseId::from_index(best);
    }
    if signal.green_elapsed < g_min || pressures[best] <= pressures[current] {
        signal.active_phase
    } else {
        PhaseId::from_index(best)
    }
}

/// Upstream queues from a snapshot with sentinels read as zero.
pub fn zero_imputed_queues(snapshot: &DetectorSnapshot) -> BTreeMap<String, i64> {
    snapshot
        .readings
        .iter()
        .map(|r| (r.movement.clone(), r.queue_or_zero() as i64))
        .collect()
}

pub fn maxpressure_decide(params: &ControllerParams, inputs: &ControllerInputs) -> PhaseId {
    maxpressure_choose(
        &inputs.plan,
        &zero_imputed_queues(&inputs.snapshot),
        &inputs.downstream,
        &inputs.signal,
        params.mp_g_min,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsterPlan {
    pub cycle: f64,
    pub lost_time: f64,
    /// Effective green per phase, seconds.
    pub splits: Vec<f64>,
    pub y_total: f64,
}

/// Webster cycle for a total critical ratio over `phases` phases.
pub fn webster_cycle(params: &ControllerParams, y_total: f64, phases: usize) -> f64 {
    let lost = params.webster_lost_per_phase * phases as f64;
    let y = y_total.clamp(0.0, params.webster_max_y);
    ((1.5 * lost + 5.0) / (1.0 - y)).clamp(params.webster_min_cycle, params.webster_max_cycle)
}

/// Cycle and splits from per-phase critical flow ratios. Splits are shared
/// in proportion to the ratios (equally when all are zero) and never drop
/// below the minimum split.
pub fn webster_plan(params: &ControllerParams, ratios: &[f64]) -> WebsterPlan {
    let k = ratios.len();
    let raw: f64 = ratios.iter().sum();
    let cycle = webster_cycle(params, raw, k);
    let lost = params.webster_lost_per_phase * k as f64;
    let green = (cycle - lost).max(0.0);
    let splits = ratios
        .iter()
        .map(|&y| {
            let share = if raw > 0.0 { y / raw } else { 1.0 / k as f64 };
            (green * share).max(params.webster_min_split)
        })
        .collect();
    WebsterPlan {
        cycle,
        lost_time: lost,
        splits,
        y_total: raw.min(params.webster_max_y),
    }
}

/// Trailing window of cumulative arrival counters for one junction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowWindow {
    samples: VecDeque<(u64, BTreeMap<String, u64>)>,
}

impl FlowWindow {
    pub fn record(&mut self, snapshot: &DetectorSnapshot, window: u64) {
        let counts = snapshot
            .readings
            .iter()
            .filter_map(|r| r.arrivals.map(|a| (r.movement.clone(), a)))
            .collect();
        self.samples.push_back((snapshot.clock, counts));
        while self
            .samples
            .front()
            .is_some_and(|(t, _)| t + window < snapshot.clock)
        {
            self.samples.pop_front();
        }
    }

    pub fn oldest(&self) -> Option<u64> {
        self.samples.front().map(|(t, _)| *t)
    }

    /// Hourly flow of a movement over the window.
    pub fn flow(&self, movement: &str) -> f64 {
        let with: Vec<(u64, u64)> = self
            .samples
            .iter()
            .filter_map(|(t, c)| c.get(movement).map(|&a| (*t, a)))
            .collect();
        match (with.first(), with.last()) {
            (Some(&(t0, a0)), Some(&(t1, a1))) if t1 > t0 => (a1 - a0) as f64 * 3600.0 / (t1 - t0) as f64,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct JunctionMemory {
    window: FlowWindow,
    plan: Option<WebsterPlan>,
}

/// A controller plus its per-junction memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub kind: ControllerKind,
    pub params: ControllerParams,
    memory: BTreeMap<String, JunctionMemory>,
}

impl Controller {
    pub fn new(kind: ControllerKind, params: ControllerParams) -> Controller {
        Controller {
            kind,
            params,
            memory: BTreeMap::new(),
        }
    }

    /// The Webster plan currently in force at a junction, if one was computed.
    pub fn webster_plan_of(&self, junction: &str) -> Option<&WebsterPlan> {
        self.memory.get(junction).and_then(|m| m.plan.as_ref())
    }

    pub fn decide(&mut self, inputs: &ControllerInputs) -> PhaseId {
        match self.kind {
            ControllerKind::Fixed => fixed_time_decide(&self.params, &inputs.signal, inputs.plan.len()),
            ControllerKind::Sotl => sotl_decide(&self.params, inputs),
            ControllerKind::Maxpressure => maxpressure_decide(&self.params, inputs),
            ControllerKind::Webster => self.webster_decide(inputs),
        }
    }

    fn webster_decide(&mut self, inputs: &ControllerInputs) -> PhaseId {
        let params = &self.params;
        let memory = self.memory.entry(inputs.snapshot.junction.clone()).or_default();
        memory.window.record(&inputs.snapshot, params.webster_window);
        let signal = &inputs.signal;
        if inputs.snapshot.clock < params.webster_window {
            return fixed_time_decide(params, signal, inputs.plan.len());
        }
        let split = |plan: &WebsterPlan| plan.splits[signal.active_phase.index()];
        if let Some(plan) = &memory.plan {
            if (signal.green_elapsed as f64) < split(plan) {
                return signal.active_phase;
            }
        }
        let next = next_phase(signal.active_phase, inputs.plan.len());
        if memory.plan.is_none() || next.index() == 0 {
            let ratios: Vec<f64> = inputs
                .plan
                .iter()
                .map(|movements| {
                    movements
                        .iter()
                        .filter_map(|m| inputs.snapshot.reading(m))
                        .map(|r| memory.window.flow(&r.movement) / (r.lanes as f64 * params.webster_saturation))
                        .fold(0.0, f64::max)
                })
                .collect();
            memory.plan = Some(webster_plan(params, &ratios));
        }
        next
    }
}
