//! Deterministic 1-second lane-queue simulator.
//!
//! Vehicles travel in free flow along links and join a FIFO point queue per
//! lane when they reach its tail. Green movements discharge one vehicle per
//! lane every [`SATURATION_HEADWAY_S`] seconds. Randomness comes from a
//! ChaCha8 generator seeded with the run seed (stream 0).

mod detector;
mod scenario;
mod topology;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::TripRecord;
use crate::net::{validate_network, PhaseId, RoadNetwork};

pub use detector::{DetectorSnapshot, MovementReading, SituationItem, FAILED_OCCUPANCY, FAILED_QUEUE};
pub use scenario::{
    generate_scenario, generate_scenario_with, EmvSpawn, EventSchedule, Roadblock, ScenarioKind,
    ScenarioParams, SensorOutage,
};
pub(crate) use topology::Topology;

pub const MAX_SPEED_MPS: f64 = 13.9;
pub const VEHICLE_LENGTH_M: f64 = 5.0;
pub const MIN_GAP_M: f64 = 2.5;
pub const QUEUE_SPACING_M: f64 = VEHICLE_LENGTH_M + MIN_GAP_M;
pub const SATURATION_HEADWAY_S: u64 = 2;
pub const YELLOW_S: u8 = 3;
pub const STOPPED_SPEED_MPS: f64 = 0.1;
pub const SPEED_MEAN_MPS: f64 = 10.0;
pub const SPEED_VARIANCE: f64 = 3.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid event schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
    #[error("simulation clock {clock} has reached the horizon {horizon}")]
    ClockExhausted { clock: u64, horizon: u64 },
    #[error("unknown junction {0}")]
    UnknownJunction(String),
    #[error("junction {junction} has no phase {phase}")]
    UnknownPhase { junction: String, phase: String },
    #[error("junction {0} is in a yellow transition")]
    IllegalDuringYellow(String),
    #[error("unknown route {0}")]
    UnknownRoute(String),
}

/// Hourly arrival rates per route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub rates: BTreeMap<String, f64>,
}

impl DemandProfile {
    /// Rates declared in (or defaulted by) the network file.
    pub fn from_network(net: &RoadNetwork) -> DemandProfile {
        DemandProfile {
            rates: net.demand.clone(),
        }
    }

    pub fn uniform(net: &RoadNetwork, per_route: f64) -> DemandProfile {
        DemandProfile {
            rates: net.routes.iter().map(|r| (r.id.clone(), per_route)).collect(),
        }
    }

    pub fn zero(net: &RoadNetwork) -> DemandProfile {
        DemandProfile::uniform(net, 0.0)
    }

    pub fn scaled(&self, factor: f64) -> DemandProfile {
        DemandProfile {
            rates: self.rates.iter().map(|(k, v)| (k.clone(), v * factor)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SignalMode {
    Green,
    Yellow { remaining: u8, next_phase: PhaseId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub junction: String,
    pub active_phase: PhaseId,
    #[serde(flatten)]
    pub mode: SignalMode,
    pub green_elapsed: u64,
}

impl SignalState {
    pub fn is_green(&self) -> bool {
        matches!(self.mode, SignalMode::Green)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VehiclePosition {
    OnLink { link: String, offset: f64 },
    InQueue { lane: String, index: usize },
}

/// Read-only view of one vehicle on the network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleState {
    pub id: u64,
    pub route: String,
    pub is_emergency: bool,
    pub desired_speed: f64,
    pub position: VehiclePosition,
    pub depart_time: u64,
    pub cumulative_wait: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Spawn { vehicle: u64, route: String, emergency: bool },
    Arrive { vehicle: u64, travel_time: u64, wait: u64 },
    PhaseChange { junction: String, phase: PhaseId, mode: &'static str },
    BlockStart { link: String },
    BlockEnd { link: String },
    OutageStart { junction: String, approach: String },
    OutageEnd { junction: String, approach: String },
}

impl SimEvent {
    /// One NDJSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Vehicle {
    id: u64,
    route: usize,
    leg: usize,
    lane: usize,
    /// Distance from the start of the current link.
    offset: f64,
    queued: bool,
    emergency: bool,
    desired_speed: f64,
    depart: u64,
    wait: u64,
}

/// Full dynamic state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    topo: Arc<Topology>,
    clock: u64,
    horizon: u64,
    rng: ChaCha8Rng,
    speed_dist: Normal<f64>,
    /// Arrival rate per route index, vehicles per second.
    rates: Vec<f64>,
    schedule: EventSchedule,
    vehicles: BTreeMap<u64, Vehicle>,
    queues: Vec<VecDeque<u64>>,
    /// Moving plus queued vehicles assigned to each lane.
    lane_load: Vec<u32>,
    lane_next_service: Vec<u64>,
    link_count: Vec<usize>,
    signals: Vec<SignalState>,
    blocked: Vec<bool>,
    /// `outage[j][a]` for approach `a` of junction `j`.
    outage: Vec<Vec<bool>>,
    /// Vehicles that entered each movement's incoming lanes, per junction.
    movement_arrivals: Vec<Vec<u64>>,
    next_vehicle: u64,
    spawned: u64,
    arrived: u64,
    wait_samples: u64,
    trip_log: Vec<TripRecord>,
    last_discharges: Vec<(usize, usize)>,
    pending: Vec<SimEvent>,
}

/// Initial state: clock 0, every signal green on P1, no vehicles.
pub fn init_simulation(
    net: &RoadNetwork,
    demand: &DemandProfile,
    schedule: &EventSchedule,
    seed: u64,
) -> Result<SimState, SimError> {
    let report = validate_network(net);
    if let Some(v) = report.violations.first() {
        return Err(SimError::InvalidNetwork(v.to_string()));
    }
    schedule.validate(net)?;
    let topo = Topology::compile(net);
    let mut rates = vec![0.0; topo.routes.len()];
    for (route, rate) in &demand.rates {
        let Some(&idx) = topo.route_index.get(route) else {
            return Err(SimError::InvalidDemand(format!("unknown route {route}")));
        };
        if !(rate.is_finite() && *rate >= 0.0) {
            return Err(SimError::InvalidDemand(format!("route {route} has rate {rate}")));
        }
        rates[idx] = rate / 3600.0;
    }
    let signals = topo
        .junctions
        .iter()
        .map(|j| SignalState {
            junction: j.id.clone(),
            active_phase: PhaseId(1),
            mode: SignalMode::Green,
            green_elapsed: 0,
        })
        .collect();
    let lanes = topo.lanes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    Ok(SimState {
        clock: 0,
        horizon: schedule.horizon as u64,
        rng,
        speed_dist: Normal::new(SPEED_MEAN_MPS, SPEED_VARIANCE.sqrt()).expect("finite parameters"),
        rates,
        schedule: schedule.clone(),
        vehicles: BTreeMap::new(),
        queues: vec![VecDeque::new(); lanes],
        lane_load: vec![0; lanes],
        lane_next_service: vec![0; lanes],
        link_count: vec![0; topo.links.len()],
        signals,
        blocked: vec![false; topo.links.len()],
        outage: topo.junctions.iter().map(|j| vec![false; j.approaches.len()]).collect(),
        movement_arrivals: topo.junctions.iter().map(|j| vec![0; j.movements.len()]).collect(),
        next_vehicle: 0,
        spawned: 0,
        arrived: 0,
        wait_samples: 0,
        trip_log: Vec::new(),
        last_discharges: Vec::new(),
        pending: Vec::new(),
        topo: Arc::new(topo),
    })
}

/// Where a test or scripted setup wants a vehicle placed.
#[derive(Debug, Clone)]
pub struct Placement {
    pub route: String,
    /// Index of the route link the vehicle is on.
    pub leg: usize,
    /// Distance still to travel to the end of that link.
    pub distance_to_end: f64,
    pub speed: f64,
    pub emergency: bool,
    /// Join the lane queue immediately instead of moving.
    pub queued: bool,
}

impl SimState {
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn schedule(&self) -> &EventSchedule {
        &self.schedule
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn arrived(&self) -> u64 {
        self.arrived
    }

    pub fn on_network(&self) -> u64 {
        self.vehicles.len() as u64
    }

    /// Vehicle-seconds spent below the stop speed so far.
    pub fn wait_samples(&self) -> u64 {
        self.wait_samples
    }

    pub fn junction_ids(&self) -> impl Iterator<Item = &str> {
        self.topo.junctions.iter().map(|j| j.id.as_str())
    }

    pub fn signal(&self, junction: &str) -> Result<&SignalState, SimError> {
        let j = self.junction_idx(junction)?;
        Ok(&self.signals[j])
    }

    pub fn signals(&self) -> &[SignalState] {
        &self.signals
    }

    pub fn phase_ids(&self, junction: &str) -> Result<Vec<PhaseId>, SimError> {
        let j = self.junction_idx(junction)?;
        Ok((0..self.topo.junctions[j].phase_count()).map(PhaseId::from_index).collect())
    }

    /// Movement ids served by each phase, in plan order.
    pub fn phase_movements(&self, junction: &str) -> Result<Vec<(PhaseId, Vec<String>)>, SimError> {
        let j = &self.topo.junctions[self.junction_idx(junction)?];
        Ok(j.phases
            .iter()
            .enumerate()
            .map(|(i, ms)| (PhaseId::from_index(i), ms.iter().map(|&m| j.movements[m].id.clone()).collect()))
            .collect())
    }

    pub fn is_blocked(&self, link: &str) -> bool {
        self.topo.link_index.get(link).is_some_and(|&l| self.blocked[l])
    }

    pub fn lane_queue(&self, lane: &str) -> Option<Vec<u64>> {
        let &idx = self.topo.lane_index.get(lane)?;
        Some(self.queues[idx].iter().copied().collect())
    }

    /// Movements (junction id, movement id) that discharged in the last step.
    pub fn last_discharges(&self) -> Vec<(&str, &str)> {
        self.last_discharges
            .iter()
            .map(|&(j, m)| {
                let junction = &self.topo.junctions[j];
                (junction.id.as_str(), junction.movements[m].id.as_str())
            })
            .collect()
    }

    pub fn vehicles(&self) -> Vec<VehicleState> {
        self.vehicles.values().map(|v| self.view(v)).collect()
    }

    pub fn vehicle(&self, id: u64) -> Option<VehicleState> {
        self.vehicles.get(&id).map(|v| self.view(v))
    }

    fn view(&self, v: &Vehicle) -> VehicleState {
        let link = &self.topo.links[self.topo.routes[v.route].links[v.leg]];
        let position = if v.queued {
            VehiclePosition::InQueue {
                lane: self.topo.lanes[v.lane].id.clone(),
                index: self.queues[v.lane].iter().position(|&id| id == v.id).unwrap_or(0),
            }
        } else {
            VehiclePosition::OnLink {
                link: link.id.clone(),
                offset: v.offset,
            }
        };
        VehicleState {
            id: v.id,
            route: self.topo.routes[v.route].id.clone(),
            is_emergency: v.emergency,
            desired_speed: v.desired_speed,
            position,
            depart_time: v.depart,
            cumulative_wait: v.wait,
        }
    }

    /// Completed trips so far.
    pub fn completed_trips(&self) -> &[TripRecord] {
        &self.trip_log
    }

    /// Completed trips followed by the vehicles still on the network.
    pub fn trip_records(&self) -> Vec<TripRecord> {
        let mut out = self.trip_log.clone();
        out.extend(self.vehicles.values().map(|v| TripRecord {
            vehicle: v.id,
            is_emergency: v.emergency,
            depart_time: v.depart,
            arrive_time: None,
            cumulative_wait: v.wait,
            route: self.topo.routes[v.route].id.clone(),
        }));
        out
    }

    pub(crate) fn topology(&self) -> &Topology {
        &self.topo
    }

    pub(crate) fn junction_idx(&self, junction: &str) -> Result<usize, SimError> {
        self.topo
            .junction_index
            .get(junction)
            .copied()
            .ok_or_else(|| SimError::UnknownJunction(junction.to_string()))
    }

    /// Requests `target` at a junction. Holding the active phase keeps the
    /// green running; any other phase starts a 3 s yellow first.
    pub fn command_phase(&mut self, junction: &str, target: PhaseId) -> Result<(), SimError> {
        let j = self.junction_idx(junction)?;
        if !self.topo.junctions[j].has_phase(target) {
            return Err(SimError::UnknownPhase {
                junction: junction.to_string(),
                phase: target.to_string(),
            });
        }
        let signal = &mut self.signals[j];
        if !signal.is_green() {
            return Err(SimError::IllegalDuringYellow(junction.to_string()));
        }
        if signal.active_phase != target {
            signal.mode = SignalMode::Yellow {
                remaining: YELLOW_S,
                next_phase: target,
            };
            self.pending.push(SimEvent {
                t: self.clock,
                kind: EventKind::PhaseChange {
                    junction: junction.to_string(),
                    phase: target,
                    mode: "yellow",
                },
            });
        }
        Ok(())
    }

    /// Puts a vehicle directly on the network (counts as a spawn).
    pub fn place_vehicle(&mut self, placement: &Placement) -> Result<u64, SimError> {
        let &route = self
            .topo
            .route_index
            .get(&placement.route)
            .ok_or_else(|| SimError::UnknownRoute(placement.route.clone()))?;
        let leg = placement.leg.min(self.topo.routes[route].links.len() - 1);
        let id = self.add_vehicle(route, leg, placement.emergency, placement.speed.clamp(0.01, MAX_SPEED_MPS));
        let v = self.vehicles.get_mut(&id).expect("just added");
        let link = &self.topo.links[self.topo.routes[route].links[leg]];
        v.offset = (link.length - placement.distance_to_end).clamp(0.0, link.length);
        if placement.queued && link.to_junction.is_some() {
            let lane = v.lane;
            v.queued = true;
            v.offset = link.length - self.queues[lane].len() as f64 * QUEUE_SPACING_M;
            self.queues[lane].push_back(id);
        }
        Ok(id)
    }

    /// Advances the simulation by one second.
    pub fn step(&mut self) -> Result<Vec<SimEvent>, SimError> {
        if self.clock >= self.horizon {
            return Err(SimError::ClockExhausted {
                clock: self.clock,
                horizon: self.horizon,
            });
        }
        let t = self.clock;
        let mut events = std::mem::take(&mut self.pending);
        self.update_incidents(t, &mut events);
        self.spawn(t, &mut events);
        self.advance(t, &mut events);
        self.discharge(t);
        self.tick_signals(t, &mut events);
        self.account_waiting();
        self.clock += 1;
        Ok(events)
    }

    fn update_incidents(&mut self, t: u64, events: &mut Vec<SimEvent>) {
        let now = t as i64;
        for (l, link) in self.topo.links.iter().enumerate() {
            let active = self.schedule.roadblock_active(&link.id, now);
            if active != self.blocked[l] {
                self.blocked[l] = active;
                let kind = if active {
                    EventKind::BlockStart { link: link.id.clone() }
                } else {
                    EventKind::BlockEnd { link: link.id.clone() }
                };
                events.push(SimEvent { t, kind });
            }
        }
        for (j, junction) in self.topo.junctions.iter().enumerate() {
            for (a, approach) in junction.approaches.iter().enumerate() {
                let active = self.schedule.outage_active(&junction.id, &approach.id, now);
                if active != self.outage[j][a] {
                    self.outage[j][a] = active;
                    let (junction, approach) = (junction.id.clone(), approach.id.clone());
                    let kind = if active {
                        EventKind::OutageStart { junction, approach }
                    } else {
                        EventKind::OutageEnd { junction, approach }
                    };
                    events.push(SimEvent { t, kind });
                }
            }
        }
    }

    fn sample_speed(&mut self) -> f64 {
        loop {
            let s = self.speed_dist.sample(&mut self.rng);
            if s > 0.0 && s <= MAX_SPEED_MPS {
                return s;
            }
        }
    }

    fn spawn(&mut self, t: u64, events: &mut Vec<SimEvent>) {
        let share = self.schedule.emergency_share;
        for route in 0..self.rates.len() {
            let rate = self.rates[route];
            if rate <= 0.0 {
                continue;
            }
            let count = Poisson::new(rate).expect("positive rate").sample(&mut self.rng) as u64;
            for _ in 0..count {
                let emergency = share > 0.0 && self.rng.random_bool(share);
                let route = if emergency {
                    self.rng.random_range(0..self.topo.routes.len())
                } else {
                    route
                };
                let speed = self.sample_speed();
                let id = self.add_vehicle(route, 0, emergency, speed);
                events.push(SimEvent {
                    t,
                    kind: EventKind::Spawn {
                        vehicle: id,
                        route: self.topo.routes[route].id.clone(),
                        emergency,
                    },
                });
            }
        }
        let scheduled: Vec<usize> = self
            .schedule
            .emv_spawns
            .iter()
            .filter(|s| s.time == t as i64)
            .map(|s| self.topo.route_index[&s.route])
            .collect();
        for route in scheduled {
            let speed = self.sample_speed();
            let id = self.add_vehicle(route, 0, true, speed);
            events.push(SimEvent {
                t,
                kind: EventKind::Spawn {
                    vehicle: id,
                    route: self.topo.routes[route].id.clone(),
                    emergency: true,
                },
            });
        }
    }

    fn add_vehicle(&mut self, route: usize, leg: usize, emergency: bool, desired_speed: f64) -> u64 {
        let id = self.next_vehicle;
        self.next_vehicle += 1;
        self.spawned += 1;
        let mut v = Vehicle {
            id,
            route,
            leg,
            lane: 0,
            offset: 0.0,
            queued: false,
            emergency,
            desired_speed,
            depart: self.clock,
            wait: 0,
        };
        self.enter_link(&mut v);
        self.vehicles.insert(id, v);
        id
    }

    /// Assigns a lane on the vehicle's current link and updates counters.
    fn enter_link(&mut self, v: &mut Vehicle) {
        let route = &self.topo.routes[v.route];
        let link = &self.topo.links[route.links[v.leg]];
        let candidates: Vec<usize> = match route.turns.get(v.leg) {
            Some(&(j, m)) => {
                self.movement_arrivals[j][m] += 1;
                self.topo.junctions[j].movements[m].lanes.clone()
            }
            None => link.lanes().collect(),
        };
        let lane = *candidates
            .iter()
            .min_by_key(|&&l| (self.lane_load[l], l))
            .expect("movement has lanes");
        v.lane = lane;
        v.offset = 0.0;
        v.queued = false;
        self.lane_load[lane] += 1;
        self.link_count[route.links[v.leg]] += 1;
    }

    fn advance(&mut self, t: u64, events: &mut Vec<SimEvent>) {
        let topo = Arc::clone(&self.topo);
        let mut joining: Vec<(usize, f64, u64)> = Vec::new();
        let mut arriving: Vec<u64> = Vec::new();
        for v in self.vehicles.values_mut().filter(|v| !v.queued) {
            let link = &topo.links[topo.routes[v.route].links[v.leg]];
            v.offset += v.desired_speed.min(MAX_SPEED_MPS);
            let remaining = link.length - v.offset;
            if link.to_junction.is_some() {
                joining.push((v.lane, remaining, v.id));
            } else if remaining <= 0.0 {
                arriving.push(v.id);
            }
        }
        joining.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (lane, remaining, id) in joining {
            let tail = self.queues[lane].len() as f64 * QUEUE_SPACING_M;
            if remaining <= tail {
                let v = self.vehicles.get_mut(&id).expect("moving vehicle");
                let length = topo.links[topo.lanes[lane].link].length;
                v.queued = true;
                v.offset = length - tail;
                self.queues[lane].push_back(id);
            }
        }
        for id in arriving {
            let v = self.vehicles.remove(&id).expect("arriving vehicle");
            self.lane_load[v.lane] -= 1;
            self.link_count[topo.routes[v.route].links[v.leg]] -= 1;
            self.arrived += 1;
            let arrive = t + 1;
            events.push(SimEvent {
                t,
                kind: EventKind::Arrive {
                    vehicle: v.id,
                    travel_time: arrive - v.depart,
                    wait: v.wait,
                },
            });
            self.trip_log.push(TripRecord {
                vehicle: v.id,
                is_emergency: v.emergency,
                depart_time: v.depart,
                arrive_time: Some(arrive),
                cumulative_wait: v.wait,
                route: topo.routes[v.route].id.clone(),
            });
        }
    }

    fn discharge(&mut self, t: u64) {
        let topo = Arc::clone(&self.topo);
        self.last_discharges.clear();
        for (lane, info) in topo.lanes.iter().enumerate() {
            let Some(&head) = self.queues[lane].front() else { continue };
            if self.lane_next_service[lane] > t {
                continue;
            }
            let link = &topo.links[info.link];
            let Some(j) = link.to_junction else { continue };
            let v = &self.vehicles[&head];
            let (_, m) = topo.routes[v.route].turns[v.leg];
            let movement = &topo.junctions[j].movements[m];
            let signal = &self.signals[j];
            let green = match signal.mode {
                SignalMode::Green => topo.junctions[j].green[signal.active_phase.index()][m],
                SignalMode::Yellow { .. } => false,
            };
            if !(green || !movement.signalized()) {
                continue;
            }
            let out = movement.out_link;
            if self.blocked[out] || self.link_count[out] >= topo.links[out].capacity {
                continue;
            }
            self.queues[lane].pop_front();
            self.lane_next_service[lane] = t + SATURATION_HEADWAY_S;
            self.lane_load[lane] -= 1;
            self.link_count[info.link] -= 1;
            self.last_discharges.push((j, m));
            let mut v = self.vehicles.remove(&head).expect("queued vehicle");
            v.leg += 1;
            self.enter_link(&mut v);
            self.vehicles.insert(head, v);
            // shift remaining queue forward
            for (i, &id) in self.queues[lane].iter().enumerate() {
                if let Some(q) = self.vehicles.get_mut(&id) {
                    q.offset = link.length - i as f64 * QUEUE_SPACING_M;
                }
            }
        }
    }

    fn tick_signals(&mut self, t: u64, events: &mut Vec<SimEvent>) {
        for signal in &mut self.signals {
            match signal.mode {
                SignalMode::Green => signal.green_elapsed += 1,
                SignalMode::Yellow { remaining, next_phase } => {
                    if remaining <= 1 {
                        signal.active_phase = next_phase;
                        signal.mode = SignalMode::Green;
                        signal.green_elapsed = 0;
                        // green shows from the next second
                        events.push(SimEvent {
                            t: t + 1,
                            kind: EventKind::PhaseChange {
                                junction: signal.junction.clone(),
                                phase: next_phase,
                                mode: "green",
                            },
                        });
                    } else {
                        signal.mode = SignalMode::Yellow {
                            remaining: remaining - 1,
                            next_phase,
                        };
                    }
                }
            }
        }
    }

    fn account_waiting(&mut self) {
        for v in self.vehicles.values_mut().filter(|v| v.queued) {
            v.wait += 1;
            self.wait_samples += 1;
        }
    }

    /// Steps until the clock reaches `until` (or the horizon).
    pub fn run_until(&mut self, until: u64) -> Result<Vec<SimEvent>, SimError> {
        let mut events = Vec::new();
        while self.clock < until.min(self.horizon) {
            events.extend(self.step()?);
        }
        Ok(events)
    }
}
