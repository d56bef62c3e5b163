//! Loop-detector readings and the situation scan, both limited to the
//! detector range upstream of each stop line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SimError, SimState, VehiclePosition, QUEUE_SPACING_M, VEHICLE_LENGTH_M};
use crate::net::{Direction, DETECTOR_RANGE_M};

/// Sentinel occupancy reported by a failed detector.
pub const FAILED_OCCUPANCY: f64 = -1.0;
/// Sentinel queue count reported by a failed detector.
pub const FAILED_QUEUE: i64 = -1;

/// Queue slots visible to the detector on one lane.
pub(crate) fn visible_slots() -> usize {
    (DETECTOR_RANGE_M / QUEUE_SPACING_M).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementReading {
    pub movement: String,
    /// Approach-direction label such as `E1-s`.
    pub label: String,
    pub approach: String,
    pub direction: Direction,
    pub lanes: u32,
    pub occupancy: f64,
    pub queue_count: i64,
    pub approach_failed: bool,
    /// Vehicles that have entered this movement's lanes since the start of
    /// the run; `None` while the detector is down.
    pub arrivals: Option<u64>,
}

impl MovementReading {
    pub fn is_sentinel(&self) -> bool {
        self.approach_failed
    }

    /// Queue with sentinels read as zero.
    pub fn queue_or_zero(&self) -> u32 {
        self.queue_count.max(0) as u32
    }
}

/// Signalized movements of one junction, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSnapshot {
    pub junction: String,
    pub clock: u64,
    pub readings: Vec<MovementReading>,
}

impl DetectorSnapshot {
    pub fn reading(&self, movement: &str) -> Option<&MovementReading> {
        self.readings.iter().find(|r| r.movement == movement)
    }

    pub fn any_failed(&self) -> bool {
        self.readings.iter().any(|r| r.approach_failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum SituationItem {
    Emv {
        vehicle: u64,
        movement: String,
        label: String,
        distance: f64,
        queued_ahead: u32,
    },
    Roadblock {
        link: String,
        movements: Vec<String>,
    },
}

impl SimState {
    pub fn detector_read(&self, junction: &str) -> Result<DetectorSnapshot, SimError> {
        let j = self.junction_idx(junction)?;
        let topo = self.topology();
        let info = &topo.junctions[j];
        let mut readings = Vec::new();
        for (m, movement) in info.movements.iter().enumerate() {
            if !movement.signalized() {
                continue;
            }
            let approach = &info.approaches[movement.approach];
            let failed = self.outage[j][movement.approach];
            let lanes = movement.lanes.len() as u32;
            let (occupancy, queue_count, arrivals) = if failed {
                (FAILED_OCCUPANCY, FAILED_QUEUE, None)
            } else {
                let present: usize = movement.lanes.iter().map(|&l| self.lane_presence(l)).sum();
                let queued: usize = movement.lanes.iter().map(|&l| self.visible_queue(l)).sum();
                let occupancy = (VEHICLE_LENGTH_M * present as f64 / (DETECTOR_RANGE_M * lanes as f64)).min(1.0);
                (occupancy, queued as i64, Some(self.movement_arrivals[j][m]))
            };
            readings.push(MovementReading {
                movement: movement.id.clone(),
                label: movement.label.clone(),
                approach: approach.id.clone(),
                direction: movement.direction,
                lanes,
                occupancy,
                queue_count,
                approach_failed: failed,
                arrivals,
            });
        }
        Ok(DetectorSnapshot {
            junction: info.id.clone(),
            clock: self.clock,
            readings,
        })
    }

    /// Queued vehicles within detector range on one lane.
    fn visible_queue(&self, lane: usize) -> usize {
        self.queues[lane].len().min(visible_slots())
    }

    /// Vehicles within detector range of the stop line on one lane.
    fn lane_presence(&self, lane: usize) -> usize {
        let topo = self.topology();
        let length = topo.links[topo.lanes[lane].link].length;
        let moving = self
            .vehicles
            .values()
            .filter(|v| !v.queued && v.lane == lane && length - v.offset < DETECTOR_RANGE_M)
            .count();
        self.visible_queue(lane) + moving
    }

    /// Queue on each signalized movement's outgoing link, keyed by movement id.
    /// Boundary sinks and failed downstream detectors read as zero.
    pub fn downstream_queues(&self, junction: &str) -> Result<BTreeMap<String, u32>, SimError> {
        let j = self.junction_idx(junction)?;
        let topo = self.topology();
        let mut out = BTreeMap::new();
        for movement in topo.junctions[j].movements.iter().filter(|m| m.signalized()) {
            let link = &topo.links[movement.out_link];
            let queued = match (link.to_junction, link.approach) {
                (Some(next), Some(a)) if !self.outage[next][a] => {
                    link.lanes().map(|l| self.visible_queue(l)).sum::<usize>() as u32
                }
                _ => 0,
            };
            out.insert(movement.id.clone(), queued);
        }
        Ok(out)
    }

    /// Emergency vehicles approaching within detector range, nearest first,
    /// then active roadblocks on links leaving the junction.
    pub fn junction_situation_scan(&self, junction: &str) -> Result<Vec<SituationItem>, SimError> {
        let j = self.junction_idx(junction)?;
        let topo = self.topology();
        let info = &topo.junctions[j];
        let mut emvs = Vec::new();
        for v in self.vehicles.values().filter(|v| v.emergency) {
            let route = &topo.routes[v.route];
            let Some(&(tj, m)) = route.turns.get(v.leg) else { continue };
            if tj != j {
                continue;
            }
            let length = topo.links[route.links[v.leg]].length;
            let distance = (length - v.offset).max(0.0);
            if distance >= DETECTOR_RANGE_M {
                continue;
            }
            let queued_ahead = if v.queued {
                self.queues[v.lane].iter().position(|&id| id == v.id).unwrap_or(0)
            } else {
                self.queues[v.lane].len()
            };
            emvs.push(SituationItem::Emv {
                vehicle: v.id,
                movement: info.movements[m].id.clone(),
                label: info.movements[m].label.clone(),
                distance,
                queued_ahead: queued_ahead as u32,
            });
        }
        emvs.sort_by(|a, b| match (a, b) {
            (
                SituationItem::Emv { distance: da, vehicle: va, .. },
                SituationItem::Emv { distance: db, vehicle: vb, .. },
            ) => da.total_cmp(db).then(va.cmp(vb)),
            _ => std::cmp::Ordering::Equal,
        });
        let mut items = emvs;
        for (l, link) in topo.links.iter().enumerate() {
            if link.from_junction != Some(j) || !self.blocked[l] {
                continue;
            }
            let movements = info
                .movements
                .iter()
                .filter(|m| m.out_link == l)
                .map(|m| m.id.clone())
                .collect();
            items.push(SituationItem::Roadblock {
                link: link.id.clone(),
                movements,
            });
        }
        Ok(items)
    }
}

impl VehiclePosition {
    pub fn is_queued(&self) -> bool {
        matches!(self, VehiclePosition::InQueue { .. })
    }
}
