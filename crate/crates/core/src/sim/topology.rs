//! Index-based view of a [`RoadNetwork`] used on the simulation hot path.

use std::collections::BTreeMap;

use crate::net::{Compass, Direction, PhaseId, RoadNetwork};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LinkInfo {
    pub id: String,
    pub length: f64,
    pub first_lane: usize,
    pub lane_count: usize,
    /// Junction index this link feeds, if any.
    pub to_junction: Option<usize>,
    /// Approach index at `to_junction`.
    pub approach: Option<usize>,
    pub from_junction: Option<usize>,
    /// Vehicles the link can hold at jam spacing.
    pub capacity: usize,
}

impl LinkInfo {
    pub fn lanes(&self) -> std::ops::Range<usize> {
        self.first_lane..self.first_lane + self.lane_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LaneInfo {
    pub id: String,
    pub link: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ApproachInfo {
    pub id: String,
    pub compass: Compass,
    pub in_link: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MovementInfo {
    pub id: String,
    pub label: String,
    pub approach: usize,
    pub direction: Direction,
    pub lanes: Vec<usize>,
    pub out_link: usize,
}

impl MovementInfo {
    pub fn signalized(&self) -> bool {
        self.direction.is_signalized()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct JunctionInfo {
    pub id: String,
    pub approaches: Vec<ApproachInfo>,
    pub movements: Vec<MovementInfo>,
    /// Movement indices per phase, in plan order (phase k is `phases[k-1]`).
    pub phases: Vec<Vec<usize>>,
    /// `green[p][m]` is true when phase index `p` serves movement `m`.
    pub green: Vec<Vec<bool>>,
}

impl JunctionInfo {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    pub fn has_phase(&self, phase: PhaseId) -> bool {
        phase.0 >= 1 && phase.index() < self.phases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RouteInfo {
    pub id: String,
    pub links: Vec<usize>,
    /// (junction, movement) used after leaving `links[i]`; one shorter than `links`.
    pub turns: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Topology {
    pub links: Vec<LinkInfo>,
    pub lanes: Vec<LaneInfo>,
    pub junctions: Vec<JunctionInfo>,
    pub routes: Vec<RouteInfo>,
    pub link_index: BTreeMap<String, usize>,
    pub lane_index: BTreeMap<String, usize>,
    pub junction_index: BTreeMap<String, usize>,
    pub route_index: BTreeMap<String, usize>,
}

impl Topology {
    /// Builds the index. The network must already be valid.
    pub fn compile(net: &RoadNetwork) -> Topology {
        let junction_index: BTreeMap<String, usize> = net
            .junctions
            .keys()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut links = Vec::with_capacity(net.links.len());
        let mut lanes = Vec::new();
        let mut link_index = BTreeMap::new();
        let mut lane_index = BTreeMap::new();
        for (i, link) in net.links.values().enumerate() {
            let first_lane = lanes.len();
            for l in 0..link.lanes {
                let id = link.lane_id(l);
                lane_index.insert(id.clone(), lanes.len());
                lanes.push(LaneInfo { id, link: i });
            }
            let per_lane = (link.length / super::QUEUE_SPACING_M).floor() as usize;
            links.push(LinkInfo {
                id: link.id.clone(),
                length: link.length,
                first_lane,
                lane_count: link.lanes as usize,
                to_junction: junction_index.get(&link.to).copied(),
                approach: None,
                from_junction: junction_index.get(&link.from).copied(),
                capacity: per_lane.max(1) * link.lanes as usize,
            });
            link_index.insert(link.id.clone(), i);
        }

        let mut junctions = Vec::with_capacity(net.junctions.len());
        for (j_idx, junction) in net.junctions.values().enumerate() {
            let approaches: Vec<ApproachInfo> = junction
                .approaches
                .iter()
                .map(|a| ApproachInfo {
                    id: a.id.clone(),
                    compass: a.compass,
                    in_link: link_index[&a.in_link],
                })
                .collect();
            for (a_idx, a) in approaches.iter().enumerate() {
                links[a.in_link].approach = Some(a_idx);
                debug_assert_eq!(links[a.in_link].to_junction, Some(j_idx));
            }
            let movements: Vec<MovementInfo> = junction
                .movements
                .iter()
                .map(|m| MovementInfo {
                    id: m.id.clone(),
                    label: junction.label_of(m),
                    approach: junction
                        .approaches
                        .iter()
                        .position(|a| a.id == m.from)
                        .expect("valid network"),
                    direction: m.direction,
                    lanes: m.lanes.iter().map(|l| lane_index[l]).collect(),
                    out_link: link_index[&m.out_link],
                })
                .collect();
            let phases: Vec<Vec<usize>> = junction
                .phases
                .iter()
                .map(|p| {
                    p.movements
                        .iter()
                        .map(|id| movements.iter().position(|m| &m.id == id).expect("valid network"))
                        .collect()
                })
                .collect();
            let green = phases
                .iter()
                .map(|p| (0..movements.len()).map(|m| p.contains(&m)).collect())
                .collect();
            junctions.push(JunctionInfo {
                id: junction.id.clone(),
                approaches,
                movements,
                phases,
                green,
            });
        }

        let mut routes = Vec::with_capacity(net.routes.len());
        let mut route_index = BTreeMap::new();
        for (r_idx, route) in net.routes.iter().enumerate() {
            let link_ids: Vec<usize> = route.links.iter().map(|l| link_index[l]).collect();
            let turns = link_ids
                .windows(2)
                .map(|w| {
                    let j = links[w[0]].to_junction.expect("route continuity");
                    let a = links[w[0]].approach.expect("route continuity");
                    let m = junctions[j]
                        .movements
                        .iter()
                        .position(|m| m.approach == a && m.out_link == w[1])
                        .expect("route movement");
                    (j, m)
                })
                .collect();
            route_index.insert(route.id.clone(), r_idx);
            routes.push(RouteInfo {
                id: route.id.clone(),
                links: link_ids,
                turns,
            });
        }

        Topology {
            links,
            lanes,
            junctions,
            routes,
            link_index,
            lane_index,
            junction_index,
            route_index,
        }
    }
}
