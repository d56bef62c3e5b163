use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{PhaseId, RoadNetwork, DETECTOR_RANGE_M};

/// One broken invariant. `rule` is a stable machine-readable tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            message: message.into(),
        });
    }
}

/// Checks every network invariant; an empty report means the network is valid.
pub fn validate_network(net: &RoadNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_links(net, &mut report);
    check_junctions(net, &mut report);
    check_routes(net, &mut report);
    report
}

fn check_links(net: &RoadNetwork, report: &mut ValidationReport) {
    for (key, link) in &net.links {
        if key != &link.id {
            report.push("duplicate-id", format!("link {} stored under key {key}", link.id));
        }
        if net.is_junction(&link.id) {
            report.push("duplicate-id", format!("link id {} is also a junction id", link.id));
        }
        if link.length.is_nan() || link.length < DETECTOR_RANGE_M {
            report.push(
                "link-length",
                format!(
                    "link {} is {} m long, shorter than the {DETECTOR_RANGE_M} m detector range",
                    link.id, link.length
                ),
            );
        }
        if link.lanes == 0 {
            report.push("link-lanes", format!("link {} has no lanes", link.id));
        }
        if link.from == link.to {
            report.push("link-endpoints", format!("link {} starts and ends at {}", link.id, link.from));
        }
    }
}

fn check_junctions(net: &RoadNetwork, report: &mut ValidationReport) {
    for (key, junction) in &net.junctions {
        let jid = &junction.id;
        if key != jid {
            report.push("duplicate-id", format!("junction {jid} stored under key {key}"));
        }

        let mut seen = BTreeSet::new();
        let mut sides = BTreeSet::new();
        for approach in &junction.approaches {
            if !seen.insert(approach.id.as_str()) {
                report.push("duplicate-id", format!("junction {jid}: approach {} declared twice", approach.id));
            }
            if !sides.insert(approach.compass) {
                report.push(
                    "approach-compass",
                    format!("junction {jid}: two approaches face {}", approach.compass),
                );
            }
            match net.link(&approach.in_link) {
                None => report.push(
                    "dangling-link",
                    format!("junction {jid}: approach {} in_link {} does not exist", approach.id, approach.in_link),
                ),
                Some(link) => {
                    if &link.to != jid {
                        report.push(
                            "approach-link",
                            format!("junction {jid}: approach {} in_link {} ends at {}", approach.id, link.id, link.to),
                        );
                    }
                    if link.lanes != approach.lanes {
                        report.push(
                            "approach-lanes",
                            format!(
                                "junction {jid}: approach {} declares {} lanes but link {} has {}",
                                approach.id, approach.lanes, link.id, link.lanes
                            ),
                        );
                    }
                }
            }
            match net.link(&approach.out_link) {
                None => report.push(
                    "dangling-link",
                    format!("junction {jid}: approach {} out_link {} does not exist", approach.id, approach.out_link),
                ),
                Some(link) if &link.from != jid => report.push(
                    "approach-link",
                    format!("junction {jid}: approach {} out_link {} starts at {}", approach.id, link.id, link.from),
                ),
                Some(_) => {}
            }
        }

        let mut movement_ids = BTreeSet::new();
        for movement in &junction.movements {
            let mid = &movement.id;
            if !movement_ids.insert(mid.as_str()) {
                report.push("duplicate-id", format!("junction {jid}: movement {mid} declared twice"));
            }
            let Some(approach) = junction.approach(&movement.from) else {
                report.push(
                    "dangling-approach",
                    format!("junction {jid}: movement {mid} enters from unknown approach {}", movement.from),
                );
                continue;
            };
            if movement.lanes.is_empty() {
                report.push("movement-lanes", format!("junction {jid}: movement {mid} has no incoming lanes"));
            }
            if let Some(in_link) = net.link(&approach.in_link) {
                let valid: BTreeSet<String> = (0..in_link.lanes).map(|i| in_link.lane_id(i)).collect();
                for lane in &movement.lanes {
                    if !valid.contains(lane) {
                        report.push(
                            "movement-lanes",
                            format!("junction {jid}: movement {mid} uses lane {lane} which is not on link {}", in_link.id),
                        );
                    }
                }
            }
            match net.link(&movement.out_link) {
                None => report.push(
                    "dangling-link",
                    format!("junction {jid}: movement {mid} leaves on unknown link {}", movement.out_link),
                ),
                Some(link) => {
                    if &link.from != jid {
                        report.push(
                            "movement-link",
                            format!("junction {jid}: movement {mid} out_link {} starts at {}", link.id, link.from),
                        );
                    }
                    let exit = approach.compass.exit_for(movement.direction);
                    if let Some(exit_approach) = junction.approach_at(exit) {
                        if exit_approach.out_link != movement.out_link {
                            report.push(
                                "movement-geometry",
                                format!(
                                    "junction {jid}: movement {mid} ({}-{}) should leave on {} but names {}",
                                    approach.compass, movement.direction, exit_approach.out_link, movement.out_link
                                ),
                            );
                        }
                    }
                }
            }
        }

        check_phases(junction, report);
    }
}

fn check_phases(junction: &super::Junction, report: &mut ValidationReport) {
    let jid = &junction.id;
    if junction.phases.len() < 2 {
        report.push(
            "phase-count",
            format!("junction {jid} has {} phases, at least 2 required", junction.phases.len()),
        );
    }
    for (i, phase) in junction.phases.iter().enumerate() {
        let expected = PhaseId::from_index(i);
        if phase.id != expected {
            report.push(
                "phase-sequence",
                format!("junction {jid}: phase {} found where {expected} expected", phase.id),
            );
        }
        if phase.movements.is_empty() {
            report.push("phase-empty", format!("junction {jid}: phase {} has no movements", phase.id));
        }
        let mut members = Vec::new();
        for mid in &phase.movements {
            match junction.movement(mid) {
                None => report.push(
                    "dangling-movement",
                    format!("junction {jid}: phase {} references unknown movement {mid}", phase.id),
                ),
                Some(m) if !m.direction.is_signalized() => report.push(
                    "phase-right-turn",
                    format!("junction {jid}: phase {} includes right-turn movement {mid}", phase.id),
                ),
                Some(m) => members.push(m),
            }
        }
        for (a_idx, a) in members.iter().enumerate() {
            for b in &members[a_idx + 1..] {
                if junction.conflicts(a, b) {
                    report.push(
                        "phase-conflict",
                        format!(
                            "junction {jid}: phase {} contains conflicting movements {} ({}) and {} ({})",
                            phase.id,
                            a.id,
                            junction.label_of(a),
                            b.id,
                            junction.label_of(b)
                        ),
                    );
                }
            }
        }
    }
    for movement in junction.signalized() {
        let served = junction
            .phases
            .iter()
            .any(|p| p.movements.iter().any(|m| m == &movement.id));
        if !served {
            report.push(
                "movement-unserved",
                format!("junction {jid}: signalized movement {} appears in no phase", movement.id),
            );
        }
    }
}

fn check_routes(net: &RoadNetwork, report: &mut ValidationReport) {
    let mut ids = BTreeSet::new();
    for route in &net.routes {
        let rid = &route.id;
        if !ids.insert(rid.as_str()) {
            report.push("duplicate-id", format!("route {rid} declared twice"));
        }
        if route.links.is_empty() {
            report.push("route-empty", format!("route {rid} has no links"));
            continue;
        }
        let mut resolved = Vec::with_capacity(route.links.len());
        for lid in &route.links {
            match net.link(lid) {
                Some(link) => resolved.push(link),
                None => report.push("dangling-link", format!("route {rid} uses unknown link {lid}")),
            }
        }
        if resolved.len() != route.links.len() {
            continue;
        }
        if net.is_junction(&resolved[0].from) {
            report.push("route-origin", format!("route {rid} starts inside junction {}", resolved[0].from));
        }
        let last = resolved[resolved.len() - 1];
        if net.is_junction(&last.to) {
            report.push("route-destination", format!("route {rid} ends inside junction {}", last.to));
        }
        for pair in resolved.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.to != b.from || !net.is_junction(&a.to) {
                report.push(
                    "route-continuity",
                    format!("route {rid}: links {} and {} do not meet at a junction", a.id, b.id),
                );
            } else if net.movement_between(&a.id, &b.id).is_none() && !has_dangling_exit(net, &a.to, &a.id) {
                report.push(
                    "route-movement",
                    format!("route {rid}: junction {} has no movement from {} to {}", a.to, a.id, b.id),
                );
            }
        }
    }
    for (rid, rate) in &net.demand {
        if net.route(rid).is_none() {
            report.push("demand-route", format!("demand given for unknown route {rid}"));
        }
        if !(rate.is_finite() && *rate >= 0.0) {
            report.push("demand-rate", format!("route {rid} has invalid demand {rate}"));
        }
    }
}

/// True when a movement on `in_link` already names a missing out link, so the
/// route-level symptom is not reported a second time.
fn has_dangling_exit(net: &RoadNetwork, junction: &str, in_link: &str) -> bool {
    let Some(j) = net.junction(junction) else { return false };
    j.approaches
        .iter()
        .filter(|a| a.in_link == in_link)
        .any(|a| {
            j.movements
                .iter()
                .any(|m| m.from == a.id && net.link(&m.out_link).is_none())
        })
}
