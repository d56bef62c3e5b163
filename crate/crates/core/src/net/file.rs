use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    default_signal_plan, validate_network, Approach, Compass, Direction, Junction, Link, Movement,
    NetError, Phase, PhaseId, RoadNetwork, Route, DEFAULT_LANES, DEFAULT_LINK_LENGTH_M,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    junctions: Vec<JunctionEntry>,
    links: Vec<LinkEntry>,
    routes: Vec<RouteEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    demand: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JunctionEntry {
    id: String,
    approaches: Vec<ApproachEntry>,
    movements: Vec<MovementEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<PhaseEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproachEntry {
    id: String,
    compass: Compass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lanes: Option<u32>,
    in_link: String,
    out_link: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MovementEntry {
    id: String,
    from: String,
    direction: Direction,
    lanes: Vec<String>,
    out_link: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseEntry {
    id: PhaseId,
    movements: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    id: String,
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lanes: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteEntry {
    id: String,
    links: Vec<String>,
}

/// Reads, defaults and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<RoadNetwork, NetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text)
}

pub fn parse_network(text: &str) -> Result<RoadNetwork, NetError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let links: BTreeMap<String, Link> = file
        .links
        .into_iter()
        .map(|l| {
            let link = Link {
                length: l.length.unwrap_or(DEFAULT_LINK_LENGTH_M),
                lanes: l.lanes.unwrap_or(DEFAULT_LANES),
                id: l.id,
                from: l.from,
                to: l.to,
            };
            (link.id.clone(), link)
        })
        .collect();

    let mut junctions = BTreeMap::new();
    for j in file.junctions {
        let approaches = j
            .approaches
            .into_iter()
            .map(|a| Approach {
                lanes: a
                    .lanes
                    .or_else(|| links.get(&a.in_link).map(|l| l.lanes))
                    .unwrap_or(DEFAULT_LANES),
                id: a.id,
                compass: a.compass,
                in_link: a.in_link,
                out_link: a.out_link,
            })
            .collect();
        let movements = j
            .movements
            .into_iter()
            .map(|m| Movement {
                id: m.id,
                from: m.from,
                direction: m.direction,
                lanes: m.lanes,
                out_link: m.out_link,
            })
            .collect();
        let mut junction = Junction {
            id: j.id,
            approaches,
            movements,
            phases: Vec::new(),
        };
        junction.phases = match j.phases {
            Some(phases) => phases
                .into_iter()
                .map(|p| Phase {
                    id: p.id,
                    movements: p.movements,
                })
                .collect(),
            None => default_signal_plan(&junction)?,
        };
        junctions.insert(junction.id.clone(), junction);
    }

    let routes: Vec<Route> = file
        .routes
        .into_iter()
        .map(|r| Route {
            id: r.id,
            links: r.links,
        })
        .collect();

    let mut net = RoadNetwork {
        junctions,
        links,
        routes,
        demand: BTreeMap::new(),
    };
    let mut demand = file.demand.unwrap_or_default();
    for route in &net.routes {
        if !demand.contains_key(&route.id) {
            demand.insert(route.id.clone(), net.default_demand_for(route));
        }
    }
    net.demand = demand;

    let report = validate_network(&net);
    match report.violations.into_iter().next() {
        Some(first) => Err(NetError::Validation(first)),
        None => Ok(net),
    }
}

/// Canonical JSON rendering with every defaulted field written out.
pub fn to_network_json(net: &RoadNetwork) -> String {
    let file = NetworkFile {
        junctions: net
            .junctions
            .values()
            .map(|j| JunctionEntry {
                id: j.id.clone(),
                approaches: j
                    .approaches
                    .iter()
                    .map(|a| ApproachEntry {
                        id: a.id.clone(),
                        compass: a.compass,
                        lanes: Some(a.lanes),
                        in_link: a.in_link.clone(),
                        out_link: a.out_link.clone(),
                    })
                    .collect(),
                movements: j
                    .movements
                    .iter()
                    .map(|m| MovementEntry {
                        id: m.id.clone(),
                        from: m.from.clone(),
                        direction: m.direction,
                        lanes: m.lanes.clone(),
                        out_link: m.out_link.clone(),
                    })
                    .collect(),
                phases: Some(
                    j.phases
                        .iter()
                        .map(|p| PhaseEntry {
                            id: p.id,
                            movements: p.movements.clone(),
                        })
                        .collect(),
                ),
            })
            .collect(),
        links: net
            .links
            .values()
            .map(|l| LinkEntry {
                id: l.id.clone(),
                from: l.from.clone(),
                to: l.to.clone(),
                length: Some(l.length),
                lanes: Some(l.lanes),
            })
            .collect(),
        routes: net
            .routes
            .iter()
            .map(|r| RouteEntry {
                id: r.id.clone(),
                links: r.links.clone(),
            })
            .collect(),
        demand: Some(net.demand.clone()),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("network serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"junctions": [], "links": [], "routes": [], "extra": 1}"#;
        match parse_network(text) {
            Err(NetError::Parse { message, .. }) => assert!(message.contains("extra")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_position() {
        let text = "{\n  \"junctions\": [,\n}";
        match parse_network(text) {
            Err(NetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
