//! Generators for the canonical synthetic networks shipped as fixtures.

use std::collections::BTreeMap;

use super::{
    default_signal_plan, Approach, Compass, Direction, Junction, Link, Movement, RoadNetwork, Route,
};

/// Canonical movement number. W-l is m4 and E-l is m8; the remaining
/// signalized slots are filled clockwise from North, through before left.
/// Right turns follow as m9..m12.
pub fn movement_number(compass: Compass, direction: Direction) -> u32 {
    use Compass::*;
    use Direction::*;
    match (compass, direction) {
        (N, Straight) => 1,
        (N, Left) => 2,
        (E, Straight) => 3,
        (W, Left) => 4,
        (S, Straight) => 5,
        (S, Left) => 6,
        (W, Straight) => 7,
        (E, Left) => 8,
        (N, Right) => 9,
        (E, Right) => 10,
        (S, Right) => 11,
        (W, Right) => 12,
    }
}

fn approach_id(compass: Compass) -> &'static str {
    match compass {
        Compass::N => "E1",
        Compass::E => "E2",
        Compass::S => "E3",
        Compass::W => "E4",
    }
}

struct Leg {
    compass: Compass,
    in_link: String,
    out_link: String,
}

/// Lane indices per turn on an approach with `lanes` lanes. Left turns take
/// the inside lane, through traffic the rest, and right turns share the
/// outside lane.
fn lane_split(lanes: u32, turns: &[Direction]) -> BTreeMap<Direction, Vec<u32>> {
    let has = |d| turns.contains(&d);
    let mut out = BTreeMap::new();
    let last = lanes - 1;
    if has(Direction::Straight) {
        let first_through = if has(Direction::Left) && lanes > 1 { 1 } else { 0 };
        if has(Direction::Left) {
            out.insert(Direction::Left, vec![0]);
        }
        out.insert(Direction::Straight, (first_through..lanes).collect());
    } else if has(Direction::Left) {
        let end = if has(Direction::Right) && lanes > 1 { last } else { lanes };
        out.insert(Direction::Left, (0..end).collect());
    }
    if has(Direction::Right) {
        out.insert(Direction::Right, vec![last]);
    }
    out
}

fn build_junction(id: &str, legs: &[Leg], lanes: u32, links: &BTreeMap<String, Link>) -> Junction {
    let approaches: Vec<Approach> = legs
        .iter()
        .map(|leg| Approach {
            id: approach_id(leg.compass).to_string(),
            compass: leg.compass,
            lanes,
            in_link: leg.in_link.clone(),
            out_link: leg.out_link.clone(),
        })
        .collect();
    let mut movements = Vec::new();
    for leg in legs {
        let turns: Vec<Direction> = [Direction::Straight, Direction::Left, Direction::Right]
            .into_iter()
            .filter(|&d| legs.iter().any(|l| l.compass == leg.compass.exit_for(d)))
            .collect();
        let split = lane_split(lanes, &turns);
        for d in turns {
            let exit = legs
                .iter()
                .find(|l| l.compass == leg.compass.exit_for(d))
                .expect("exit leg present");
            let in_link = &links[&leg.in_link];
            movements.push(Movement {
                id: format!("m{}", movement_number(leg.compass, d)),
                from: approach_id(leg.compass).to_string(),
                direction: d,
                lanes: split[&d].iter().map(|&i| in_link.lane_id(i)).collect(),
                out_link: exit.out_link.clone(),
            });
        }
    }
    movements.sort_by_key(|m| m.id[1..].parse::<u32>().unwrap_or(u32::MAX));
    let mut junction = Junction {
        id: id.to_string(),
        approaches,
        movements,
        phases: Vec::new(),
    };
    junction.phases = default_signal_plan(&junction).expect("3 or 4 legs");
    junction
}

fn finish(junctions: BTreeMap<String, Junction>, links: BTreeMap<String, Link>) -> RoadNetwork {
    let mut net = RoadNetwork {
        junctions,
        links,
        routes: Vec::new(),
        demand: BTreeMap::new(),
    };
    net.routes = enumerate_routes(&net);
    let demand = net
        .routes
        .iter()
        .map(|r| (r.id.clone(), net.default_demand_for(r)))
        .collect();
    net.demand = demand;
    net
}

/// Every route entering from a boundary link, turning once at the first
/// junction and going straight afterwards until it leaves the network.
fn enumerate_routes(net: &RoadNetwork) -> Vec<Route> {
    let mut routes = Vec::new();
    for junction in net.junctions.values() {
        for approach in &junction.approaches {
            let entry = &net.links[&approach.in_link];
            if net.is_junction(&entry.from) {
                continue;
            }
            for d in [Direction::Straight, Direction::Left, Direction::Right] {
                let mut links = vec![entry.id.clone()];
                let mut at = junction;
                let mut side = approach.compass;
                let mut turn = d;
                let complete = loop {
                    let exit = side.exit_for(turn);
                    let Some(out) = at.approach_at(exit) else { break false };
                    let link = &net.links[&out.out_link];
                    links.push(link.id.clone());
                    match net.junction(&link.to) {
                        None => break true,
                        Some(next) => {
                            at = next;
                            side = exit.opposite();
                            turn = Direction::Straight;
                        }
                    }
                };
                if complete {
                    routes.push(Route {
                        id: format!("{}_{}", entry.id, d),
                        links,
                    });
                }
            }
        }
    }
    routes
}

/// A single junction with legs on the given sides, boundary links of
/// `length` meters and `lanes` lanes per approach.
pub fn isolated_junction(id: &str, sides: &[Compass], lanes: u32, length: f64) -> RoadNetwork {
    let mut links = BTreeMap::new();
    let mut legs = Vec::new();
    let mut sorted = sides.to_vec();
    sorted.sort();
    sorted.dedup();
    for compass in sorted {
        let aid = approach_id(compass);
        let edge = format!("{aid}_end");
        let in_link = Link {
            id: format!("{aid}_in"),
            from: edge.clone(),
            to: id.to_string(),
            length,
            lanes,
        };
        let out_link = Link {
            id: format!("{aid}_out"),
            from: id.to_string(),
            to: edge,
            length,
            lanes,
        };
        legs.push(Leg {
            compass,
            in_link: in_link.id.clone(),
            out_link: out_link.id.clone(),
        });
        links.insert(in_link.id.clone(), in_link);
        links.insert(out_link.id.clone(), out_link);
    }
    let junction = build_junction(id, &legs, lanes, &links);
    let mut junctions = BTreeMap::new();
    junctions.insert(id.to_string(), junction);
    finish(junctions, links)
}

/// `rows` x `cols` grid of four-legged junctions named `J<row><col>`
/// (1-based, row 1 northmost).
pub fn grid(rows: usize, cols: usize, lanes: u32, length: f64) -> RoadNetwork {
    let name = |r: usize, c: usize| format!("J{}{}", r + 1, c + 1);
    let neighbor = |r: usize, c: usize, side: Compass| -> Option<(usize, usize)> {
        match side {
            Compass::N if r > 0 => Some((r - 1, c)),
            Compass::S if r + 1 < rows => Some((r + 1, c)),
            Compass::W if c > 0 => Some((r, c - 1)),
            Compass::E if c + 1 < cols => Some((r, c + 1)),
            _ => None,
        }
    };
    let mut links = BTreeMap::new();
    let mut legs_of = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let jid = name(r, c);
            let mut legs = Vec::new();
            for side in Compass::ALL {
                let (in_link, out_link) = match neighbor(r, c, side) {
                    Some((nr, nc)) => {
                        let other = name(nr, nc);
                        let in_link = Link {
                            id: format!("{other}-{jid}"),
                            from: other.clone(),
                            to: jid.clone(),
                            length,
                            lanes,
                        };
                        let out_link = Link {
                            id: format!("{jid}-{other}"),
                            from: jid.clone(),
                            to: other,
                            length,
                            lanes,
                        };
                        (in_link, out_link)
                    }
                    None => {
                        let aid = approach_id(side);
                        let edge = format!("{jid}_{aid}_end");
                        let in_link = Link {
                            id: format!("{jid}_{aid}_in"),
                            from: edge.clone(),
                            to: jid.clone(),
                            length,
                            lanes,
                        };
                        let out_link = Link {
                            id: format!("{jid}_{aid}_out"),
                            from: jid.clone(),
                            to: edge,
                            length,
                            lanes,
                        };
                        (in_link, out_link)
                    }
                };
                legs.push(Leg {
                    compass: side,
                    in_link: in_link.id.clone(),
                    out_link: out_link.id.clone(),
                });
                links.insert(in_link.id.clone(), in_link);
                links.insert(out_link.id.clone(), out_link);
            }
            legs_of.insert(jid, legs);
        }
    }
    let junctions = legs_of
        .into_iter()
        .map(|(jid, legs)| {
            let j = build_junction(&jid, &legs, lanes, &links);
            (jid, j)
        })
        .collect();
    finish(junctions, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::validate_network;

    #[test]
    fn four_way_has_eight_signalized_movements_and_four_phases() {
        let net = isolated_junction("J1", &Compass::ALL, 3, 300.0);
        let report = validate_network(&net);
        assert!(report.is_valid(), "{:?}", report.violations);
        let j = net.junction("J1").unwrap();
        assert_eq!(j.approaches.len(), 4);
        assert_eq!(j.signalized().count(), 8);
        assert_eq!(j.movements.len(), 12);
        assert_eq!(j.phases.len(), 4);
        assert_eq!(net.routes.len(), 12);
    }

    #[test]
    fn three_lane_split_matches_layout() {
        let split = lane_split(3, &[Direction::Straight, Direction::Left, Direction::Right]);
        assert_eq!(split[&Direction::Left], vec![0]);
        assert_eq!(split[&Direction::Straight], vec![1, 2]);
        assert_eq!(split[&Direction::Right], vec![2]);
        let stem = lane_split(3, &[Direction::Left, Direction::Right]);
        assert_eq!(stem[&Direction::Left], vec![0, 1]);
        assert_eq!(stem[&Direction::Right], vec![2]);
    }

    #[test]
    fn grid_is_valid() {
        let net = grid(2, 2, 3, 300.0);
        let report = validate_network(&net);
        assert!(report.is_valid(), "{:?}", report.violations);
        assert_eq!(net.junctions.len(), 4);
        // 8 boundary entries x 3 turns
        assert_eq!(net.routes.len(), 24);
    }
}
