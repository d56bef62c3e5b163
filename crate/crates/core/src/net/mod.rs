//! Static road-network model: junctions, approaches, movements, signal phases,
//! links and routes, plus loading and validation of the network file.

mod builder;
mod file;
mod geometry;
mod plan;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use builder::{grid, isolated_junction, movement_number};
pub use file::{load_network, parse_network, to_network_json};
pub use geometry::{movements_conflict, Compass, Direction};
pub use plan::default_signal_plan;
pub use validate::{validate_network, ValidationReport, Violation};

/// Detector horizon measured back from the stop line, in meters.
pub const DETECTOR_RANGE_M: f64 = 150.0;
pub const DEFAULT_LINK_LENGTH_M: f64 = 300.0;
pub const DEFAULT_LANES: u32 = 3;
/// Default hourly demand for routes whose first movement goes straight.
pub const DEFAULT_THROUGH_DEMAND: f64 = 300.0;
/// Default hourly demand for turning routes.
pub const DEFAULT_TURN_DEMAND: f64 = 150.0;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot read network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed network file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {0}")]
    Validation(Violation),
    #[error("junction {junction} has {approaches} approaches and no explicit phase plan")]
    UnsupportedTopology { junction: String, approaches: usize },
}

/// Signal phase identifier `P<k>`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhaseId(pub u16);

impl PhaseId {
    pub fn from_index(index: usize) -> PhaseId {
        PhaseId(index as u16 + 1)
    }

    pub fn index(self) -> usize {
        usize::from(self.0).saturating_sub(1)
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl FromStr for PhaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('P')
            .ok_or_else(|| format!("phase id {s:?} does not start with 'P'"))?;
        match digits.parse::<u16>() {
            Ok(n) if n >= 1 && !digits.starts_with('+') => Ok(PhaseId(n)),
            _ => Err(format!("phase id {s:?} is not P<k> with k >= 1")),
        }
    }
}

impl Serialize for PhaseId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    /// Junction id or boundary node name.
    pub from: String,
    pub to: String,
    pub length: f64,
    pub lanes: u32,
}

impl Link {
    pub fn lane_id(&self, index: u32) -> String {
        format!("{}_{}", self.id, index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Approach {
    pub id: String,
    pub compass: Compass,
    pub lanes: u32,
    pub in_link: String,
    pub out_link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Movement {
    pub id: String,
    /// Approach id the movement enters from.
    pub from: String,
    pub direction: Direction,
    pub lanes: Vec<String>,
    pub out_link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub id: PhaseId,
    pub movements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: String,
    pub approaches: Vec<Approach>,
    pub movements: Vec<Movement>,
    pub phases: Vec<Phase>,
}

impl Junction {
    pub fn approach(&self, id: &str) -> Option<&Approach> {
        self.approaches.iter().find(|a| a.id == id)
    }

    pub fn approach_at(&self, compass: Compass) -> Option<&Approach> {
        self.approaches.iter().find(|a| a.compass == compass)
    }

    pub fn movement(&self, id: &str) -> Option<&Movement> {
        self.movements.iter().find(|m| m.id == id)
    }

    pub fn phase(&self, id: PhaseId) -> Option<&Phase> {
        self.phases.iter().find(|p| p.id == id)
    }

    /// Movements that carry a signal head, in declaration order.
    pub fn signalized(&self) -> impl Iterator<Item = &Movement> {
        self.movements.iter().filter(|m| m.direction.is_signalized())
    }

    /// (entry side, turn) of a movement; `None` if its approach is undeclared.
    pub fn geometry_of(&self, movement: &Movement) -> Option<(Compass, Direction)> {
        self.approach(&movement.from)
            .map(|a| (a.compass, movement.direction))
    }

    /// Short human label such as `E1-s`.
    pub fn label_of(&self, movement: &Movement) -> String {
        format!("{}-{}", movement.from, movement.direction)
    }

    pub fn conflicts(&self, a: &Movement, b: &Movement) -> bool {
        match (self.geometry_of(a), self.geometry_of(b)) {
            (Some(ga), Some(gb)) => movements_conflict(ga, gb),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    pub links: Vec<String>,
}

/// Static network graph. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub junctions: BTreeMap<String, Junction>,
    pub links: BTreeMap<String, Link>,
    pub routes: Vec<Route>,
    /// Hourly arrival rate per route id.
    pub demand: BTreeMap<String, f64>,
}

impl RoadNetwork {
    pub fn junction(&self, id: &str) -> Option<&Junction> {
        self.junctions.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn route(&self, id: &str) -> Option<&Route> {
        self.routes.iter().find(|r| r.id == id)
    }

    pub fn is_junction(&self, node: &str) -> bool {
        self.junctions.contains_key(node)
    }

    /// Boundary node the route starts from.
    pub fn route_origin(&self, route: &Route) -> Option<&str> {
        let first = self.link(route.links.first()?)?;
        Some(first.from.as_str())
    }

    pub fn route_destination(&self, route: &Route) -> Option<&str> {
        let last = self.link(route.links.last()?)?;
        Some(last.to.as_str())
    }

    /// Movement used at the junction between two consecutive links.
    pub fn movement_between(&self, in_link: &str, out_link: &str) -> Option<(&Junction, &Movement)> {
        let link = self.link(in_link)?;
        let junction = self.junction(&link.to)?;
        let approach = junction.approaches.iter().find(|a| a.in_link == in_link)?;
        let movement = junction
            .movements
            .iter()
            .find(|m| m.from == approach.id && m.out_link == out_link)?;
        Some((junction, movement))
    }

    /// Demand used when the file leaves a route's rate unspecified.
    pub fn default_demand_for(&self, route: &Route) -> f64 {
        let first_turn = route
            .links
            .windows(2)
            .next()
            .and_then(|w| self.movement_between(&w[0], &w[1]))
            .map(|(_, m)| m.direction);
        match first_turn {
            Some(Direction::Straight) | None => DEFAULT_THROUGH_DEMAND,
            Some(_) => DEFAULT_TURN_DEMAND,
        }
    }
}
