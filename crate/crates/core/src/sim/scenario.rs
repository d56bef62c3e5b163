//! Stress scenarios: emergency vehicles, roadblocks and sensor outages.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::net::RoadNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Normal,
    Emv,
    Rbi,
    So,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Normal => "normal",
            ScenarioKind::Emv => "emv",
            ScenarioKind::Rbi => "rbi",
            ScenarioKind::So => "so",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(ScenarioKind::Normal),
            "emv" => Ok(ScenarioKind::Emv),
            "rbi" => Ok(ScenarioKind::Rbi),
            "so" => Ok(ScenarioKind::So),
            other => Err(format!("unknown scenario {other:?}, expected normal, emv, rbi or so")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmvSpawn {
    pub time: i64,
    pub route: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roadblock {
    pub start: i64,
    pub end: i64,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorOutage {
    pub start: i64,
    pub end: i64,
    pub junction: String,
    pub approach: String,
}

/// Everything scripted to happen during a run. Intervals are half-open
/// `[start, end)` in simulation seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSchedule {
    /// Total simulated time T in seconds.
    pub horizon: i64,
    /// Probability that a regular spawn is turned into an emergency vehicle.
    #[serde(default)]
    pub emergency_share: f64,
    #[serde(default)]
    pub emv_spawns: Vec<EmvSpawn>,
    #[serde(default)]
    pub roadblocks: Vec<Roadblock>,
    #[serde(default)]
    pub sensor_outages: Vec<SensorOutage>,
}

impl EventSchedule {
    pub fn empty(horizon: u64) -> EventSchedule {
        EventSchedule {
            horizon: horizon as i64,
            emergency_share: 0.0,
            emv_spawns: Vec::new(),
            roadblocks: Vec::new(),
            sensor_outages: Vec::new(),
        }
    }

    pub fn blocked_seconds(&self) -> i64 {
        self.roadblocks.iter().map(|b| b.end - b.start).sum()
    }

    /// Outage seconds per (junction, approach).
    pub fn outage_seconds(&self) -> BTreeMap<(String, String), i64> {
        let mut out = BTreeMap::new();
        for o in &self.sensor_outages {
            *out.entry((o.junction.clone(), o.approach.clone())).or_insert(0) += o.end - o.start;
        }
        out
    }

    pub fn roadblock_active(&self, link: &str, t: i64) -> bool {
        self.roadblocks
            .iter()
            .any(|b| b.link == link && b.start <= t && t < b.end)
    }

    pub fn outage_active(&self, junction: &str, approach: &str, t: i64) -> bool {
        self.sensor_outages
            .iter()
            .any(|o| o.junction == junction && o.approach == approach && o.start <= t && t < o.end)
    }

    /// Checks the schedule against a network; returns the first problem.
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSchedule(msg));
        if self.horizon <= 0 {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(0.0..=1.0).contains(&self.emergency_share) {
            return bad(format!("emergency_share {} outside [0, 1]", self.emergency_share));
        }
        let interval = |start: i64, end: i64, what: &str| -> Result<(), SimError> {
            if start < 0 || end > self.horizon || start >= end {
                return Err(SimError::InvalidSchedule(format!(
                    "{what} interval [{start}, {end}) is not inside [0, {}]",
                    self.horizon
                )));
            }
            Ok(())
        };
        for spawn in &self.emv_spawns {
            if spawn.time < 0 || spawn.time >= self.horizon {
                return bad(format!("emergency spawn at t={} outside [0, {})", spawn.time, self.horizon));
            }
            if net.route(&spawn.route).is_none() {
                return bad(format!("emergency spawn on unknown route {}", spawn.route));
            }
        }
        for block in &self.roadblocks {
            interval(block.start, block.end, &format!("roadblock on {}", block.link))?;
            match net.link(&block.link) {
                None => return bad(format!("roadblock on unknown link {}", block.link)),
                Some(link) if !net.is_junction(&link.from) => {
                    return bad(format!("roadblock on {} which does not leave a junction", block.link))
                }
                Some(_) => {}
            }
        }
        let mut by_link: BTreeMap<&str, Vec<(i64, i64)>> = BTreeMap::new();
        for block in &self.roadblocks {
            by_link.entry(&block.link).or_default().push((block.start, block.end));
        }
        for (link, mut spans) in by_link {
            spans.sort();
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return bad(format!("overlapping roadblocks on link {link}"));
            }
        }
        for outage in &self.sensor_outages {
            interval(
                outage.start,
                outage.end,
                &format!("sensor outage on {}/{}", outage.junction, outage.approach),
            )?;
            let known = net
                .junction(&outage.junction)
                .is_some_and(|j| j.approach(&outage.approach).is_some());
            if !known {
                return bad(format!(
                    "sensor outage on unknown approach {}/{}",
                    outage.junction, outage.approach
                ));
            }
        }
        Ok(())
    }
}

/// Knobs of the scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub emergency_share: f64,
    /// Fraction of the horizon covered by roadblocks (RBI) or by outages on
    /// each affected approach (SO).
    pub incident_share: f64,
    pub window_min: i64,
    pub window_max: i64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            emergency_share: 0.01,
            incident_share: 0.10,
            window_min: 60,
            window_max: 180,
        }
    }
}

pub fn generate_scenario(kind: ScenarioKind, net: &RoadNetwork, horizon: u64, seed: u64) -> EventSchedule {
    generate_scenario_with(kind, net, horizon, seed, &ScenarioParams::default())
}

/// Deterministic in `(kind, net, horizon, seed, params)`. Uses ChaCha8 on
/// stream 1 so it never shares draws with the simulator (stream 0).
pub fn generate_scenario_with(
    kind: ScenarioKind,
    net: &RoadNetwork,
    horizon: u64,
    seed: u64,
    params: &ScenarioParams,
) -> EventSchedule {
    let mut schedule = EventSchedule::empty(horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let total = (params.incident_share * horizon as f64).round() as i64;
    match kind {
        ScenarioKind::Normal => {}
        ScenarioKind::Emv => schedule.emergency_share = params.emergency_share,
        ScenarioKind::Rbi => {
            let candidates: Vec<&str> = net
                .links
                .values()
                .filter(|l| net.is_junction(&l.from))
                .map(|l| l.id.as_str())
                .collect();
            if !candidates.is_empty() {
                let windows = place_windows(total, horizon as i64, params, &mut rng);
                for (start, end) in windows {
                    let link = candidates[rng.random_range(0..candidates.len())];
                    schedule.roadblocks.push(Roadblock {
                        start,
                        end,
                        link: link.to_string(),
                    });
                }
            }
        }
        ScenarioKind::So => {
            for junction in net.junctions.values() {
                if junction.approaches.is_empty() {
                    continue;
                }
                let approach = &junction.approaches[rng.random_range(0..junction.approaches.len())];
                for (start, end) in place_windows(total, horizon as i64, params, &mut rng) {
                    schedule.sensor_outages.push(SensorOutage {
                        start,
                        end,
                        junction: junction.id.clone(),
                        approach: approach.id.clone(),
                    });
                }
            }
        }
    }
    schedule
}

/// Splits `total` seconds into windows of `[window_min, window_max]` seconds
/// (the last one may be shorter only when `total < window_min`) and scatters
/// them without overlap over `[0, horizon)`.
fn place_windows(total: i64, horizon: i64, params: &ScenarioParams, rng: &mut ChaCha8Rng) -> Vec<(i64, i64)> {
    let total = total.clamp(0, horizon);
    let lo = params.window_min.max(1);
    let hi = params.window_max.max(lo);
    let mut durations = Vec::new();
    let mut remaining = total;
    while remaining > 0 {
        let d = if remaining <= hi {
            remaining
        } else {
            // keep the remainder at least `lo` so no sliver window is left
            let upper = hi.min(remaining - lo);
            if upper < lo {
                remaining
            } else {
                rng.random_range(lo..=upper)
            }
        };
        durations.push(d);
        remaining -= d;
    }
    let free = horizon - total;
    let mut cuts: Vec<i64> = durations.iter().map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut before = 0;
    durations
        .iter()
        .zip(cuts)
        .map(|(&d, cut)| {
            let start = cut + before;
            before += d;
            (start, start + d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{isolated_junction, Compass};

    fn four_way() -> RoadNetwork {
        isolated_junction("J1", &Compass::ALL, 3, 300.0)
    }

    #[test]
    fn rbi_totals_ten_percent() {
        let net = four_way();
        let s = generate_scenario(ScenarioKind::Rbi, &net, 3600, 7);
        assert_eq!(s.blocked_seconds(), 360);
        assert!(s.validate(&net).is_ok());
        for b in &s.roadblocks {
            assert!(b.end - b.start >= 60 && b.end - b.start <= 180);
        }
    }

    #[test]
    fn so_totals_ten_percent_on_one_approach() {
        let net = four_way();
        let s = generate_scenario(ScenarioKind::So, &net, 3600, 3);
        let per = s.outage_seconds();
        assert_eq!(per.len(), 1);
        assert_eq!(per.values().copied().collect::<Vec<_>>(), vec![360]);
        assert!(s.validate(&net).is_ok());
    }

    #[test]
    fn normal_is_empty() {
        let net = four_way();
        assert_eq!(generate_scenario(ScenarioKind::Normal, &net, 3600, 1), EventSchedule::empty(3600));
    }

    #[test]
    fn negative_interval_is_rejected() {
        let net = four_way();
        let mut s = EventSchedule::empty(3600);
        s.roadblocks.push(Roadblock { start: -5, end: 10, link: "E1_out".into() });
        assert!(matches!(s.validate(&net), Err(SimError::InvalidSchedule(_))));
    }

    #[test]
    fn short_horizons_still_hit_the_total() {
        let net = four_way();
        for horizon in [1u64, 30, 599, 600, 601, 1234, 7200] {
            for seed in 0..20 {
                let s = generate_scenario(ScenarioKind::Rbi, &net, horizon, seed);
                assert_eq!(s.blocked_seconds(), (0.1 * horizon as f64).round() as i64);
                assert!(s.validate(&net).is_ok() || s.roadblocks.is_empty());
            }
        }
    }

    #[test]
    fn schedule_json_round_trips() {
        let net = four_way();
        let s = generate_scenario(ScenarioKind::Rbi, &net, 3600, 11);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<EventSchedule>(&text).unwrap(), s);
    }
}
