//! Trip records, the four travel-time metrics and controller comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle: u64,
    pub is_emergency: bool,
    pub depart_time: u64,
    pub arrive_time: Option<u64>,
    pub cumulative_wait: u64,
    pub route: String,
}

impl TripRecord {
    pub fn travel_time(&self) -> Option<u64> {
        self.arrive_time.map(|a| a - self.depart_time)
    }
}

/// What produced a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub network: String,
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub duration: u64,
    pub delta_t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub att: Option<f64>,
    pub awt: Option<f64>,
    pub aett: Option<f64>,
    pub aewt: Option<f64>,
    pub completed_trips: u64,
    pub unfinished_trips: u64,
    pub emergency_completed: u64,
    pub emergency_unfinished: u64,
    pub att_excludes_emv: bool,
    pub run: RunDescriptor,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<MetricsReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Att => self.att,
            Metric::Awt => self.awt,
            Metric::Aett => self.aett,
            Metric::Aewt => self.aewt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Att,
    Awt,
    Aett,
    Aewt,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Att, Metric::Awt, Metric::Aett, Metric::Aewt];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Att => "ATT",
            Metric::Awt => "AWT",
            Metric::Aett => "AETT",
            Metric::Aewt => "AEWT",
        }
    }
}

/// Renders a metric value; missing values show as an em dash.
pub fn render_value(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "\u{2014}".to_string(),
    }
}

fn mean(sum: u64, n: u64) -> Option<f64> {
    (n > 0).then(|| sum as f64 / n as f64)
}

/// ATT/AWT over every completed trip, AETT/AEWT over completed emergency trips.
pub fn compute_metrics(trips: &[TripRecord], horizon: u64) -> MetricsReport {
    compute_metrics_with(trips, horizon, false)
}

/// As [`compute_metrics`]; with `att_excludes_emv` the all-vehicle averages
/// skip emergency trips.
pub fn compute_metrics_with(trips: &[TripRecord], horizon: u64, att_excludes_emv: bool) -> MetricsReport {
    let (mut travel, mut wait, mut n) = (0u64, 0u64, 0u64);
    let (mut e_travel, mut e_wait, mut e_n) = (0u64, 0u64, 0u64);
    let (mut unfinished, mut e_unfinished) = (0u64, 0u64);
    for trip in trips {
        let Some(tt) = trip.travel_time() else {
            unfinished += 1;
            if trip.is_emergency {
                e_unfinished += 1;
            }
            continue;
        };
        if trip.is_emergency {
            e_travel += tt;
            e_wait += trip.cumulative_wait;
            e_n += 1;
        }
        if !(att_excludes_emv && trip.is_emergency) {
            travel += tt;
            wait += trip.cumulative_wait;
            n += 1;
        }
    }
    MetricsReport {
        schema_version: SCHEMA_VERSION,
        att: mean(travel, n),
        awt: mean(wait, n),
        aett: mean(e_travel, e_n),
        aewt: mean(e_wait, e_n),
        completed_trips: trips.len() as u64 - unfinished,
        unfinished_trips: unfinished,
        emergency_completed: e_n,
        emergency_unfinished: e_unfinished,
        att_excludes_emv,
        run: RunDescriptor {
            duration: horizon,
            ..RunDescriptor::default()
        },
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("at least 2 reports are needed, got {0}")]
    TooFewReports(usize),
    #[error("reports disagree on {field}: {a} vs {b}")]
    MixedConfig { field: &'static str, a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: String,
    pub runs: usize,
    pub att: Option<f64>,
    pub awt: Option<f64>,
    pub aett: Option<f64>,
    pub aewt: Option<f64>,
}

impl ComparisonRow {
    fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Att => self.att,
            Metric::Awt => self.awt,
            Metric::Aett => self.aett,
            Metric::Aewt => self.aewt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub network: String,
    pub scenario: String,
    pub duration: u64,
    /// Sorted by controller name.
    pub rows: Vec<ComparisonRow>,
    /// Controller with the lowest value per metric column.
    pub best: BTreeMap<String, String>,
}

/// Groups reports by controller (averaging over seeds) and marks the lowest
/// value in each metric column.
pub fn compare_runs(reports: &[MetricsReport]) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFewReports(reports.len()));
    }
    let first = &reports[0].run;
    for r in &reports[1..] {
        let checks: [(&'static str, String, String); 3] = [
            ("network", first.network.clone(), r.run.network.clone()),
            ("scenario", first.scenario.clone(), r.run.scenario.clone()),
            ("duration", first.duration.to_string(), r.run.duration.to_string()),
        ];
        for (field, a, b) in checks {
            if a != b {
                return Err(CompareError::MixedConfig { field, a, b });
            }
        }
    }
    let mut groups: BTreeMap<&str, Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.run.controller.as_str()).or_default().push(r);
    }
    let avg = |group: &[&MetricsReport], metric: Metric| -> Option<f64> {
        let values: Vec<f64> = group.iter().filter_map(|r| r.metric(metric)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let rows: Vec<ComparisonRow> = groups
        .iter()
        .map(|(controller, group)| ComparisonRow {
            controller: controller.to_string(),
            runs: group.len(),
            att: avg(group, Metric::Att),
            awt: avg(group, Metric::Awt),
            aett: avg(group, Metric::Aett),
            aewt: avg(group, Metric::Aewt),
        })
        .collect();
    let mut best = BTreeMap::new();
    for metric in Metric::ALL {
        let winner = rows
            .iter()
            .filter_map(|row| row.metric(metric).map(|v| (v, row)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, row)) = winner {
            best.insert(metric.name().to_string(), row.controller.clone());
        }
    }
    Ok(Comparison {
        schema_version: SCHEMA_VERSION,
        network: first.network.clone(),
        scenario: first.scenario.clone(),
        duration: first.duration,
        rows,
        best,
    })
}

impl Comparison {
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "Network `{}`, scenario `{}`, T = {} s\n\n| Controller | Runs |",
            self.network, self.scenario, self.duration
        );
        for metric in Metric::ALL {
            let _ = write!(out, " {} (s) |", metric.name());
        }
        out.push_str("\n|---|---:|---:|---:|---:|---:|\n");
        for row in &self.rows {
            let _ = write!(out, "| {} | {} |", row.controller, row.runs);
            for metric in Metric::ALL {
                let text = render_value(row.metric(metric));
                let is_best = self.best.get(metric.name()) == Some(&row.controller);
                if is_best {
                    let _ = write!(out, " **{text}** |");
                } else {
                    let _ = write!(out, " {text} |");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}
