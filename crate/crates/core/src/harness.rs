//! Experiment orchestration: one config, one or more seeds, a report per
//! run plus its event stream and (for agent runs) the dialogue transcript.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::agent::{
    control_loop, read_transcript, write_transcript, AgentConfig, AgentMode, Decision, DecisionBackend, LlmBackend,
    LlmConfig, NoiseBackend, ReplayBackend, ScriptedBackend, TranscriptRecord,
};
use crate::control::run_control_loop;
use crate::controllers::{Controller, ControllerKind, ControllerParams};
use crate::metrics::{compute_metrics_with, Metric, MetricsReport, RunDescriptor, SCHEMA_VERSION};
use crate::net::{load_network, RoadNetwork};
use crate::sim::{generate_scenario, init_simulation, DemandProfile, ScenarioKind, SimEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentBackendKind {
    Scripted,
    Llm,
    VanillaLlm,
    Replay,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerSpec {
    Classic(ControllerKind),
    Agent(AgentBackendKind),
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerSpec::Classic(k) => write!(f, "{k}"),
            ControllerSpec::Agent(b) => f.write_str(match b {
                AgentBackendKind::Scripted => "agent:scripted",
                AgentBackendKind::Llm => "agent:llm",
                AgentBackendKind::VanillaLlm => "agent:vanilla-llm",
                AgentBackendKind::Replay => "agent:replay",
                AgentBackendKind::Noise => "agent:noise",
            }),
        }
    }
}

impl FromStr for ControllerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(backend) = s.strip_prefix("agent:") {
            let kind = match backend {
                "scripted" => AgentBackendKind::Scripted,
                "llm" => AgentBackendKind::Llm,
                "vanilla-llm" => AgentBackendKind::VanillaLlm,
                "replay" => AgentBackendKind::Replay,
                "noise" => AgentBackendKind::Noise,
                other => {
                    return Err(format!(
                        "unknown agent backend {other:?}, expected scripted, llm, vanilla-llm, replay or noise"
                    ))
                }
            };
            return Ok(ControllerSpec::Agent(kind));
        }
        s.parse::<ControllerKind>().map(ControllerSpec::Classic).map_err(|_| {
            format!("unknown controller {s:?}, expected fixed, webster, sotl, maxpressure or agent:<backend>")
        })
    }
}

impl Serialize for ControllerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ControllerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: PathBuf,
    pub scenario: ScenarioKind,
    pub controller: ControllerSpec,
    pub seeds: Vec<u64>,
    pub duration: u64,
    pub delta_t: u64,
    #[serde(default)]
    pub params: ControllerParams,
    #[serde(default)]
    pub att_excludes_emv: bool,
    #[serde(default)]
    pub llm: LlmConfig,
    /// Recorded transcript for `agent:replay`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(network: impl Into<PathBuf>, scenario: ScenarioKind, controller: ControllerSpec, seed: u64) -> RunConfig {
        RunConfig {
            network: network.into(),
            scenario,
            controller,
            seeds: vec![seed],
            duration: 3600,
            delta_t: 15,
            params: ControllerParams::default(),
            att_excludes_emv: false,
            llm: LlmConfig::default(),
            transcript: None,
        }
    }

    fn agent_config(&self, mode: AgentMode) -> AgentConfig {
        AgentConfig {
            horizon: self.duration,
            delta_t: self.delta_t,
            mode,
            ..AgentConfig::default()
        }
    }

    /// Everything that can be checked before a simulation starts.
    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.duration == 0 {
            return bad("duration must be positive".into());
        }
        self.params.check().map_err(HarnessError::Config)?;
        self.agent_config(AgentMode::Tools).check().map_err(HarnessError::Config)?;
        if self.controller == ControllerSpec::Agent(AgentBackendKind::Replay) && self.transcript.is_none() {
            return bad("agent:replay needs a transcript file".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

fn runtime(e: impl fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<SimEvent>,
    pub transcript: Option<Vec<TranscriptRecord>>,
    pub decisions: Vec<Decision>,
}

impl RunOutput {
    /// Writes metrics.json, events.ndjson and, for agent runs,
    /// transcript.ndjson into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(runtime)?;
        fs::write(dir.join("metrics.json"), self.report.to_json()).map_err(runtime)?;
        let mut events = String::new();
        for e in &self.events {
            events.push_str(&e.to_json_line());
            events.push('\n');
        }
        fs::write(dir.join("events.ndjson"), events).map_err(runtime)?;
        if let Some(records) = &self.transcript {
            let file = fs::File::create(dir.join("transcript.ndjson")).map_err(runtime)?;
            write_transcript(BufWriter::new(file), records).map_err(runtime)?;
        }
        Ok(())
    }
}

pub fn network_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_replay(path: &Path) -> Result<Vec<TranscriptRecord>, HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    read_transcript(std::io::BufReader::new(file)).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// One seeded run on an already loaded network.
pub fn run_single(
    config: &RunConfig,
    net: &RoadNetwork,
    replay: Option<&[TranscriptRecord]>,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    let schedule = generate_scenario(config.scenario, net, config.duration, seed);
    let mut sim = init_simulation(net, &DemandProfile::from_network(net), &schedule, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let (events, transcript, decisions) = match config.controller {
        ControllerSpec::Classic(kind) => {
            let mut controller = Controller::new(kind, config.params.clone());
            let events = run_control_loop(&mut sim, &mut controller, config.delta_t).map_err(runtime)?;
            (events, None, Vec::new())
        }
        ControllerSpec::Agent(kind) => {
            let mut backend: Box<dyn DecisionBackend> = match kind {
                AgentBackendKind::Scripted => Box::new(ScriptedBackend::new()),
                AgentBackendKind::Noise => Box::new(NoiseBackend::new(seed)),
                AgentBackendKind::Replay => Box::new(ReplayBackend::new(replay.unwrap_or_default())),
                AgentBackendKind::Llm | AgentBackendKind::VanillaLlm => {
                    Box::new(LlmBackend::from_env(config.llm.clone()).map_err(HarnessError::Config)?)
                }
            };
            let mode = if kind == AgentBackendKind::VanillaLlm {
                AgentMode::Vanilla
            } else {
                AgentMode::Tools
            };
            let run = control_loop(&config.agent_config(mode), &config.params, &mut sim, backend.as_mut())
                .map_err(runtime)?;
            (run.events, Some(run.transcript), run.decisions)
        }
    };
    let mut report = compute_metrics_with(&sim.trip_records(), config.duration, config.att_excludes_emv);
    report.run = RunDescriptor {
        network: network_name(&config.network),
        scenario: config.scenario.to_string(),
        controller: config.controller.to_string(),
        seed,
        duration: config.duration,
        delta_t: config.delta_t,
    };
    Ok(RunOutput {
        report,
        events,
        transcript,
        decisions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single value.
    pub std: Option<f64>,
    /// Runs that had a value for this metric.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub network: String,
    pub scenario: String,
    pub controller: String,
    pub seeds: Vec<u64>,
    pub att: MetricSummary,
    pub awt: MetricSummary,
    pub aett: MetricSummary,
    pub aewt: MetricSummary,
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    if n == 0 {
        return MetricSummary {
            mean: None,
            std: None,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MetricSummary {
        mean: Some(mean),
        std: Some(std),
        n,
    }
}

/// Mean and spread of each metric over a batch of reports.
pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let first = reports.first().map(|r| r.run.clone()).unwrap_or_default();
    let of = |m: Metric| summarize(&reports.iter().filter_map(|r| r.metric(m)).collect::<Vec<_>>());
    Aggregate {
        schema_version: SCHEMA_VERSION,
        network: first.network,
        scenario: first.scenario,
        controller: first.controller,
        seeds: reports.iter().map(|r| r.run.seed).collect(),
        att: of(Metric::Att),
        awt: of(Metric::Awt),
        aett: of(Metric::Aett),
        aewt: of(Metric::Aewt),
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub runs: Vec<RunOutput>,
    pub aggregate: Aggregate,
}

impl Experiment {
    pub fn reports(&self) -> Vec<&MetricsReport> {
        self.runs.iter().map(|r| &r.report).collect()
    }
}

/// Checks the config, loads the network and runs every seed (in parallel,
/// results in seed order). With `out`, a single seed writes straight into
/// the directory and several seeds write into `seed-<n>/` subdirectories
/// plus `aggregate.json`. `run.json` always echoes the config.
pub fn run_experiment(config: &RunConfig, out: Option<&Path>) -> Result<Experiment, HarnessError> {
    config.check()?;
    let net = load_network(&config.network).map_err(|e| HarnessError::Config(e.to_string()))?;
    let replay = match (&config.controller, &config.transcript) {
        (ControllerSpec::Agent(AgentBackendKind::Replay), Some(path)) => Some(load_replay(path)?),
        _ => None,
    };
    if matches!(
        config.controller,
        ControllerSpec::Agent(AgentBackendKind::Llm | AgentBackendKind::VanillaLlm)
    ) {
        // fail on a missing key before any simulation starts
        LlmBackend::from_env(config.llm.clone()).map_err(HarnessError::Config)?;
    }
    let runs: Vec<RunOutput> = config
        .seeds
        .par_iter()
        .map(|&seed| run_single(config, &net, replay.as_deref(), seed))
        .collect::<Result<_, _>>()?;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
    let experiment = Experiment {
        aggregate: aggregate(&reports),
        runs,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(runtime)?;
        let echo = serde_json::to_string_pretty(&json!({ "schema_version": SCHEMA_VERSION, "config": config }))
            .expect("config serializes");
        fs::write(dir.join("run.json"), echo + "\n").map_err(runtime)?;
        if let [single] = experiment.runs.as_slice() {
            single.write(dir)?;
        } else {
            for run in &experiment.runs {
                run.write(&dir.join(format!("seed-{}", run.report.run.seed)))?;
            }
            let text = serde_json::to_string_pretty(&experiment.aggregate).expect("aggregate serializes");
            fs::write(dir.join("aggregate.json"), text + "\n").map_err(runtime)?;
        }
    }
    Ok(experiment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net_path(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(name)
    }

    #[test]
    fn controller_spec_round_trip() {
        for s in [
            "fixed",
            "webster",
            "sotl",
            "maxpressure",
            "agent:scripted",
            "agent:llm",
            "agent:vanilla-llm",
            "agent:replay",
            "agent:noise",
        ] {
            assert_eq!(s.parse::<ControllerSpec>().unwrap().to_string(), s);
        }
        assert!("agent:oracle".parse::<ControllerSpec>().is_err());
        assert!("greedy".parse::<ControllerSpec>().is_err());
    }

    #[test]
    fn normal_maxpressure_run_has_no_emergency_metrics() {
        let mut config = RunConfig::new(net_path("4way.json"), ScenarioKind::Normal, "maxpressure".parse().unwrap(), 1);
        config.duration = 600;
        let exp = run_experiment(&config, None).unwrap();
        let report = &exp.runs[0].report;
        assert!(report.att.is_some() && report.awt.is_some());
        assert_eq!(report.aett, None);
        assert_eq!(report.aewt, None);
        assert!(report.to_json().contains("\"schema_version\": 1"));
        assert_eq!(report.run.network, "4way");
    }

    #[test]
    fn batch_aggregate_matches_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(net_path("4way.json"), ScenarioKind::Emv, "agent:scripted".parse().unwrap(), 1);
        config.seeds = vec![1, 2, 3];
        config.duration = 300;
        let exp = run_experiment(&config, Some(dir.path())).unwrap();
        let atts: Vec<f64> = exp.runs.iter().map(|r| r.report.att.unwrap()).collect();
        let mean = atts.iter().sum::<f64>() / 3.0;
        assert!((exp.aggregate.att.mean.unwrap() - mean).abs() < 1e-9);
        for seed in [1, 2, 3] {
            let sub = dir.path().join(format!("seed-{seed}"));
            for f in ["metrics.json", "events.ndjson", "transcript.ndjson"] {
                assert!(sub.join(f).exists(), "{f}");
            }
        }
        assert!(dir.path().join("aggregate.json").exists());
        assert!(dir.path().join("run.json").exists());
    }

    #[test]
    fn config_errors_come_before_simulation() {
        let mut config = RunConfig::new(net_path("missing.json"), ScenarioKind::Normal, "fixed".parse().unwrap(), 1);
        assert_eq!(run_experiment(&config, None).unwrap_err().exit_code(), 2);
        config.network = net_path("4way.json");
        config.delta_t = 1;
        assert_eq!(run_experiment(&config, None).unwrap_err().exit_code(), 2);
        config.delta_t = 15;
        config.controller = "agent:replay".parse().unwrap();
        assert_eq!(run_experiment(&config, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, Some(5.0));
        assert!((s.std.unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[]).mean, None);
        assert_eq!(summarize(&[3.0]).std, Some(0.0));
    }
}
