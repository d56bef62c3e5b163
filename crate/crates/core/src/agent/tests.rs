use super::*;
use crate::net::{isolated_junction, Compass, RoadNetwork};
use crate::sim::{init_simulation, DemandProfile, EventSchedule, SensorOutage};
use crate::tools::GET_JUNCTION_SITUATION;

fn four_way() -> RoadNetwork {
    isolated_junction("J1", &Compass::ALL, 3, 300.0)
}

fn sim(horizon: u64, schedule: Option<EventSchedule>) -> SimState {
    let net = four_way();
    let schedule = schedule.unwrap_or_else(|| EventSchedule::empty(horizon));
    init_simulation(&net, &DemandProfile::uniform(&net, 300.0), &schedule, 11).unwrap()
}

fn config(horizon: u64) -> AgentConfig {
    AgentConfig {
        horizon,
        ..AgentConfig::default()
    }
}

fn run(backend: &mut dyn DecisionBackend, horizon: u64, mode: AgentMode) -> (AgentRun, SimState) {
    let mut s = sim(horizon, None);
    let cfg = AgentConfig { mode, ..config(horizon) };
    let out = control_loop(&cfg, &ControllerParams::default(), &mut s, backend).unwrap();
    (out, s)
}

/// Calls Get_Phase_ID forever.
struct Chatty;

impl DecisionBackend for Chatty {
    fn kind(&self) -> String {
        "chatty".into()
    }
    fn respond(&mut self, r: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        Ok(BackendMessage::call(GET_PHASE_ID, junction_args(r.junction)))
    }
}

struct Broken;

impl DecisionBackend for Broken {
    fn kind(&self) -> String {
        "broken".into()
    }
    fn respond(&mut self, _: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        Err(BackendError::Transport("connection refused".into()))
    }
}

/// Answers with a fixed text and records every prompt it was shown.
struct Echo {
    answer: String,
    prompts: Vec<String>,
}

impl DecisionBackend for Echo {
    fn kind(&self) -> String {
        "echo".into()
    }
    fn respond(&mut self, r: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        self.prompts.push(r.system_prompt());
        Ok(BackendMessage::text(self.answer.clone()))
    }
}

#[test]
fn scripted_agent_decides_every_cycle_without_fallback() {
    let (out, s) = run(&mut ScriptedBackend::new(), 300, AgentMode::Tools);
    assert_eq!(s.clock(), 300);
    assert!(!out.decisions.is_empty());
    for d in &out.decisions {
        assert!(!d.provenance.fallback, "{d:?}");
        assert_eq!(d.provenance.tool_calls, 7);
        assert_eq!(d.provenance.retries, 0);
        assert!(!d.justification.is_empty());
    }
}

#[test]
fn noise_backend_always_falls_back_to_auxiliary() {
    let (out, _) = run(&mut NoiseBackend::new(5), 120, AgentMode::Tools);
    assert!(!out.decisions.is_empty());
    for d in &out.decisions {
        assert!(d.provenance.fallback);
        assert_eq!(d.provenance.retries, 3);
    }
    // the fallback action is what the auxiliary tool recommended
    let aux: Vec<&TranscriptRecord> = out
        .transcript
        .iter()
        .filter(|r| r.tool.as_deref() == Some(GET_AUXILIARY_DECISION) && r.role == "tool")
        .collect();
    assert_eq!(aux.len(), out.decisions.len());
    for (a, d) in aux.iter().zip(&out.decisions) {
        assert_eq!(a.observation.as_ref().unwrap().data["recommended"], json!(d.action));
    }
    // four answers per cycle: one first try and three retries
    let feedback = out.transcript.iter().filter(|r| r.role == "user").count();
    assert_eq!(feedback, 3 * out.decisions.len());
}

#[test]
fn tool_budget_overrun_falls_back() {
    let (out, _) = run(&mut Chatty, 60, AgentMode::Tools);
    for d in &out.decisions {
        assert!(d.provenance.fallback);
        assert_eq!(d.provenance.tool_calls, 10);
        assert!(d.provenance.fallback_reason.as_deref().unwrap().contains("budget"));
    }
}

#[test]
fn backend_error_falls_back() {
    let (out, _) = run(&mut Broken, 60, AgentMode::Tools);
    assert!(out.decisions.iter().all(|d| d.provenance.fallback
        && d.provenance.fallback_reason.as_deref().unwrap().contains("connection refused")));
}

#[test]
fn empty_justification_is_recorded_as_none_given() {
    let mut echo = Echo {
        answer: "{\"action\": \"P2\", \"justification\": \"\"}".into(),
        prompts: Vec::new(),
    };
    let (out, _) = run(&mut echo, 30, AgentMode::Tools);
    assert_eq!(out.decisions[0].action, PhaseId(2));
    let record = out
        .transcript
        .iter()
        .find(|r| r.tool.as_deref() == Some(JUSTIFY_DECISION_LOGIC) && r.role == "tool")
        .unwrap();
    assert_eq!(record.observation.as_ref().unwrap().data["justification"], "none given");
}

#[test]
fn prompt_has_five_sections_in_order() {
    let mut echo = Echo {
        answer: "{\"action\": \"P1\", \"justification\": \"hold\"}".into(),
        prompts: Vec::new(),
    };
    run(&mut echo, 60, AgentMode::Tools);
    let prompt = &echo.prompts[2];
    let at = |h: &str| prompt.find(h).unwrap_or_else(|| panic!("missing {h}"));
    let order = [
        at("# Task description"),
        at("# Tools"),
        at("# Observations"),
        at("# Attention points"),
        at("# Output format"),
    ];
    assert!(order.windows(2).all(|w| w[0] < w[1]));
    assert!(prompt.contains(GET_JUNCTION_SITUATION));
    assert!(prompt.contains("Decision: P1 (hold)"));
}

#[test]
fn vanilla_mode_dumps_state_and_rejects_tool_calls() {
    let mut echo = Echo {
        answer: "{\"action\": \"P3\", \"justification\": \"west busy\"}".into(),
        prompts: Vec::new(),
    };
    let (out, _) = run(&mut echo, 30, AgentMode::Vanilla);
    assert!(echo.prompts[0].contains("No tools are available"));
    assert!(!echo.prompts[0].contains("Description:"));
    let dumped: Vec<&str> = out
        .transcript
        .iter()
        .filter(|r| r.cycle == 0 && r.role == "tool")
        .filter_map(|r| r.tool.as_deref())
        .take(5)
        .collect();
    assert_eq!(dumped, STATE_DUMP_TOOLS);
    assert_eq!(out.decisions[0].action, PhaseId(3));

    let (out, _) = run(&mut Chatty, 30, AgentMode::Vanilla);
    assert!(out.decisions[0].provenance.fallback);
    assert_eq!(out.decisions[0].provenance.tool_calls, 0);
}

#[test]
fn replay_reproduces_scripted_run() {
    let (first, s1) = run(&mut ScriptedBackend::new(), 300, AgentMode::Tools);
    let mut replay = ReplayBackend::new(&first.transcript);
    let (second, s2) = run(&mut replay, 300, AgentMode::Tools);
    assert_eq!(replay.remaining(), 0);
    let actions = |r: &AgentRun| r.decisions.iter().map(|d| d.action).collect::<Vec<_>>();
    assert_eq!(actions(&first), actions(&second));
    assert_eq!(s1.trip_records(), s2.trip_records());
    assert!(second.decisions.iter().all(|d| !d.provenance.fallback));
}

#[test]
fn replay_past_the_recording_falls_back() {
    let (first, _) = run(&mut ScriptedBackend::new(), 60, AgentMode::Tools);
    let mut replay = ReplayBackend::new(&first.transcript);
    let (second, _) = run(&mut replay, 120, AgentMode::Tools);
    let last = second.decisions.last().unwrap();
    assert!(last.provenance.fallback);
    assert!(last.provenance.fallback_reason.as_deref().unwrap().contains("no recorded message"));
}

#[test]
fn transcript_round_trips_through_ndjson() {
    let (out, _) = run(&mut ScriptedBackend::new(), 60, AgentMode::Tools);
    let mut buf = Vec::new();
    write_transcript(&mut buf, &out.transcript).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), out.transcript.len());
    assert_eq!(read_transcript(buf.as_slice()).unwrap(), out.transcript);
    let roles: std::collections::BTreeSet<&str> = out.transcript.iter().map(|r| r.role.as_str()).collect();
    for role in ["system", "assistant", "tool", "decision"] {
        assert!(roles.contains(role));
    }
}

#[test]
fn scripted_agent_handles_outage_with_imputation() {
    let mut schedule = EventSchedule::empty(300);
    schedule.sensor_outages.push(SensorOutage {
        start: 0,
        end: 300,
        junction: "J1".into(),
        approach: "E1".into(),
    });
    let mut s = sim(300, Some(schedule));
    let out = control_loop(&config(300), &ControllerParams::default(), &mut s, &mut ScriptedBackend::new()).unwrap();
    assert!(out.decisions.iter().any(|d| d.justification.contains("-100%") && d.justification.contains("imputed")));
}

#[test]
fn config_check() {
    assert!(AgentConfig::default().check().is_ok());
    let bad = AgentConfig {
        delta_t: 2,
        ..AgentConfig::default()
    };
    assert!(bad.check().is_err());
}
