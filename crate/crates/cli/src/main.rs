use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use tsc_core::agent::{read_transcript, TranscriptRecord};
use tsc_core::harness::{run_experiment, AgentBackendKind, ControllerSpec, HarnessError, RunConfig};
use tsc_core::metrics::{compare_runs, render_value, MetricsReport};
use tsc_core::net::{load_network, validate_network};
use tsc_core::tools::ToolRegistry;
use tsc_core::{PhaseId, ScenarioKind};

#[derive(Parser)]
#[command(name = "tsc", version, about = "Traffic signal control benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one controller on one network and scenario for one or more seeds.
    Run(RunArgs),
    /// Tabulate metrics reports (files or run directories) side by side.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Check a network file against the structural rules.
    Validate { network: PathBuf },
    /// Re-run a recorded agent transcript and report whether the decisions match.
    Replay(ReplayArgs),
    /// Tool listings.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
}

#[derive(Subcommand)]
enum ToolsCommand {
    /// Print the tool catalog as JSON.
    Catalog,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    scenario: ScenarioKind,
    /// fixed, webster, sotl, maxpressure or agent:<scripted|llm|vanilla-llm|replay|noise>
    #[arg(long)]
    controller: ControllerSpec,
    /// Seed, or an inclusive range `a..=b`; repeatable.
    #[arg(long = "seed", value_parser = parse_seeds, default_value = "1")]
    seeds: Vec<Vec<u64>>,
    #[arg(long, default_value_t = 3600)]
    duration: u64,
    #[arg(long = "delta-t", default_value_t = 15)]
    delta_t: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Controller parameter override `key=value`; repeatable.
    #[arg(long = "controller-param")]
    params: Vec<String>,
    #[arg(long = "att-excludes-emv")]
    att_excludes_emv: bool,
    #[arg(long = "llm-endpoint")]
    llm_endpoint: Option<String>,
    #[arg(long = "llm-model")]
    llm_model: Option<String>,
    /// Recorded transcript for agent:replay.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    transcript: PathBuf,
    /// Run config to reuse; defaults to run.json next to the transcript or one level up.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the recorded run; defaults to the one in metrics.json next to the transcript.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed `{x}`: {e}"));
    match s.split_once("..=") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty seed range {s}"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![num(s)?]),
    }
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn runtime_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Runtime(msg.into())
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let mut config = RunConfig::new(&args.network, args.scenario, args.controller, 1);
    config.seeds = args.seeds.concat();
    config.duration = args.duration;
    config.delta_t = args.delta_t;
    config.att_excludes_emv = args.att_excludes_emv;
    config.transcript = args.transcript;
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_error(format!("--controller-param expects key=value, got `{kv}`")))?;
        config.params.set(k.trim(), v).map_err(config_error)?;
    }
    if let Some(endpoint) = args.llm_endpoint {
        config.llm.endpoint = endpoint;
    }
    if let Some(model) = args.llm_model {
        config.llm.model = model;
    }
    let experiment = run_experiment(&config, args.out.as_deref())?;
    println!("| Seed | ATT (s) | AWT (s) | AETT (s) | AEWT (s) | Completed | Unfinished |");
    println!("|---|---|---|---|---|---|---|");
    for r in experiment.reports() {
        println!(
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.run.seed,
            render_value(r.att),
            render_value(r.awt),
            render_value(r.aett),
            render_value(r.aewt),
            r.completed_trips,
            r.unfinished_trips
        );
    }
    if experiment.runs.len() > 1 {
        let a = &experiment.aggregate;
        println!(
            "| mean | {} | {} | {} | {} | | |",
            render_value(a.att.mean),
            render_value(a.awt.mean),
            render_value(a.aett.mean),
            render_value(a.aewt.mean)
        );
    }
    if let Some(dir) = &args.out {
        println!("\nartifacts written to {}", dir.display());
    }
    Ok(())
}

/// Metrics files named directly or found in a run directory.
fn report_files(path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let direct = path.join("metrics.json");
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut found: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path().join("metrics.json")))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(config_error(format!("{}: no metrics.json found", path.display())));
    }
    Ok(found)
}

fn compare(paths: &[PathBuf], format: Format) -> Result<(), HarnessError> {
    let mut reports = Vec::new();
    for path in paths {
        for file in report_files(path)? {
            let text = fs::read_to_string(&file).map_err(|e| config_error(format!("{}: {e}", file.display())))?;
            let report =
                MetricsReport::from_json(&text).map_err(|e| config_error(format!("{}: {e}", file.display())))?;
            reports.push(report);
        }
    }
    let table = compare_runs(&reports).map_err(|e| config_error(e.to_string()))?;
    match format {
        Format::Markdown => print!("{}", table.to_markdown()),
        Format::Json => print!("{}", table.to_json()),
    }
    Ok(())
}

fn validate(path: &Path) -> Result<(), HarnessError> {
    let net = load_network(path).map_err(|e| config_error(e.to_string()))?;
    let report = validate_network(&net);
    if report.is_valid() {
        println!(
            "{}: valid ({} junctions, {} links, {} routes)",
            path.display(),
            net.junctions.len(),
            net.links.len(),
            net.routes.len()
        );
        Ok(())
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        Err(config_error(format!("{}: {} violations", path.display(), report.violations.len())))
    }
}

fn find_near(transcript: &Path, name: &str) -> Option<PathBuf> {
    let dir = transcript.parent()?;
    [Some(dir), dir.parent()]
        .into_iter()
        .flatten()
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

fn read_json(path: &Path) -> Result<Value, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

type DecisionKey = (String, u64, u64, Option<PhaseId>, Option<String>);

fn decisions(records: &[TranscriptRecord]) -> Vec<DecisionKey> {
    records
        .iter()
        .filter(|r| r.role == "decision")
        .map(|r| (r.junction.clone(), r.cycle, r.t, r.decision, r.justification.clone()))
        .collect()
}

fn replay(args: ReplayArgs) -> Result<(), HarnessError> {
    let file = fs::File::open(&args.transcript)
        .map_err(|e| config_error(format!("{}: {e}", args.transcript.display())))?;
    let recorded = read_transcript(std::io::BufReader::new(file))
        .map_err(|e| config_error(format!("{}: {e}", args.transcript.display())))?;
    let config_path = args
        .config
        .or_else(|| find_near(&args.transcript, "run.json"))
        .ok_or_else(|| config_error("no run.json found near the transcript; pass --config"))?;
    let echo = read_json(&config_path)?;
    let mut config: RunConfig = serde_json::from_value(echo.get("config").cloned().unwrap_or(echo))
        .map_err(|e| config_error(format!("{}: {e}", config_path.display())))?;
    let seed = match args.seed {
        Some(s) => s,
        None => {
            let from_metrics = args
                .transcript
                .parent()
                .map(|d| d.join("metrics.json"))
                .filter(|p| p.is_file())
                .map(|p| read_json(&p))
                .transpose()?
                .and_then(|m| m.pointer("/run/seed").and_then(Value::as_u64));
            match (from_metrics, config.seeds.as_slice()) {
                (Some(s), _) => s,
                (None, [only]) => *only,
                _ => return Err(config_error("cannot tell which seed was recorded; pass --seed")),
            }
        }
    };
    config.controller = ControllerSpec::Agent(AgentBackendKind::Replay);
    config.transcript = Some(args.transcript.clone());
    config.seeds = vec![seed];
    let experiment = run_experiment(&config, args.out.as_deref())?;
    let replayed = experiment.runs[0].transcript.as_deref().unwrap_or_default();
    let (a, b) = (decisions(&recorded), decisions(replayed));
    let differ = a.len().abs_diff(b.len()) + a.iter().zip(&b).filter(|(x, y)| x != y).count();
    let r = &experiment.runs[0].report;
    println!(
        "replayed {} decisions (seed {seed}): {differ} differ; ATT {} s, AWT {} s, AETT {} s, AEWT {} s",
        a.len(),
        render_value(r.att),
        render_value(r.awt),
        render_value(r.aett),
        render_value(r.aewt)
    );
    if differ == 0 {
        Ok(())
    } else {
        Err(runtime_error(format!("replay diverged from the recording in {differ} decisions")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { reports, format } => compare(&reports, format),
        Command::Validate { network } => validate(&network),
        Command::Replay(args) => replay(args),
        Command::Tools {
            command: ToolsCommand::Catalog,
        } => {
            let catalog = ToolRegistry::new().catalog();
            println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
