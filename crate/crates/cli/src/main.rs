use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coplan_core::agents::{DurationDist, HumanPolicy, PolicyKind, RobotModel, ScriptStep};
use coplan_core::graph::AndOrGraph;
use coplan_core::model::{load_model, GraphSpec};
use coplan_core::sim::{
    export_results, run_batch, BatchReport, ExportFormat, ModelSource, Palletize, SimConfig,
};
use coplan_service::server::{serve, AppState, ServiceConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "coplan",
    version,
    about = "Cooperation planning on AND/OR graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every cooperation path, cheapest first.
    Enumerate(ModelArgs),
    /// Print the cheapest cooperation path.
    Optimal(ModelArgs),
    /// Run a batch of simulated trials.
    Simulate(SimulateArgs),
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, env = "COPLAN_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelChoice {
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Built-in palletization task with K parts.
    #[arg(long, value_name = "K")]
    palletize: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    choice: ModelChoice,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with_all = ["palletize", "scenario"])]
    model: Option<PathBuf>,
    #[arg(long, value_name = "K", conflicts_with = "scenario")]
    palletize: Option<usize>,
    /// Scenario file; other flags override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// compliant, intervene:P or script:FILE
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds a human turn may take.
    #[arg(long)]
    timeout: Option<f64>,
    /// Per-trial results, CSV or JSONL by extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate(args) => enumerate(&args.choice, false),
        Command::Optimal(args) => enumerate(&args.choice, true),
        Command::Simulate(args) => simulate(&args),
        Command::Serve { port, host } => serve_cmd(&host, port),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_spec(choice: &ModelChoice) -> Result<GraphSpec> {
    let source = match (&choice.model, choice.palletize) {
        (Some(path), _) => {
            return load_model(path).with_context(|| format!("loading {}", path.display()))
        }
        (None, Some(k)) => ModelSource::Palletize(Palletize::new(k)),
        (None, None) => bail!("one of --model or --palletize is required"),
    };
    Ok(source.spec()?)
}

fn enumerate(choice: &ModelChoice, best_only: bool) -> Result<ExitCode> {
    let graph = AndOrGraph::load(&load_spec(choice)?)?;
    let mut out = BufWriter::new(io::stdout().lock());
    if best_only {
        let p = graph.optimal_path()?;
        writeln!(out, "{} {}", p.cost(), p.describe(&graph))?;
        for (arc, action) in p.action_sequence(&graph) {
            let agent = format!("{:?}", action.agent).to_lowercase();
            writeln!(out, "  {} {} {agent}", graph.arc(arc).name, action.name)?;
        }
    } else {
        for (i, p) in graph.paths()?.iter().enumerate() {
            writeln!(out, "{i} {} {}", p.cost(), p.describe(&graph))?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Human durations in seconds for the palletization actions.
fn default_human() -> HumanPolicy {
    let u = |min, max| DurationDist::Uniform { min, max };
    HumanPolicy {
        durations: [
            ("inspect", u(1.9, 2.3)),
            ("deliver-part", u(1.7, 2.1)),
            ("palletize", u(3.5, 4.5)),
            ("handover", u(2.5, 3.5)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        ..HumanPolicy::default()
    }
}

fn default_robot() -> RobotModel {
    let u = |min, max| DurationDist::Uniform { min, max };
    let c = DurationDist::Constant;
    RobotModel {
        durations: [
            ("approach-part", u(5.5, 6.5)),
            ("grasp", c(2.0)),
            ("approach-goal", u(9.5, 10.5)),
            ("ungrasp", c(1.5)),
            ("start-pose", c(7.271333)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        ..RobotModel::default()
    }
}

fn parse_policy(text: &str) -> Result<PolicyKind> {
    if text == "compliant" {
        return Ok(PolicyKind::Compliant);
    }
    if let Some(p) = text.strip_prefix("intervene:") {
        let p: f64 = p
            .parse()
            .with_context(|| format!("bad probability {p:?}"))?;
        return Ok(PolicyKind::Interventionist { p });
    }
    if let Some(file) = text.strip_prefix("script:") {
        let body = std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
        let steps: Vec<ScriptStep> =
            serde_json::from_str(&body).with_context(|| format!("parsing {file}"))?;
        return Ok(PolicyKind::Scripted { steps });
    }
    Err(anyhow!(
        "unknown policy {text:?}; expected compliant, intervene:P or script:FILE"
    ))
}

fn build_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut config = match &args.scenario {
        Some(path) => SimConfig::load(path)?,
        None => {
            let model = match (&args.model, args.palletize) {
                (Some(p), _) => ModelSource::File(p.clone()),
                (None, Some(k)) => ModelSource::Palletize(Palletize::new(k)),
                (None, None) => bail!("one of --model, --palletize or --scenario is required"),
            };
            SimConfig::new(model, default_human(), default_robot())
        }
    };
    if let Some(policy) = &args.policy {
        config.human.policy = parse_policy(policy)?;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.timeout {
        config.timeout = t;
    }
    config.validate()?;
    Ok(config)
}

fn write_results(path: &Path, report: &BatchReport) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    export_results(&report.results, ExportFormat::from_path(path), &mut w)?;
    w.flush()?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let config = build_config(args)?;
    let report = run_batch(&config)?;
    if let Some(path) = &args.out {
        write_results(path, &report)?;
    }
    let s = &report.summary;
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(s)?)?;
    } else {
        writeln!(
            out,
            "trials {} successes {} rate {:.3}",
            s.trials, s.successes, s.success_rate
        )?;
        for (code, n) in &s.failures {
            writeln!(out, "failed {code} {n}")?;
        }
        if let Some(t) = &s.timing {
            for (name, st) in [
                ("T_m", t.t_m),
                ("T_h", t.t_h),
                ("T_r", t.t_r),
                ("T_c", t.t_c),
            ] {
                writeln!(out, "{name} {:.3} ± {:.3} s", st.mean, st.std)?;
            }
            writeln!(
                out,
                "split {:.2}/{:.2}/{:.2} %  hw {:.2}",
                t.split.t_m, t.split.t_h, t.split.t_r, t.hw_count
            )?;
        }
    }
    Ok(if s.successes == 0 {
        ExitCode::from(EXIT_ALL_FAILED)
    } else {
        ExitCode::SUCCESS
    })
}

fn serve_cmd(host: &str, port: u16) -> Result<ExitCode> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        tracing::info!("listening on {}", listener.local_addr()?);
        serve(listener, AppState::new(ServiceConfig::from_env())).await?;
        Ok(ExitCode::SUCCESS)
    })
}
