//! `qbench`: run benchmark campaigns, plot them and host the pairing game.

use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use qbench_core::campaign::{read_result, render_plot, run_campaign, write_result, CampaignSpec, Metric, Mitigation};
use qbench_core::protocol::{StatNoise, Strategy};
use qbench_core::simulator::{NoiseModel, Shots};
use qbench_core::topology::{CouplingGraph, DeviceCatalog, DeviceFile, TopologyError};
use qbench_game::{AppState, GameConfig, SavedGames};

#[derive(Debug, Parser)]
#[command(name = "qbench", version, about = "Random-circuit benchmarking of qubit devices")]
struct Cli {
    /// Extra directory of device JSON files, added to the builtin catalog.
    #[arg(long, global = true, env = "QAB_DEVICES_DIR")]
    devices_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect the device catalog.
    Devices {
        #[command(subcommand)]
        action: DevicesAction,
    },
    /// Run a benchmark campaign and write its results file.
    Run(RunArgs),
    /// Render one metric of a results file as SVG.
    Plot(PlotArgs),
    /// Host the pairing game.
    Game {
        #[command(subcommand)]
        action: GameAction,
    },
}

#[derive(Debug, Subcommand)]
enum DevicesAction {
    /// Print the names of all file-backed devices.
    List,
    /// Print a device's qubits and labelled edges.
    Show {
        name: String,
        /// Print the device file as JSON instead.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
#[group(id = "shot_mode", multiple = false)]
struct ShotArgs {
    /// Measurement shots per circuit execution.
    #[arg(long, env = "QAB_SHOTS", group = "shot_mode", value_parser = clap::value_parser!(u32).range(1..))]
    shots: Option<u32>,
    /// Use exact outcome probabilities instead of sampled shots (the default).
    #[arg(long, env = "QAB_EXACT", group = "shot_mode")]
    exact: bool,
}

impl ShotArgs {
    fn shots(&self) -> Shots {
        match self.shots {
            Some(n) if !self.exact => Shots::Count(n),
            _ => Shots::Exact,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, env = "QAB_DEVICE")]
    device: String,
    /// Comma-separated: true-pairs, random-pairs, mwpm-pairs, emulated-stat-noise.
    #[arg(long, env = "QAB_STRATEGY", value_delimiter = ',', required = true, value_parser = parse_strategy)]
    strategy: Vec<Strategy>,
    #[arg(long, env = "QAB_ROUNDS", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    #[command(flatten)]
    shots: ShotArgs,
    #[arg(long, env = "QAB_SAMPLES", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, env = "QAB_SEED", default_value_t = 0)]
    seed: u64,
    /// `p1,p2,readout`, `typical` or `none`.
    #[arg(long, env = "QAB_NOISE", default_value = "none", value_parser = parse_noise)]
    noise: NoiseModel,
    /// Also compute mutual-information-mitigated metrics.
    #[arg(long, env = "QAB_MITIGATE")]
    mitigate: bool,
    /// Sign rule of the emulated statistical-noise shift.
    #[arg(long, env = "QAB_STAT_NOISE", default_value = "constant", value_parser = parse_stat_noise)]
    stat_noise: StatNoise,
    /// Keep every sample's round records (needed for saved-data games).
    #[arg(long, env = "QAB_FULL")]
    full: bool,
    #[arg(long, env = "QAB_OUT")]
    out: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "QAB_JOBS", value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long = "in", env = "QAB_IN")]
    input: PathBuf,
    #[arg(long, env = "QAB_METRIC", value_parser = |s: &str| s.parse::<Metric>())]
    metric: Metric,
    #[arg(long, env = "QAB_OUT")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum GameAction {
    /// Serve the game's HTTP/JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Device used when a new game names none.
    #[arg(long, env = "QAB_DEVICE")]
    device: Option<String>,
    #[arg(long, env = "QAB_HOST", default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "QAB_PORT", default_value_t = 8080)]
    port: u16,
    /// Default noise for new games: `p1,p2,readout`, `typical` or `none`.
    #[arg(long, env = "QAB_NOISE", default_value = "none", value_parser = parse_noise)]
    noise: NoiseModel,
    #[command(flatten)]
    shots: ShotArgs,
    /// Replay recorded rounds from a results file written with `run --full`.
    #[arg(long, env = "QAB_SAVED")]
    saved: Option<PathBuf>,
    /// Minutes of inactivity before a game expires.
    #[arg(long, env = "QAB_IDLE_MINUTES", default_value_t = 30)]
    idle_minutes: u64,
    /// Sessions are restored from this file at startup and written back on exit.
    #[arg(long, env = "QAB_SNAPSHOT")]
    snapshot: Option<PathBuf>,
    /// Success fraction below which clients declare the game over.
    #[arg(long, env = "QAB_THRESHOLD", default_value_t = 0.5)]
    threshold: f64,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s.parse::<Strategy>() {
        Ok(Strategy::PlayerPairs) => Err("player-pairs is only available through the game".into()),
        Ok(strategy) => Ok(strategy),
        Err(_) => Err(format!(
            "unknown strategy `{s}` (expected true-pairs, random-pairs, mwpm-pairs or emulated-stat-noise)"
        )),
    }
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    match s {
        "none" | "noiseless" => return Ok(NoiseModel::noiseless()),
        "typical" => return Ok(NoiseModel::typical()),
        _ => {}
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [p1, p2, readout] = parts[..] else {
        return Err("expected `p1,p2,readout`, `typical` or `none`".into());
    };
    let num = |v: &str| v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
    NoiseModel::new(num(p1)?, num(p2)?, num(readout)?).map_err(|e| e.to_string())
}

fn parse_stat_noise(s: &str) -> Result<StatNoise, String> {
    match s {
        "constant" => Ok(StatNoise::Constant),
        "random-sign" => Ok(StatNoise::RandomSign),
        _ => Err("expected `constant` or `random-sign`".into()),
    }
}

/// Prints a clap-style usage error and exits with status 2.
fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::InvalidValue, message).exit()
}

fn catalog(dir: Option<&Path>) -> DeviceCatalog {
    match dir {
        Some(dir) => DeviceCatalog::with_dir(dir).unwrap_or_else(|e| usage_error(e)),
        None => DeviceCatalog::builtin(),
    }
}

fn device(catalog: &DeviceCatalog, name: &str) -> CouplingGraph {
    catalog.get(name).unwrap_or_else(|e| match e {
        TopologyError::UnknownDevice(_) => usage_error(format!(
            "{e}; known devices: {} and the families line_N, ladder_N, square_N, complete_N",
            catalog.names().join(", ")
        )),
        other => usage_error(other),
    })
}

fn devices(catalog: &DeviceCatalog, action: DevicesAction) -> Result<()> {
    let mut out = io::stdout().lock();
    match action {
        DevicesAction::List => {
            for name in catalog.names() {
                writeln!(out, "{name}")?;
            }
        }
        DevicesAction::Show { name, json } => {
            let g = device(catalog, &name);
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&DeviceFile::from(g))?)?;
                return Ok(());
            }
            writeln!(out, "{g}")?;
            if let Some(p) = g.provenance() {
                writeln!(out, "provenance: {p}")?;
            }
            for e in g.edges() {
                writeln!(out, "  {:>3}  {} - {}", e.label, e.a, e.b)?;
            }
        }
    }
    Ok(())
}

fn run(catalog: &DeviceCatalog, args: RunArgs) -> Result<()> {
    device(catalog, &args.device);
    let mut spec = CampaignSpec::new(args.device, args.strategy);
    spec.rounds = args.rounds as usize;
    spec.shots = args.shots.shots();
    spec.samples = args.samples as usize;
    spec.noise = args.noise;
    spec.seed = args.seed;
    spec.mitigation = if args.mitigate { Mitigation::Both } else { Mitigation::Off };
    spec.stat_noise = args.stat_noise;
    spec.full = args.full;
    if let Err(e) = spec.validate() {
        usage_error(e);
    }
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
            .context("starting the worker pool")?;
    }

    let start = Instant::now();
    let result = run_campaign(&spec, catalog)?;
    write_result(&result, &args.out)?;
    eprintln!(
        "{} x {} samples x {} rounds on {} in {:.1}s -> {}",
        spec.strategies.len(),
        spec.samples,
        spec.rounds,
        spec.device,
        start.elapsed().as_secs_f64(),
        args.out.display()
    );
    let mut out = io::stdout().lock();
    for (strategy, stats) in &result.series {
        for (key, stat) in stats {
            let means: Vec<String> = stat.mean.iter().map(|m| format!("{m:.3}")).collect();
            writeln!(out, "{strategy:<20} {key:<18} {}", means.join(" "))?;
        }
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let result = read_result(&args.input)?;
    render_plot(&result, args.metric, &args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn serve(catalog: DeviceCatalog, args: ServeArgs) -> Result<()> {
    if let Some(name) = &args.device {
        device(&catalog, name);
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        usage_error("--threshold must lie in [0, 1]");
    }
    let saved = match &args.saved {
        Some(path) => {
            let result = read_result(path)?;
            Some(SavedGames::from_result(&result, &catalog).with_context(|| format!("loading {}", path.display()))?)
        }
        None => None,
    };
    let config = GameConfig {
        default_device: args.device,
        shots: args.shots.shots(),
        noise: args.noise,
        idle_timeout: Duration::from_secs(args.idle_minutes * 60),
        game_over_threshold: args.threshold,
        snapshot: args.snapshot.clone(),
    };
    let state = AppState::new(catalog, config, saved);
    if let Some(path) = &args.snapshot {
        let restored = state.load_snapshot(path)?;
        if restored > 0 {
            eprintln!("restored {restored} games from {}", path.display());
        }
    }

    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(async {
        let addr = SocketAddr::new(args.host, args.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("game service listening on http://{}", listener.local_addr()?);
        qbench_game::serve(state, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("serving")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let catalog = catalog(cli.devices_dir.as_deref());
    let outcome = match cli.command {
        Command::Devices { action } => devices(&catalog, action),
        Command::Run(args) => run(&catalog, args),
        Command::Plot(args) => plot(args),
        Command::Game {
            action: GameAction::Serve(args),
        } => serve(catalog, args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<io::Error>())
        .any(|e| e.kind() == io::ErrorKind::BrokenPipe)
}

/// The error chain joined with `: `, skipping causes already spelled out by
/// the message before them.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}
