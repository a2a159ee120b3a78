//! `echogrid` command line.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use echogrid_core::tasks::{Agent, TaskKind};
use echogrid_core::Mode;

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "echogrid", version, about = "Vision-to-audio sensory substitution simulator")]
pub struct Cli {
    /// JSON file with engine, judging and pointing overrides.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for single-seed commands (gen-scene, or simulate without --seeds).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory that receives every generated file.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a scene document for a generated task or the bundled corridor.
    GenScene(GenSceneArgs),
    /// Run a scripted agent over a batch of seeds and summarize the results.
    Simulate(SimulateArgs),
    /// Replay a session log through the audio pipeline into a WAV file.
    Render(RenderArgs),
    /// Boxplot summaries and ANOVAs from session logs or a long-format CSV.
    Stats(StatsArgs),
    /// Run the live WebSocket session server.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    Localization,
    Navigation,
    /// Fixed corridor layout; needs no seed.
    Corridor,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    /// Which scene to produce.
    #[arg(long)]
    pub task: SceneKind,
    /// Output file name inside --out-dir [default: scene_<task>[_<seed>].json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// localization or navigation. Ignored with --crossover.
    #[arg(long, required_unless_present = "crossover")]
    pub task: Option<TaskKind>,
    /// 2d or 3d. Ignored with --crossover.
    #[arg(long, required_unless_present = "crossover")]
    pub mode: Option<Mode>,
    /// sweep, up-down-ranger or oracle. With --crossover it replaces both
    /// default agents (sweep for localization, up-down-ranger for navigation).
    #[arg(long)]
    pub agent: Option<Agent>,
    /// Seeds: `0..9` (inclusive), `0..<10`, or a comma list. Defaults to --seed.
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    /// Emulate the two-group, two-session protocol: one virtual participant per
    /// seed, groups alternating by seed order, each session a localization
    /// task plus three navigation courses.
    #[arg(long)]
    pub crossover: bool,
    /// Skip writing per-run logs.
    #[arg(long)]
    pub no_logs: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Session log (JSONL).
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Scene document; regenerated from the log header when omitted.
    #[arg(long, value_name = "PATH")]
    pub scene: Option<PathBuf>,
    /// Output WAV [default: <out-dir>/<log stem>.wav].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Every subject contributes every cell (repeated measures).
    Within,
    /// Each subject contributes one observation per cell; factors are
    /// between-subjects.
    Between,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Session log files or directories of them (*.jsonl), or one CSV with
    /// columns subject,factor1,factor2,value.
    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,
    /// Design of CSV input.
    #[arg(long, value_enum, default_value = "within")]
    pub design: Design,
    /// Report file name inside --out-dir.
    #[arg(long, value_name = "FILE", default_value = "stats_report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub addr: SocketAddr,
    /// Offer server-rendered PCM to clients that ask for it.
    #[arg(long)]
    pub pcm: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    let ctx = commands::Context {
        config: cfg,
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::GenScene(a) => commands::gen_scene::run(&ctx, &a),
        Command::Simulate(a) => commands::simulate::run(&ctx, &a),
        Command::Render(a) => commands::render::run(&ctx, &a),
        Command::Stats(a) => commands::stats::run(&ctx, &a),
        Command::Serve(a) => commands::serve::run(&ctx, &a),
    }
}

/// Task a scene kind maps to, if it is generated.
pub fn scene_task(kind: SceneKind) -> Option<TaskKind> {
    match kind {
        SceneKind::Localization => Some(TaskKind::Localization),
        SceneKind::Navigation => Some(TaskKind::Navigation),
        SceneKind::Corridor => None,
    }
}
