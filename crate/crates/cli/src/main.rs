//! `stair`: run, score and replay exercises, train and evaluate sign
//! models, and serve the live twin on the bus.

mod commands;
mod ui;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stair_bus::server::{DEFAULT_TCP_PORT, DEFAULT_WS_PORT, PORT_ENV};

/// Exit status for usage, I/O and validation errors.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "stair", version, about = "Digital twin of a tracked educational robot with arm and camera")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Clone, Copy)]
struct BusPorts {
    /// TCP port of the bus; 0 picks a free port.
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_TCP_PORT)]
    bus_port: u16,
    /// WebSocket port of the bus; 0 picks a free port.
    #[arg(long, default_value_t = DEFAULT_WS_PORT)]
    ws_port: u16,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tier {
    Centroid,
    Svm,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the twin interactively on the bus.
    Sim {
        #[arg(long)]
        arena: PathBuf,
        #[command(flatten)]
        ports: BusPorts,
        /// Start pose as `x,y,theta`; defaults to the arena center facing +x.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Detector score threshold; centroid confidences rarely exceed 0.3.
        #[arg(long)]
        min_score: Option<f64>,
        /// Sim seconds per wall-clock second; 0 steps only on `/sim/step`.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Serve the browser cockpit's static files from this directory.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        http_port: u16,
        /// Exit after this many wall-clock seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run a program in a scenario and print the report.
    Run {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        arena: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Classifier to use instead of the scenario's.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Start pose `x,y,theta` for `--arena` runs.
        #[arg(long, requires = "arena")]
        start: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        max_time: Option<f64>,
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
    },
    /// Train a sign classifier from a PPM dataset directory.
    Train {
        #[arg(long, value_enum)]
        tier: Tier,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Accuracy and confusion matrix of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Render jittered glyph patches into a dataset directory.
    GenData {
        /// Comma-separated class names; all sign classes when omitted.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-publish a trace's sensor topics on the bus.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        fast: bool,
        /// Score the replayed trace against this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        ports: BusPorts,
    },
    /// Score a recorded trace against a scenario.
    Score {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
