//! Exercise programs, the deterministic scenario runner, scoring for the
//! line-follow, maze and traffic exercises, and JSONL trace record/replay.

mod command;
mod replay;
mod runner;
mod scenario;
mod scoring;
mod trace;

pub use command::{parse_program, validate_program, without_on_sign, Command};
pub use replay::{replay, ReplayPace};
pub use runner::{run, run_with_bus, Event, Outcome, RunOptions, RunOutput, RunReport, REARM_AFTER, TURN_TOLERANCE};
pub use scenario::{GoalRegion, Perception, Scenario, SuccessRule, TrafficRule, TurnDirection, DEFAULT_MAX_TIME};
pub use scoring::{
    evaluate_trace, in_zone, path_length, score_line_follow, score_maze, score_traffic, Evaluation, LineFollowScore, MazeScore, Violation,
};
pub use trace::{parse_trace, read_trace, trace_to_string, write_trace, GroundRecord, TraceRecord};

use crate::learn::LearnError;
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("bad program at command {index}: {reason}")]
    BadProgram { index: String, reason: String },
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("bad run options: {0}")]
    BadOptions(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("run aborted: {0}")]
    Runtime(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}
