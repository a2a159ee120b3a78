//! Localization and navigation tasks, judging, scripted agents and logs.

pub mod agents;
pub mod localization;
pub mod log;
pub mod navigation;
pub mod path;

use thiserror::Error;

pub use agents::{run_scripted, Agent, SimConfig, TaskSpec};
pub use localization::{
    gen_localization, judge_localization, score_pointing, LocalizationResult, LocalizationTask, ObjectResult,
    PointingNoise, TableObject,
};
pub use log::{EventKind, Group, LogHeader, SessionEvent, SessionLog, TaskKind, LOG_SCHEMA};
pub use navigation::{
    gen_navigation, judge_obstacles, navigation_from_centers, JudgeConfig, NavigationResult, NavigationTask, Obstacle,
    Verdict,
};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("unknown object id {0}")]
    UnknownObject(u32),
    #[error("incomplete log: {0}")]
    Incomplete(String),
    #[error("malformed log: {0}")]
    Malformed(String),
    #[error("event time went backwards ({prev} -> {now})")]
    TimeRegression { prev: f64, now: f64 },
    #[error("no valid layout found for seed {seed}")]
    GenerationFailed { seed: u64 },
    #[error("agent {agent} cannot run a {task} task")]
    AgentMismatch { agent: Agent, task: TaskKind },
    #[error("tick budget exhausted after {ticks} ticks")]
    BudgetExceeded { ticks: u64, log: Box<SessionLog> },
}
