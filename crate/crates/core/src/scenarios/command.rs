use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::arm::{Branch, MAX_APERTURE};
use crate::world::SignClass;
use crate::ArmConfigd;

fn any_branch() -> Branch {
    Branch::Any
}

/// One instruction of an exercise program. Programs are JSON lists of
/// these, tagged by `cmd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    /// Sets tread speeds and moves on.
    Drive { left: f64, right: f64 },
    /// Drives for `duration` seconds, then commands zero speed.
    DriveFor { left: f64, right: f64, duration: f64 },
    /// Turns in place until the heading is within tolerance of `theta`.
    TurnTo { theta: f64 },
    /// Solves IK and waits for the servos to arrive.
    ArmMoveTo {
        xyz: [f64; 3],
        pitch: f64,
        #[serde(default = "any_branch")]
        branch: Branch,
    },
    ArmSetJoints { q: [f64; 4] },
    Gripper { aperture: f64 },
    Wait { duration: f64 },
    /// Arms a watcher; `then` runs as an interrupt whenever `class` is
    /// sighted, at most once per continuous sighting.
    OnSign { class: SignClass, then: Vec<Command> },
    Stop,
}

fn bad(index: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::BadProgram {
        index: index.to_string(),
        reason: reason.into(),
    }
}

fn finite(index: &str, what: &str, values: &[f64]) -> Result<(), ScenarioError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(bad(index, format!("{what} must be finite")))
    }
}

fn duration(index: &str, d: f64) -> Result<(), ScenarioError> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(bad(index, format!("duration must be > 0, got {d}")))
    }
}

fn validate_at(commands: &[Command], prefix: &str, arm: &ArmConfigd) -> Result<(), ScenarioError> {
    for (i, cmd) in commands.iter().enumerate() {
        let index = format!("{prefix}{i}");
        let index = index.as_str();
        match cmd {
            Command::Drive { left, right } => finite(index, "speeds", &[*left, *right])?,
            Command::DriveFor { left, right, duration: d } => {
                finite(index, "speeds", &[*left, *right])?;
                duration(index, *d)?;
            }
            Command::TurnTo { theta } => finite(index, "theta", &[*theta])?,
            Command::ArmMoveTo { xyz, pitch, .. } => finite(index, "target", &[xyz[0], xyz[1], xyz[2], *pitch])?,
            Command::ArmSetJoints { q } => {
                finite(index, "joint angles", q)?;
                arm.check_limits(q).map_err(|e| bad(index, e.to_string()))?;
            }
            Command::Gripper { aperture } => {
                if !(*aperture >= 0.0 && *aperture <= MAX_APERTURE) {
                    return Err(bad(index, format!("aperture must lie in [0, {MAX_APERTURE}]")));
                }
            }
            Command::Wait { duration: d } => duration(index, *d)?,
            Command::OnSign { class, then } => {
                if !class.is_placeable() {
                    return Err(bad(index, "on_sign needs a sign class"));
                }
                validate_at(then, &format!("{index}.then."), arm)?;
            }
            Command::Stop => {}
        }
    }
    Ok(())
}

/// Checks every command, naming the first bad one by its index path
/// (`3`, or `1.then.0` inside an `on_sign` body).
pub fn validate_program(commands: &[Command], arm: &ArmConfigd) -> Result<(), ScenarioError> {
    validate_at(commands, "", arm)
}

/// Parses a program document, reporting malformed entries by index.
pub fn parse_program(bytes: &[u8]) -> Result<Vec<Command>, ScenarioError> {
    let items: Vec<serde_json::Value> = serde_json::from_slice(bytes).map_err(|e| bad("-", format!("not a JSON list: {e}")))?;
    let program = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| bad(&i.to_string(), e.to_string())))
        .collect::<Result<Vec<Command>, _>>()?;
    validate_program(&program, &ArmConfigd::default())?;
    Ok(program)
}

/// The program with its top-level `on_sign` watchers removed.
pub fn without_on_sign(commands: &[Command]) -> Vec<Command> {
    commands
        .iter()
        .filter(|c| !matches!(c, Command::OnSign { .. }))
        .cloned()
        .collect()
}
