//! The fixed-step scenario loop and the command interpreter.
//!
//! Each step applies commands, advances base and arm, publishes sensors,
//! renders and classifies every `render_every` steps, then records the
//! state. Record 0 is the initial state at t = 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use stair_bus::Broker;

use super::{evaluate_trace, validate_program, Command, Scenario, ScenarioError, TraceRecord};
use crate::geom::normalize_angle;
use crate::learn::Detection;
use crate::rig::Rig;
use crate::world::SignClass;

/// `on_sign` watchers re-arm after this many consecutive classifications
/// without a sighting.
pub const REARM_AFTER: u32 = 10;
/// `turn_to` finishes once the heading error is below this.
pub const TURN_TOLERANCE: f64 = 0.005;
const TURN_GAIN: f64 = 3.0;
const TURN_MAX_OMEGA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Timeout,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

impl Event {
    pub fn new(t: f64, kind: &str, detail: String) -> Event {
        Event {
            t,
            kind: kind.to_string(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: Outcome,
    pub metrics: BTreeMap<String, f64>,
    pub events: Vec<Event>,
    pub trace_path: Option<String>,
}

impl RunReport {
    /// CLI exit status: 0 on pass, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.outcome != Outcome::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub dt: f64,
    pub max_time: f64,
}

impl RunOptions {
    pub fn new(seed: u64, max_time: f64) -> RunOptions {
        RunOptions { seed, dt: 0.02, max_time }
    }

    /// Number of records, counting the initial one.
    pub fn records(&self) -> u64 {
        (self.max_time / self.dt).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
enum Active {
    Timed { remaining: u64, stop_after: bool },
    Turn { theta: f64 },
    Arm,
}

#[derive(Debug, Clone)]
struct Block {
    commands: Vec<Command>,
    pc: usize,
    active: Option<Active>,
}

impl Block {
    fn new(commands: Vec<Command>) -> Block {
        Block {
            commands,
            pc: 0,
            active: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Watcher {
    class: SignClass,
    body: Vec<Command>,
    armed: bool,
    misses: u32,
}

/// Command interpreter. Interrupt bodies from `on_sign` are pushed on top
/// of the block stack and run to completion before the interrupted block
/// resumes where it left off.
struct Interpreter {
    stack: Vec<Block>,
    watchers: Vec<Watcher>,
    dt: f64,
}

impl Interpreter {
    fn new(program: Vec<Command>, dt: f64) -> Interpreter {
        Interpreter {
            stack: vec![Block::new(program)],
            watchers: Vec::new(),
            dt,
        }
    }

    fn steps_for(&self, duration: f64) -> u64 {
        (duration / self.dt).round().max(1.0) as u64
    }

    /// Runs commands until one blocks for this step.
    fn apply(&mut self, rig: &mut Rig, t: f64, events: &mut Vec<Event>) {
        loop {
            let Some(top) = self.stack.last_mut() else { return };
            if let Some(active) = top.active.as_mut() {
                let done = match active {
                    Active::Timed { remaining, stop_after } => {
                        if *remaining > 0 {
                            *remaining -= 1;
                            return;
                        }
                        if *stop_after {
                            rig.twin.command_velocities(0.0, 0.0).expect("zero is finite");
                        }
                        true
                    }
                    Active::Turn { theta } => {
                        let err = normalize_angle(*theta - rig.twin.pose().theta);
                        if err.abs() < TURN_TOLERANCE {
                            rig.twin.command_velocities(0.0, 0.0).expect("zero is finite");
                            true
                        } else {
                            let omega = (TURN_GAIN * err).clamp(-TURN_MAX_OMEGA, TURN_MAX_OMEGA);
                            let v = omega * rig.twin.config().track_width / 2.0;
                            rig.twin.command_velocities(-v, v).expect("finite turn rate");
                            return;
                        }
                    }
                    Active::Arm => {
                        if rig.arm.converged() {
                            true
                        } else {
                            return;
                        }
                    }
                };
                if done {
                    top.active = None;
                }
                continue;
            }
            if top.pc >= top.commands.len() {
                if self.stack.len() > 1 {
                    self.stack.pop();
                    continue;
                }
                return;
            }
            let cmd = top.commands[top.pc].clone();
            top.pc += 1;
            let active = self.start(cmd, rig, t, events);
            self.stack.last_mut().expect("stack non-empty").active = active;
        }
    }

    fn start(&mut self, cmd: Command, rig: &mut Rig, t: f64, events: &mut Vec<Event>) -> Option<Active> {
        let mut fail = |e: String| events.push(Event::new(t, "command_error", e));
        match cmd {
            Command::Drive { left, right } => {
                rig.twin.command_velocities(left, right).expect("validated as finite");
                None
            }
            Command::DriveFor { left, right, duration } => {
                rig.twin.command_velocities(left, right).expect("validated as finite");
                Some(Active::Timed {
                    remaining: self.steps_for(duration),
                    stop_after: true,
                })
            }
            Command::TurnTo { theta } => Some(Active::Turn { theta }),
            Command::ArmMoveTo { xyz, pitch, branch } => match rig.arm.move_to(xyz, pitch, branch) {
                Ok(_) => Some(Active::Arm),
                Err(e) => {
                    fail(format!("arm_move_to: {e}"));
                    None
                }
            },
            Command::ArmSetJoints { q } => match rig.arm.set_targets(q) {
                Ok(()) => Some(Active::Arm),
                Err(e) => {
                    fail(format!("arm_set_joints: {e}"));
                    None
                }
            },
            Command::Gripper { aperture } => {
                if let Err(e) = rig.arm.gripper_set(aperture, &rig.objects) {
                    fail(format!("gripper: {e}"));
                }
                None
            }
            Command::Wait { duration } => Some(Active::Timed {
                remaining: self.steps_for(duration),
                stop_after: false,
            }),
            Command::OnSign { class, then } => {
                self.watchers.push(Watcher {
                    class,
                    body: then,
                    armed: true,
                    misses: 0,
                });
                None
            }
            Command::Stop => {
                rig.twin.command_velocities(0.0, 0.0).expect("zero is finite");
                None
            }
        }
    }

    /// Feeds one classification to the watchers; fired bodies become interrupts.
    fn observe(&mut self, detections: &[Detection], min_px: usize, t: f64, events: &mut Vec<Event>) {
        for w in &mut self.watchers {
            let seen = detections.iter().find(|d| d.class == w.class && d.bbox.w >= min_px);
            match seen {
                Some(d) => {
                    w.misses = 0;
                    if w.armed {
                        w.armed = false;
                        events.push(Event::new(t, "sign_trigger", format!("{} box ({}, {}) {}x{} score {:.3}", w.class, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.score)));
                        self.stack.push(Block::new(w.body.clone()));
                    }
                }
                None => {
                    w.misses = w.misses.saturating_add(1);
                    if w.misses >= REARM_AFTER {
                        w.armed = true;
                    }
                }
            }
        }
    }
}

fn record(rig: &Rig, step: u64, detections: Option<Vec<Detection>>, collision: bool) -> TraceRecord {
    let p = rig.twin.pose();
    let o = rig.twin.odometry(rig.noisy_odometry);
    let s = rig.twin.state();
    let arm = rig.arm.state();
    TraceRecord {
        step,
        t: rig.sim_time(),
        pose: [p.x, p.y, p.theta],
        odom: [o.x, o.y, o.theta],
        v: [s.v_left, s.v_right],
        q: arm.q,
        gripper: rig.arm.gripper().aperture,
        ground: rig.twin.sample_ground(&rig.arena).into(),
        detections,
        collision,
    }
}

/// Renders and, when a model is present, classifies the current view.
fn perceive(rig: &Rig, scenario: &Scenario, bus: Option<&Broker>) -> Result<Option<Vec<Detection>>, ScenarioError> {
    let frame = rig.render().map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let detections = match &scenario.model {
        Some(m) => Some(
            rig.classify(&frame, m, &scenario.perception.detector)
                .map_err(|e| ScenarioError::Runtime(e.to_string()))?,
        ),
        None => None,
    };
    if let Some(bus) = bus {
        rig.publish_frame(bus, &frame, detections.as_deref());
    }
    Ok(detections)
}

pub fn run(scenario: &Scenario, program: &[Command], options: &RunOptions) -> Result<RunOutput, ScenarioError> {
    run_with_bus(scenario, program, options, None)
}

/// [`run`], additionally publishing every sensor topic on `bus`.
pub fn run_with_bus(scenario: &Scenario, program: &[Command], options: &RunOptions, bus: Option<&Broker>) -> Result<RunOutput, ScenarioError> {
    if !(options.dt > 0.0 && options.dt <= crate::twin::MAX_DT) {
        return Err(ScenarioError::BadOptions(format!("dt must lie in (0, 0.1], got {}", options.dt)));
    }
    if !(options.max_time.is_finite() && options.max_time > 0.0) {
        return Err(ScenarioError::BadOptions(format!("max_time must be > 0, got {}", options.max_time)));
    }
    scenario.validate()?;
    let mut rig = Rig::new(scenario.arena.clone(), scenario.start_pose, options.seed, options.dt)
        .map_err(|e| ScenarioError::BadScenario(e.to_string()))?;
    rig.noisy_odometry = true;
    validate_program(program, rig.arm.config())?;

    let every = scenario.perception.render_every;
    let min_px = scenario.perception.trigger_min_px;
    let mut interp = Interpreter::new(program.to_vec(), options.dt);
    let mut events = Vec::new();
    let mut trace = Vec::with_capacity(options.records() as usize);

    let detections = perceive(&rig, scenario, bus)?;
    if let Some(d) = &detections {
        interp.observe(d, min_px, 0.0, &mut events);
    }
    if let Some(bus) = bus {
        rig.publish_sensors(bus);
    }
    trace.push(record(&rig, 0, detections, false));

    for step in 1..options.records() {
        let t_before = rig.sim_time();
        interp.apply(&mut rig, t_before, &mut events);
        let collision = rig.step().map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        if let Some(bus) = bus {
            rig.publish_sensors(bus);
        }
        let detections = if step % every == 0 {
            let d = perceive(&rig, scenario, bus)?;
            if let Some(d) = &d {
                interp.observe(d, min_px, rig.sim_time(), &mut events);
            }
            d
        } else {
            None
        };
        trace.push(record(&rig, step, detections, collision));
        if collision {
            break;
        }
        if let super::SuccessRule::Maze { goal, time_limit } = &scenario.success_rule {
            let t = rig.sim_time();
            if (t <= *time_limit && goal.contains(rig.twin.pose().position())) || t >= *time_limit {
                break;
            }
        }
    }

    let eval = evaluate_trace(&trace, scenario)?;
    events.extend(eval.events);
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(RunOutput {
        report: RunReport {
            outcome: eval.outcome,
            metrics: eval.metrics,
            events,
            trace_path: None,
        },
        trace,
    })
}
