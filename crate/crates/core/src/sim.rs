//! The interactive twin behind `stair sim`: one [`Rig`] driven by
//! `/rvr/cmd_vel` and the arm, gripper and sim services on a [`Broker`].

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use stair_bus::{catalog, BusError, Broker, ServiceHandle, Subscription};

use crate::arm::Branch;
use crate::learn::{train_centroid, Classifier, LabeledExample};
use crate::percept::{cut_patch, Frame, PixelRect};
use crate::rig::{Rig, RigError};
use crate::scenarios::Perception;
use crate::world::{Arena, SignClass};
use crate::Pose2d;

/// Largest `n` accepted by `/sim/step` in one call.
pub const MAX_STEPS_PER_CALL: u64 = 10_000;

struct State {
    rig: Rig,
    start: Pose2d,
    model: Option<Classifier>,
    perception: Perception,
    cmd_vel: Subscription,
}

impl State {
    fn step(&mut self, bus: &Broker) -> Result<(), RigError> {
        if let Some(cmd) = self.cmd_vel.drain().pop() {
            let side = |k: &str| cmd.payload[k].as_f64();
            if let (Some(l), Some(r)) = (side("left"), side("right")) {
                // Non-finite commands are dropped; the previous one stays in force.
                let _ = self.rig.twin.command_velocities(l, r);
            }
        }
        self.rig.step()?;
        self.rig.publish_sensors(bus);
        if self.rig.steps().is_multiple_of(self.perception.render_every) {
            let frame = self.rig.render()?;
            let detections = match &self.model {
                Some(m) => Some(self.rig.classify(&frame, m, &self.perception.detector)?),
                None => None,
            };
            self.rig.publish_frame(bus, &frame, detections.as_deref());
        }
        Ok(())
    }
}

/// A live twin serving its topics and services on a broker. Dropping it
/// stops the ticker and withdraws the services.
pub struct LiveSim {
    bus: Broker,
    state: Arc<Mutex<State>>,
    services: Vec<ServiceHandle>,
    ticker: Option<(Arc<AtomicBool>, JoinHandle<()>)>,
}

fn lock(state: &Mutex<State>) -> MutexGuard<'_, State> {
    // A panicking handler leaves the rig in a stepped but consistent state.
    state.lock().unwrap_or_else(|p| p.into_inner())
}

fn parse<T: DeserializeOwned>(req: &Value) -> Result<T, Value> {
    let req = if req.is_null() { json!({}) } else { req.clone() };
    serde_json::from_value(req).map_err(|e| error(format!("bad request: {e}")))
}

fn error(message: impl std::fmt::Display) -> Value {
    json!({ "error": message.to_string() })
}

#[derive(Deserialize)]
struct ResetRequest {
    pose: Option<[f64; 3]>,
}

#[derive(Deserialize)]
struct StepRequest {
    #[serde(default = "one")]
    n: u64,
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
struct SetJointsRequest {
    q: [f64; 4],
}

#[derive(Deserialize)]
struct MoveToRequest {
    xyz: [f64; 3],
    #[serde(default)]
    pitch: f64,
    #[serde(default = "any_branch")]
    branch: Branch,
}

fn any_branch() -> Branch {
    Branch::Any
}

#[derive(Deserialize)]
struct GripperRequest {
    aperture: f64,
}

#[derive(Deserialize)]
struct TrainRequest {
    examples: Vec<CapturedPatch>,
}

#[derive(Deserialize)]
struct CapturedPatch {
    label: SignClass,
    patch: Value,
}

/// Turns a captured crop of any size into a training example.
fn captured_example(c: &CapturedPatch) -> Result<LabeledExample, String> {
    let frame = Frame::from_payload(&c.patch).map_err(|e| e.to_string())?;
    let patch = cut_patch(&frame, PixelRect::new(0, 0, frame.width, frame.height)).map_err(|e| e.to_string())?;
    Ok(LabeledExample::from_patch(&patch, c.label))
}

impl LiveSim {
    pub fn new(bus: Broker, arena: Arena, start: Pose2d, seed: u64, dt: f64) -> Result<LiveSim, RigError> {
        let mut rig = Rig::new(arena, start, seed, dt)?;
        rig.noisy_odometry = true;
        let cmd_vel = bus.subscribe_to(catalog::CMD_VEL).expect("catalog topic");
        let state = Arc::new(Mutex::new(State {
            rig,
            start,
            model: None,
            perception: Perception::default(),
            cmd_vel,
        }));
        Ok(LiveSim {
            bus,
            state,
            services: Vec::new(),
            ticker: None,
        })
    }

    pub fn with_model(self, model: Option<Classifier>, perception: Perception) -> LiveSim {
        {
            let mut s = lock(&self.state);
            s.model = model;
            s.perception = perception;
        }
        self
    }

    pub fn bus(&self) -> &Broker {
        &self.bus
    }

    pub fn status(&self) -> Value {
        lock(&self.state).rig.status()
    }

    pub fn model(&self) -> Option<Classifier> {
        lock(&self.state).model.clone()
    }

    /// Advances `n` steps, publishing sensors each step.
    pub fn step(&self, n: u64) -> Result<Value, RigError> {
        let mut s = lock(&self.state);
        for _ in 0..n {
            s.step(&self.bus)?;
        }
        Ok(s.rig.status())
    }

    /// Registers `/sim/arena`, `/sim/reset`, `/sim/step`, the arm and gripper
    /// services and `/learn/train_centroid`.
    pub fn advertise(&mut self) -> Result<(), BusError> {
        let bus = self.bus.clone();

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::SIM_ARENA, move |_| Ok(lock(&st).rig.arena.to_json()))?);

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::SIM_RESET, move |req| {
            let req: ResetRequest = parse(req)?;
            let mut s = lock(&st);
            let pose = req.pose.map_or(s.start, |[x, y, theta]| Pose2d::new(x, y, theta));
            s.rig.reset(pose).map_err(error)?;
            s.cmd_vel.drain();
            Ok(s.rig.status())
        })?);

        let st = self.state.clone();
        let publish_on = self.bus.clone();
        self.services.push(bus.advertise_at(catalog::SIM_STEP, move |req| {
            let req: StepRequest = parse(req)?;
            if req.n > MAX_STEPS_PER_CALL {
                return Err(error(format!("n must be at most {MAX_STEPS_PER_CALL}")));
            }
            let mut s = lock(&st);
            for _ in 0..req.n {
                s.step(&publish_on).map_err(error)?;
            }
            Ok(s.rig.status())
        })?);

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::ARM_SET_JOINTS, move |req| {
            let req: SetJointsRequest = parse(req)?;
            lock(&st).rig.arm.set_targets(req.q).map_err(error)?;
            Ok(json!({ "target": req.q }))
        })?);

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::ARM_MOVE_TO, move |req| {
            let req: MoveToRequest = parse(req)?;
            let q = lock(&st).rig.arm.move_to(req.xyz, req.pitch, req.branch).map_err(error)?;
            Ok(json!({ "target": q }))
        })?);

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::GRIPPER_SET, move |req| {
            let req: GripperRequest = parse(req)?;
            let mut s = lock(&st);
            let State { rig, .. } = &mut *s;
            let g = rig.arm.gripper_set(req.aperture, &rig.objects).map_err(error)?;
            Ok(json!({ "aperture": g.aperture, "holding": g.holding }))
        })?);

        let st = self.state.clone();
        self.services.push(bus.advertise_at(catalog::LEARN_TRAIN_CENTROID, move |req| {
            let req: TrainRequest = parse(req)?;
            let mut examples = Vec::with_capacity(req.examples.len());
            for (i, c) in req.examples.iter().enumerate() {
                examples.push(captured_example(c).map_err(|e| error(format!("example {i}: {e}")))?);
            }
            let model = Classifier::Centroid(train_centroid(&examples).map_err(error)?);
            let mut counts = BTreeMap::new();
            for e in &examples {
                *counts.entry(e.label).or_insert(0usize) += 1;
            }
            let reply = json!({
                "classes": model.classes(),
                "counts": counts,
                "model": model.to_json(),
            });
            lock(&st).model = Some(model);
            Ok(reply)
        })?);
        Ok(())
    }

    /// Steps in a background thread at `speed` times wall-clock rate.
    pub fn start_realtime(&mut self, speed: f64) {
        self.stop_realtime();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let st = self.state.clone();
        let bus = self.bus.clone();
        let dt = lock(&self.state).rig.dt();
        let period = Duration::from_secs_f64(dt / speed.max(1e-3));
        let handle = std::thread::Builder::new()
            .name("sim-ticker".into())
            .spawn(move || {
                let mut next = Instant::now();
                while !flag.load(Ordering::Relaxed) {
                    if lock(&st).step(&bus).is_err() {
                        break;
                    }
                    next += period;
                    match next.checked_duration_since(Instant::now()) {
                        Some(wait) => std::thread::sleep(wait),
                        // Fell behind; resynchronise instead of bursting.
                        None => next = Instant::now(),
                    }
                }
            })
            .expect("spawn ticker thread");
        self.ticker = Some((stop, handle));
    }

    pub fn stop_realtime(&mut self) {
        if let Some((stop, handle)) = self.ticker.take() {
            stop.store(true, Ordering::Relaxed);
            let _ = handle.join();
        }
    }
}

impl Drop for LiveSim {
    fn drop(&mut self) {
        self.stop_realtime();
    }
}
