//! One robot in one arena: the base twin, the arm, the camera and the
//! odometry noise source, stepped together at a fixed `dt`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use stair_bus::{catalog, Broker, SimTime};

use crate::arm::{ArmError, Graspable};
use crate::learn::{detect, detections_payload, Classifier, Detection, DetectorConfig, LearnError};
use crate::percept::{render_frame, Camera, Frame, PerceptError};
use crate::twin::{BaseConfig, BaseTwin, TwinError, MAX_DT};
use crate::world::Arena;
use crate::{ArmConfigd, Armd, Pose2d};

#[derive(Debug, thiserror::Error)]
pub enum RigError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Arm(#[from] ArmError),
    #[error(transparent)]
    Percept(#[from] PerceptError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("start pose ({x}, {y}) is outside the arena or touches a wall")]
    BadStart { x: f64, y: f64 },
}

#[derive(Debug, Clone)]
pub struct Rig {
    pub arena: Arena,
    pub twin: BaseTwin,
    pub arm: Armd,
    pub camera: Camera,
    pub objects: Vec<Graspable<f64>>,
    /// Publish the noisy odometry estimate instead of the true pose.
    pub noisy_odometry: bool,
    rng: ChaCha8Rng,
    seed: u64,
    dt: f64,
    steps: u64,
}

impl Rig {
    pub fn new(arena: Arena, start: Pose2d, seed: u64, dt: f64) -> Result<Rig, RigError> {
        Rig::with_configs(arena, start, seed, dt, BaseConfig::default(), ArmConfigd::default())
    }

    pub fn with_configs(arena: Arena, start: Pose2d, seed: u64, dt: f64, base: BaseConfig, arm: ArmConfigd) -> Result<Rig, RigError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(TwinError::InvalidDt(dt).into());
        }
        let camera = Camera {
            mount_height: base.camera_height,
            ..Camera::default()
        };
        let twin = BaseTwin::new(base, start)?;
        if !start.is_finite() || !arena.contains(start.position()) || twin.touches_wall(&arena) {
            return Err(RigError::BadStart { x: start.x, y: start.y });
        }
        Ok(Rig {
            arena,
            twin,
            arm: Armd::new(arm)?,
            camera,
            objects: Vec::new(),
            noisy_odometry: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            dt,
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `steps · dt`, free of accumulated rounding.
    pub fn sim_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Back to `start` at t = 0 with fresh arm, odometry and noise stream.
    pub fn reset(&mut self, start: Pose2d) -> Result<(), RigError> {
        let fresh = Rig::with_configs(
            self.arena.clone(),
            start,
            self.seed,
            self.dt,
            self.twin.config().clone(),
            self.arm.config().clone(),
        )?;
        *self = Rig {
            objects: std::mem::take(&mut self.objects),
            noisy_odometry: self.noisy_odometry,
            ..fresh
        };
        Ok(())
    }

    /// Advances base and arm by one `dt`. Returns whether the base collided.
    pub fn step(&mut self) -> Result<bool, RigError> {
        let outcome = self.twin.step(self.dt, &self.arena)?;
        self.twin.advance_odometry(&mut self.rng);
        self.arm.step_servos(self.dt)?;
        self.steps += 1;
        Ok(outcome.collision)
    }

    pub fn camera_pose(&self) -> Pose2d {
        self.twin.config().camera_pose(self.twin.pose())
    }

    pub fn render(&self) -> Result<Frame, RigError> {
        Ok(render_frame(&self.camera, self.camera_pose(), &self.arena, self.sim_time())?)
    }

    pub fn classify(&self, frame: &Frame, model: &Classifier, config: &DetectorConfig) -> Result<Vec<Detection>, RigError> {
        Ok(detect(frame, model, config)?)
    }

    /// Odometry, IMU, ground, joint-state and arm telemetry topics.
    pub fn publish_sensors(&self, bus: &Broker) {
        let t = SimTime::from_secs(self.sim_time());
        let publish = |topic: &str, payload| {
            bus.publish_to(topic, payload, t).expect("catalog topics are valid");
        };
        publish(catalog::ODOM, self.twin.odom_payload(self.noisy_odometry, self.steps));
        publish(catalog::IMU, self.twin.sample_imu().to_json());
        publish(catalog::GROUND, self.twin.sample_ground(&self.arena).to_json());
        publish(catalog::JOINT_STATES, self.arm.joint_states_payload());
        publish(catalog::ARM_TELEMETRY, self.arm.telemetry_payload());
    }

    pub fn publish_frame(&self, bus: &Broker, frame: &Frame, detections: Option<&[Detection]>) {
        let t = SimTime::from_secs(frame.sim_time);
        bus.publish_to(catalog::CAMERA_FRAME, frame.to_payload(), t).expect("catalog topic");
        if let Some(d) = detections {
            bus.publish_to(catalog::DETECTIONS, detections_payload(d, frame.sim_time), t)
                .expect("catalog topic");
        }
    }

    /// Summary used by `/sim/reset` and `/sim/step` replies.
    pub fn status(&self) -> serde_json::Value {
        let p = self.twin.pose();
        let s = self.twin.state();
        json!({
            "sim_time": self.sim_time(),
            "steps": self.steps,
            "pose": [p.x, p.y, p.theta],
            "v": [s.v_left, s.v_right],
        })
    }
}
