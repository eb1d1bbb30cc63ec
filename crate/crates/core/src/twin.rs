//! Tracked differential-drive base: tread slew limits, exact-arc pose
//! integration, odometry with distance-proportional noise, and the IMU,
//! color, range and light sensors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geom::{normalize_angle, Pose2D};
use crate::scalar::Real;
use crate::world::{Arena, Rgb, DEFAULT_FLOOR};
use crate::{Pose2d, Vec2d};

pub const GRAVITY: f64 = 9.81;

/// Below this yaw rate a step is integrated as a straight line.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-6;

/// Body disc radius as a multiple of half the track width.
pub const BODY_RADIUS_FACTOR: f64 = 1.2;

pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TwinError {
    #[error("non-finite velocity command ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("dt must lie in (0, {MAX_DT}], got {0}")]
    InvalidDt(f64),
    #[error("invalid base config: {0}")]
    BadConfig(String),
}

/// Advances `pose` by one step of constant tread speeds.
///
/// With `v = (v_left + v_right)/2` and `ω = (v_right − v_left)/track_width`,
/// the robot follows a circular arc of radius `v/ω`, or a straight line when
/// `|ω|` is below [`STRAIGHT_LINE_OMEGA`].
pub fn integrate_arc<T: Real>(pose: Pose2D<T>, v_left: T, v_right: T, track_width: T, dt: T) -> Pose2D<T> {
    let two = T::lit(2.0);
    let v = (v_left + v_right) / two;
    let omega = (v_right - v_left) / track_width;
    integrate_twist(pose, v, omega, dt)
}

/// Exact-arc update for body-frame speed `v` and yaw rate `omega`.
pub fn integrate_twist<T: Real>(pose: Pose2D<T>, v: T, omega: T, dt: T) -> Pose2D<T> {
    if omega.abs() < T::lit(STRAIGHT_LINE_OMEGA) {
        let (s, c) = pose.theta.sin_cos();
        return Pose2D::new(pose.x + v * dt * c, pose.y + v * dt * s, pose.theta);
    }
    let radius = v / omega;
    let theta1 = pose.theta + omega * dt;
    let (s0, c0) = pose.theta.sin_cos();
    let (s1, c1) = theta1.sin_cos();
    Pose2D::new(pose.x + radius * (s1 - s0), pose.y - radius * (c1 - c0), normalize_angle(theta1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdomNoise {
    /// Standard deviation per meter travelled (grows with √distance).
    pub translational: f64,
    /// Standard deviation per radian turned.
    pub rotational: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseConfig {
    pub track_width: f64,
    pub max_tread_speed: f64,
    /// May be `f64::INFINITY` to make speed changes instantaneous.
    pub tread_accel_limit: f64,
    pub odom_noise: OdomNoise,
    /// Body-frame sensor positions (x forward, y left).
    pub color_sensor: [f64; 2],
    pub distance_sensor: [f64; 2],
    pub camera: [f64; 2],
    pub camera_height: f64,
    pub rangefinder_max: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            track_width: 0.185,
            max_tread_speed: 0.5,
            tread_accel_limit: 1.0,
            odom_noise: OdomNoise {
                translational: 0.01,
                rotational: 0.01,
            },
            color_sensor: [0.05, 0.0],
            distance_sensor: [0.05, 0.0],
            camera: [0.05, 0.0],
            camera_height: 0.12,
            rangefinder_max: 2.0,
        }
    }
}

impl BaseConfig {
    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |m: &str| Err(TwinError::BadConfig(m.to_string()));
        if !(self.track_width.is_finite() && self.track_width > 0.0) {
            return bad("track_width must be > 0");
        }
        if !(self.max_tread_speed.is_finite() && self.max_tread_speed > 0.0) {
            return bad("max_tread_speed must be > 0");
        }
        if !(self.tread_accel_limit > 0.0) {
            return bad("tread_accel_limit must be > 0");
        }
        if !(self.odom_noise.translational >= 0.0 && self.odom_noise.rotational >= 0.0) {
            return bad("noise standard deviations must be >= 0");
        }
        if !(self.rangefinder_max > 0.0) {
            return bad("rangefinder_max must be > 0");
        }
        Ok(())
    }

    pub fn body_radius(&self) -> f64 {
        self.track_width / 2.0 * BODY_RADIUS_FACTOR
    }

    pub fn camera_pose(&self, base: Pose2d) -> Pose2d {
        let p = base.to_world(Vec2d::new(self.camera[0], self.camera[1]));
        Pose2d::new(p.x, p.y, base.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseState {
    pub pose: Pose2d,
    pub v_left: f64,
    pub v_right: f64,
    pub sim_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: BaseState,
    /// The move was rejected because the body would have touched a wall.
    pub collision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
    pub mag: [f64; 3],
}

impl ImuSample {
    pub fn to_json(&self) -> serde_json::Value {
        json!({"gyro": self.gyro, "accel": self.accel, "mag": self.mag})
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSample {
    pub rgb: Rgb,
    /// Forward range in meters; infinite when nothing is within range.
    pub distance: f64,
    pub light: f64,
}

impl GroundSample {
    pub fn to_json(&self) -> serde_json::Value {
        let distance = if self.distance.is_finite() { json!(self.distance) } else { json!(null) };
        json!({"rgb": self.rgb, "distance": distance, "light": self.light})
    }
}

#[derive(Debug, Clone)]
pub struct BaseTwin {
    config: BaseConfig,
    state: BaseState,
    target: (f64, f64),
    forward_accel: f64,
    last_motion: (f64, f64),
    odom: Pose2d,
}

impl BaseTwin {
    pub fn new(config: BaseConfig, start: Pose2d) -> Result<Self, TwinError> {
        config.validate()?;
        Ok(BaseTwin {
            config,
            state: BaseState {
                pose: start,
                v_left: 0.0,
                v_right: 0.0,
                sim_time: 0.0,
            },
            target: (0.0, 0.0),
            forward_accel: 0.0,
            last_motion: (0.0, 0.0),
            odom: start,
        })
    }

    pub fn config(&self) -> &BaseConfig {
        &self.config
    }

    pub fn state(&self) -> &BaseState {
        &self.state
    }

    pub fn pose(&self) -> Pose2d {
        self.state.pose
    }

    pub fn targets(&self) -> (f64, f64) {
        self.target
    }

    /// Mean tread speed.
    pub fn linear_speed(&self) -> f64 {
        (self.state.v_left + self.state.v_right) / 2.0
    }

    pub fn omega(&self) -> f64 {
        (self.state.v_right - self.state.v_left) / self.config.track_width
    }

    /// Sets slew targets, clamped to the tread speed limit.
    pub fn command_velocities(&mut self, v_left: f64, v_right: f64) -> Result<(), TwinError> {
        if !(v_left.is_finite() && v_right.is_finite()) {
            return Err(TwinError::NonFinite(v_left, v_right));
        }
        let max = self.config.max_tread_speed;
        self.target = (v_left.clamp(-max, max), v_right.clamp(-max, max));
        Ok(())
    }

    /// Teleports the base and clears motion state.
    pub fn reset(&mut self, pose: Pose2d) {
        *self = BaseTwin::new(self.config.clone(), pose).expect("config already validated");
    }

    fn slew(current: f64, target: f64, max_delta: f64) -> f64 {
        current + (target - current).clamp(-max_delta, max_delta)
    }

    pub fn step(&mut self, dt: f64, arena: &Arena) -> Result<StepOutcome, TwinError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(TwinError::InvalidDt(dt));
        }
        let v_before = self.linear_speed();
        let max_delta = self.config.tread_accel_limit * dt;
        let v_left = Self::slew(self.state.v_left, self.target.0, max_delta);
        let v_right = Self::slew(self.state.v_right, self.target.1, max_delta);
        let next = integrate_arc(self.state.pose, v_left, v_right, self.config.track_width, dt);

        let radius = self.config.body_radius();
        let collision = arena.walls.iter().any(|w| w.distance_to(next.position()) < radius);
        self.state.sim_time += dt;
        if collision {
            self.state.v_left = 0.0;
            self.state.v_right = 0.0;
            self.target = (0.0, 0.0);
            self.forward_accel = 0.0;
            self.last_motion = (0.0, 0.0);
        } else {
            self.state.pose = next;
            self.state.v_left = v_left;
            self.state.v_right = v_right;
            self.forward_accel = (self.linear_speed() - v_before) / dt;
            self.last_motion = (self.linear_speed() * dt, self.omega() * dt);
        }
        Ok(StepOutcome {
            state: self.state,
            collision,
        })
    }

    /// Folds the last step's motion into the noisy odometry estimate. Always
    /// draws exactly two standard normals so the generator stays in lockstep.
    pub fn advance_odometry<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (ds, dtheta) = self.last_motion;
        let n_t: f64 = rng.sample(StandardNormal);
        let n_r: f64 = rng.sample(StandardNormal);
        let noise = self.config.odom_noise;
        let ds_noisy = ds + n_t * noise.translational * ds.abs().sqrt();
        let dtheta_noisy = dtheta + n_r * noise.rotational * dtheta.abs().sqrt();
        // Unit-time twist reproduces the same increments.
        self.odom = integrate_twist(self.odom, ds_noisy, dtheta_noisy, 1.0);
        self.last_motion = (0.0, 0.0);
    }

    /// The true pose, or the noisy dead-reckoned estimate.
    pub fn odometry(&self, noise: bool) -> Pose2d {
        if noise {
            self.odom
        } else {
            self.state.pose
        }
    }

    pub fn sample_imu(&self) -> ImuSample {
        let omega = self.omega();
        let theta = self.state.pose.theta;
        ImuSample {
            gyro: [0.0, 0.0, omega],
            accel: [self.forward_accel, self.linear_speed() * omega, GRAVITY],
            mag: [theta.cos(), -theta.sin(), 0.0],
        }
    }

    pub fn sample_ground(&self, arena: &Arena) -> GroundSample {
        let pose = self.state.pose;
        let color_at = pose.to_world(Vec2d::new(self.config.color_sensor[0], self.config.color_sensor[1]));
        let rgb = arena.floor_color_at(color_at).unwrap_or(DEFAULT_FLOOR);
        let range_from = pose.to_world(Vec2d::new(self.config.distance_sensor[0], self.config.distance_sensor[1]));
        let distance = arena
            .raycast(range_from, pose.heading(), self.config.rangefinder_max)
            .map_or(f64::INFINITY, |hit| hit.distance);
        let light = if arena.contains(color_at) && arena.on_line_track(color_at) {
            0.0
        } else {
            arena.ambient_light
        };
        GroundSample { rgb, distance, light }
    }

    /// `/rvr/odom` payload.
    pub fn odom_payload(&self, noise: bool, seq: u64) -> serde_json::Value {
        let p = self.odometry(noise);
        json!({"x": p.x, "y": p.y, "theta": p.theta, "seq": seq})
    }

    /// Whether the body disc currently overlaps any wall.
    pub fn touches_wall(&self, arena: &Arena) -> bool {
        let r = self.config.body_radius();
        arena.walls.iter().any(|w| w.distance_to(self.state.pose.position()) < r)
    }
}
