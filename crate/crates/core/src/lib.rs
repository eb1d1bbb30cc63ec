//! Deterministic digital twin of a small educational robot: a tracked
//! differential-drive base with IMU, color, range and light sensors, a
//! four-joint arm with gripper, a synthetic camera, three tiers of
//! traffic-sign recognition, and a scenario runner that scores exercises.
//!
//! Geometry and kinematics are generic over [`Real`] (`f32` or `f64`);
//! the aliases below fix the scalar for the simulation, which runs in `f64`.

pub mod arm;
pub mod geom;
pub mod learn;
pub mod percept;
pub mod rig;
pub mod scalar;
pub mod scenarios;
pub mod sim;
pub mod twin;
pub mod world;

pub use scalar::Real;

pub type Vec2d = geom::Vec2<f64>;
pub type Vec2f = geom::Vec2<f32>;
pub type Pose2d = geom::Pose2D<f64>;
pub type Pose2f = geom::Pose2D<f32>;
pub type Segment2d = geom::Segment<f64>;

pub type ArmConfigd = arm::ArmConfig<f64>;
pub type ArmConfigf = arm::ArmConfig<f32>;
pub type Armd = arm::Arm<f64>;
pub type Armf = arm::Arm<f32>;
pub type JointStated = arm::JointState<f64>;
pub type ServoTelemetryd = arm::ServoTelemetry<f64>;
