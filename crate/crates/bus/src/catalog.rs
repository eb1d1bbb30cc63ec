//! Fixed topic and service names published by the twin.

pub const CMD_VEL: &str = "/rvr/cmd_vel";
pub const ODOM: &str = "/rvr/odom";
pub const IMU: &str = "/rvr/imu";
pub const GROUND: &str = "/rvr/ground";
pub const JOINT_STATES: &str = "/arm/joint_states";
pub const ARM_TELEMETRY: &str = "/arm/telemetry";
pub const CAMERA_FRAME: &str = "/camera/frame";
pub const DETECTIONS: &str = "/vision/detections";

pub const ARM_MOVE_TO: &str = "/arm/move_to";
pub const ARM_SET_JOINTS: &str = "/arm/set_joints";
pub const GRIPPER_SET: &str = "/gripper/set";
pub const SIM_RESET: &str = "/sim/reset";
pub const SIM_STEP: &str = "/sim/step";
pub const SIM_ARENA: &str = "/sim/arena";
pub const LEARN_TRAIN_CENTROID: &str = "/learn/train_centroid";

/// Answered by the network server itself; lets a client confirm that all
/// frames it sent earlier on the connection have been processed.
pub const BUS_PING: &str = "/bus/ping";

pub const TOPICS: [&str; 8] = [
    CMD_VEL,
    ODOM,
    IMU,
    GROUND,
    JOINT_STATES,
    ARM_TELEMETRY,
    CAMERA_FRAME,
    DETECTIONS,
];

pub const SERVICES: [&str; 5] = [ARM_MOVE_TO, ARM_SET_JOINTS, GRIPPER_SET, SIM_RESET, SIM_STEP];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TopicName;

    #[test]
    fn catalogue_names_are_valid() {
        for name in TOPICS.iter().chain(SERVICES.iter()).chain([SIM_ARENA, LEARN_TRAIN_CENTROID, BUS_PING].iter()) {
            TopicName::new(*name).unwrap();
        }
    }
}
