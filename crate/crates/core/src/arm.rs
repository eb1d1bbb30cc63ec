//! Four-joint arm (yaw, then three parallel pitch joints) with a gripper.
//!
//! Servos follow trapezoidal velocity profiles that are integrated exactly
//! phase by phase, so bounds hold at every step regardless of `dt`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geom::normalize_angle;
use crate::scalar::Real;

pub const JOINTS: usize = 4;
pub const MAX_APERTURE: f64 = 0.06;
/// Objects within this distance of the grip point can be grasped.
pub const GRASP_RADIUS: f64 = 0.02;
pub const SUPPLY_VOLTAGE: f64 = 12.0;
pub const AMBIENT_TEMP: f64 = 25.0;
pub const THERMAL_TAU: f64 = 30.0;
/// Tolerance for "at target" in telemetry and convergence checks.
pub const AT_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArmError {
    #[error("joint {joint} value {value} outside [{lo}, {hi}]")]
    JointLimit { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error("target is out of reach")]
    Unreachable,
    #[error("every IK solution violates a joint limit")]
    AllSolutionsFiltered,
    #[error("dt must lie in (0, 0.1], got {0}")]
    InvalidDt(f64),
    #[error("invalid arm config: {0}")]
    BadConfig(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("aperture {0} outside [0, {MAX_APERTURE}]")]
    BadAperture(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig<T> {
    /// L1 shoulder height, L2 upper arm, L3 forearm, L4 wrist to grip point.
    pub lengths: [T; 4],
    pub limits: [[T; 2]; JOINTS],
    pub max_velocity: [T; JOINTS],
    pub max_accel: [T; JOINTS],
    pub holding_stiffness: T,
    pub angular_stiffness: T,
}

impl<T: Real> Default for ArmConfig<T> {
    fn default() -> Self {
        let l = T::lit;
        let pi = T::PI();
        let half_pi = T::FRAC_PI_2();
        ArmConfig {
            lengths: [l(0.07), l(0.10), l(0.10), l(0.05)],
            limits: [[-pi, pi], [-half_pi, half_pi], [l(-2.6), l(2.6)], [-half_pi, half_pi]],
            max_velocity: [l(1.5); JOINTS],
            max_accel: [l(3.0); JOINTS],
            holding_stiffness: l(0.5),
            angular_stiffness: l(1.0),
        }
    }
}

impl<T: Real> ArmConfig<T> {
    pub fn validate(&self) -> Result<(), ArmError> {
        let bad = |m: String| Err(ArmError::BadConfig(m));
        let zero = T::zero();
        for (i, l) in self.lengths.iter().enumerate() {
            if !(l.is_finite() && *l > zero) {
                return bad(format!("length L{} must be > 0", i + 1));
            }
        }
        for j in 0..JOINTS {
            let [lo, hi] = self.limits[j];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("joint {j} needs lo < hi"));
            }
            if !(self.max_velocity[j].is_finite() && self.max_velocity[j] > zero) {
                return bad(format!("joint {j} max_velocity must be > 0"));
            }
            if !(self.max_accel[j].is_finite() && self.max_accel[j] > zero) {
                return bad(format!("joint {j} max_accel must be > 0"));
            }
        }
        for (name, s) in [("holding", self.holding_stiffness), ("angular", self.angular_stiffness)] {
            if !(s > zero && s <= T::one()) {
                return bad(format!("{name}_stiffness must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn check_limits(&self, q: &[T; JOINTS]) -> Result<(), ArmError> {
        for (j, &v) in q.iter().enumerate() {
            let [lo, hi] = self.limits[j];
            if !(v >= lo && v <= hi) {
                return Err(ArmError::JointLimit {
                    joint: j,
                    value: v.to_f64_lossy(),
                    lo: lo.to_f64_lossy(),
                    hi: hi.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    pub fn effective_velocity(&self, j: usize) -> T {
        self.max_velocity[j] * self.angular_stiffness
    }

    pub fn effective_accel(&self, j: usize) -> T {
        self.max_accel[j] * self.angular_stiffness
    }
}

/// Grip-point position (arm base frame) and grip pitch.
pub fn forward_kinematics<T: Real>(q: &[T; JOINTS], config: &ArmConfig<T>) -> Result<([T; 3], T), ArmError> {
    config.check_limits(q)?;
    Ok(fk_unchecked(q, config))
}

pub(crate) fn fk_unchecked<T: Real>(q: &[T; JOINTS], config: &ArmConfig<T>) -> ([T; 3], T) {
    let [l1, l2, l3, l4] = config.lengths;
    let a2 = q[1];
    let a3 = a2 + q[2];
    let a4 = a3 + q[3];
    let r = l2 * a2.cos() + l3 * a3.cos() + l4 * a4.cos();
    let z = l1 + l2 * a2.sin() + l3 * a3.sin() + l4 * a4.sin();
    ([r * q[0].cos(), r * q[0].sin(), z], a4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Up,
    Down,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution<T> {
    pub branch: Branch,
    pub q: [T; JOINTS],
}

/// Analytic IK: at most one elbow-up and one elbow-down solution.
pub fn inverse_kinematics<T: Real>(target: [T; 3], pitch: T, config: &ArmConfig<T>) -> Result<Vec<IkSolution<T>>, ArmError> {
    if !(target.iter().all(|v| v.is_finite()) && pitch.is_finite()) {
        return Err(ArmError::NonFinite);
    }
    let [l1, l2, l3, l4] = config.lengths;
    let [x, y, z] = target;
    let q1 = y.atan2(x);
    let r = (x * x + y * y).sqrt() - l4 * pitch.cos();
    let zw = z - l1 - l4 * pitch.sin();
    let two = T::lit(2.0);
    let mut d = (r * r + zw * zw - l2 * l2 - l3 * l3) / (two * l2 * l3);
    let slack = T::lit(1e-12);
    if d.abs() > T::one() + slack {
        return Err(ArmError::Unreachable);
    }
    d = d.max(-T::one()).min(T::one());
    let elbow = d.acos();

    let mut solutions = Vec::with_capacity(2);
    for (branch, q3) in [(Branch::Up, -elbow), (Branch::Down, elbow)] {
        let q2 = zw.atan2(r) - (l3 * q3.sin()).atan2(l2 + l3 * q3.cos());
        let q2 = normalize_angle(q2);
        let q4 = normalize_angle(pitch - q2 - q3);
        let q = [q1, q2, q3, q4];
        if solutions.iter().any(|s: &IkSolution<T>| s.q == q) {
            continue;
        }
        solutions.push(IkSolution { branch, q });
    }
    solutions.retain(|s| config.check_limits(&s.q).is_ok());
    if solutions.is_empty() {
        return Err(ArmError::AllSolutionsFiltered);
    }
    Ok(solutions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState<T> {
    pub q: [T; JOINTS],
    pub qdot: [T; JOINTS],
    pub target: [T; JOINTS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoTelemetry<T> {
    pub voltage: T,
    pub current: T,
    pub temperature: T,
    pub position: T,
    pub rpm: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperState<T> {
    pub aperture: T,
    pub holding: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Graspable<T> {
    pub id: usize,
    /// Arm base frame.
    pub position: [T; 3],
    pub grip_width: T,
}

/// Advances one joint by `dt` along a trapezoidal profile toward `goal`.
/// Returns the new (position, velocity).
pub fn servo_profile_step<T: Real>(mut q: T, mut v: T, goal: T, vmax: T, amax: T, dt: T) -> (T, T) {
    let zero = T::zero();
    let eps = T::lit(1e-12);
    let mut left = dt;
    // Each pass finishes one phase or consumes all remaining time; a few
    // passes suffice, the cap only guards against float stalls.
    for _ in 0..16 {
        if left <= zero {
            break;
        }
        let d = goal - q;
        if d.abs() <= eps && v.abs() <= eps {
            return (goal, zero);
        }
        let dir = if d > zero {
            T::one()
        } else if d < zero {
            -T::one()
        } else {
            -v.signum()
        };
        let dist = d.abs();
        let u = v * dir;
        let brake = u * u / (T::lit(2.0) * amax);

        // (acceleration toward goal, phase duration, snap at end)
        let (acc, t, snap) = if u < zero {
            (amax, (-u / amax).min(left), false)
        } else if u > vmax + eps {
            (-amax, ((u - vmax) / amax).min(left), false)
        } else if brake >= dist - eps {
            if brake > dist + T::lit(1e-9) {
                // Cannot stop in time (target moved); stop, then come back.
                (-amax, (u / amax).min(left), false)
            } else {
                let t_stop = u / amax;
                (-amax, t_stop.min(left), t_stop <= left)
            }
        } else if u >= vmax - eps {
            (zero, ((dist - brake) / vmax).min(left), false)
        } else {
            let t_brake = ((T::lit(2.0) * u * u + T::lit(4.0) * amax * dist).sqrt() - T::lit(2.0) * u) / (T::lit(2.0) * amax);
            let t_cap = (vmax - u) / amax;
            (amax, t_brake.min(t_cap).min(left), false)
        };
        let t = t.max(zero);
        let u_end = u + acc * t;
        q = q + dir * (u * t + acc * t * t / T::lit(2.0));
        v = dir * u_end;
        left = left - t;
        if snap {
            return (goal, zero);
        }
        if t == zero && acc == zero {
            break;
        }
    }
    (q, v)
}

#[derive(Debug, Clone)]
pub struct Arm<T> {
    config: ArmConfig<T>,
    state: JointState<T>,
    temperature: [T; JOINTS],
    gripper: GripperState<T>,
}

impl<T: Real> Arm<T> {
    pub fn new(config: ArmConfig<T>) -> Result<Self, ArmError> {
        Self::with_pose(config, [T::zero(); JOINTS])
    }

    pub fn with_pose(config: ArmConfig<T>, q: [T; JOINTS]) -> Result<Self, ArmError> {
        config.validate()?;
        config.check_limits(&q)?;
        Ok(Arm {
            config,
            state: JointState {
                q,
                qdot: [T::zero(); JOINTS],
                target: q,
            },
            temperature: [T::lit(AMBIENT_TEMP); JOINTS],
            gripper: GripperState {
                aperture: T::lit(MAX_APERTURE),
                holding: None,
            },
        })
    }

    pub fn config(&self) -> &ArmConfig<T> {
        &self.config
    }

    pub fn state(&self) -> &JointState<T> {
        &self.state
    }

    pub fn gripper(&self) -> &GripperState<T> {
        &self.gripper
    }

    pub fn set_angular_stiffness(&mut self, s: T) -> Result<(), ArmError> {
        let mut cfg = self.config.clone();
        cfg.angular_stiffness = s;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn set_holding_stiffness(&mut self, s: T) -> Result<(), ArmError> {
        let mut cfg = self.config.clone();
        cfg.holding_stiffness = s;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn grip_point(&self) -> ([T; 3], T) {
        fk_unchecked(&self.state.q, &self.config)
    }

    pub fn set_targets(&mut self, target: [T; JOINTS]) -> Result<(), ArmError> {
        self.config.check_limits(&target)?;
        self.state.target = target;
        Ok(())
    }

    /// Solves IK and sets the chosen branch as target. `Any` picks the
    /// solution closest to the current joint angles.
    pub fn move_to(&mut self, target: [T; 3], pitch: T, branch: Branch) -> Result<[T; JOINTS], ArmError> {
        let solutions = inverse_kinematics(target, pitch, &self.config)?;
        let chosen = match branch {
            Branch::Any => {
                let cost = |s: &IkSolution<T>| {
                    s.q.iter()
                        .zip(self.state.q.iter())
                        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
                };
                solutions
                    .iter()
                    .min_by(|a, b| cost(a).partial_cmp(&cost(b)).unwrap_or(std::cmp::Ordering::Equal))
                    .map(|s| s.q)
            }
            wanted => solutions.iter().find(|s| s.branch == wanted).map(|s| s.q),
        }
        .ok_or(ArmError::AllSolutionsFiltered)?;
        self.set_targets(chosen)?;
        Ok(chosen)
    }

    pub fn converged(&self) -> bool {
        let tol = T::lit(AT_TARGET);
        (0..JOINTS).all(|j| (self.state.q[j] - self.state.target[j]).abs() < tol && self.state.qdot[j] == T::zero())
    }

    pub fn step_servos(&mut self, dt: T) -> Result<(JointState<T>, [ServoTelemetry<T>; JOINTS]), ArmError> {
        if !(dt > T::zero() && dt <= T::lit(0.1)) {
            return Err(ArmError::InvalidDt(dt.to_f64_lossy()));
        }
        for j in 0..JOINTS {
            let (q, v) = servo_profile_step(
                self.state.q[j],
                self.state.qdot[j],
                self.state.target[j],
                self.config.effective_velocity(j),
                self.config.effective_accel(j),
                dt,
            );
            let [lo, hi] = self.config.limits[j];
            self.state.q[j] = q.max(lo).min(hi);
            self.state.qdot[j] = v;
        }
        let relax = T::one() - (-dt / T::lit(THERMAL_TAU)).exp();
        for j in 0..JOINTS {
            let eq = T::lit(AMBIENT_TEMP) + T::lit(20.0) * (self.current(j) / T::lit(1.3));
            self.temperature[j] = self.temperature[j] + (eq - self.temperature[j]) * relax;
        }
        Ok((self.state, self.telemetry()))
    }

    fn current(&self, j: usize) -> T {
        let loaded = self.gripper.holding.is_some() && (self.state.q[j] - self.state.target[j]).abs() < T::lit(AT_TARGET);
        let hold = if loaded { T::lit(0.3) * self.config.holding_stiffness } else { T::zero() };
        T::lit(0.1) + T::lit(0.9) * self.state.qdot[j].abs() / self.config.max_velocity[j] + hold
    }

    pub fn telemetry(&self) -> [ServoTelemetry<T>; JOINTS] {
        std::array::from_fn(|j| ServoTelemetry {
            voltage: T::lit(SUPPLY_VOLTAGE),
            current: self.current(j),
            temperature: self.temperature[j],
            position: self.state.q[j],
            rpm: self.state.qdot[j] * T::lit(60.0) / T::TAU(),
        })
    }

    /// Sets the aperture instantly. Closing grabs the nearest object near the
    /// grip point that is wider than the new aperture; opening releases.
    pub fn gripper_set(&mut self, aperture: T, objects: &[Graspable<T>]) -> Result<GripperState<T>, ArmError> {
        if !(aperture >= T::zero() && aperture <= T::lit(MAX_APERTURE)) {
            return Err(ArmError::BadAperture(aperture.to_f64_lossy()));
        }
        if aperture >= self.gripper.aperture {
            self.gripper.holding = None;
        } else if self.gripper.holding.is_none() {
            let (grip, _) = self.grip_point();
            let dist = |o: &Graspable<T>| {
                let d = [o.position[0] - grip[0], o.position[1] - grip[1], o.position[2] - grip[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            };
            self.gripper.holding = objects
                .iter()
                .filter(|o| o.grip_width > aperture && dist(o) <= T::lit(GRASP_RADIUS))
                .min_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap_or(std::cmp::Ordering::Equal).then(a.id.cmp(&b.id)))
                .map(|o| o.id);
        }
        self.gripper.aperture = aperture;
        Ok(self.gripper)
    }

    pub fn joint_states_payload(&self) -> serde_json::Value {
        let f = |a: [T; JOINTS]| a.map(|v| v.to_f64_lossy());
        json!({"q": f(self.state.q), "qdot": f(self.state.qdot)})
    }

    pub fn telemetry_payload(&self) -> serde_json::Value {
        let servos: Vec<_> = self
            .telemetry()
            .iter()
            .map(|t| {
                json!({
                    "voltage": t.voltage.to_f64_lossy(),
                    "current": t.current.to_f64_lossy(),
                    "temperature": t.temperature.to_f64_lossy(),
                    "position": t.position.to_f64_lossy(),
                    "rpm": t.rpm.to_f64_lossy(),
                })
            })
            .collect();
        json!({"servos": servos, "aperture": self.gripper.aperture.to_f64_lossy(), "holding": self.gripper.holding})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cfg() -> ArmConfig<f64> {
        ArmConfig::default()
    }

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn fk_fully_extended() {
        let (p, pitch) = forward_kinematics(&[0.0; 4], &cfg()).unwrap();
        assert!(close(p, [0.25, 0.0, 0.07], 1e-15));
        assert_eq!(pitch, 0.0);
    }

    #[test]
    fn fk_base_yaw() {
        let (p, _) = forward_kinematics(&[FRAC_PI_2, 0.0, 0.0, 0.0], &cfg()).unwrap();
        assert!(close(p, [0.0, 0.25, 0.07], 1e-15));
    }

    #[test]
    fn fk_elbow_bent() {
        let (p, pitch) = forward_kinematics(&[0.0, FRAC_PI_2, -FRAC_PI_2, 0.0], &cfg()).unwrap();
        assert!(close(p, [0.15, 0.0, 0.17], 1e-15));
        assert!(pitch.abs() < 1e-15);
    }

    #[test]
    fn fk_rejects_out_of_limit() {
        let err = forward_kinematics(&[0.0, 2.0, 0.0, 0.0], &cfg()).unwrap_err();
        assert!(matches!(err, ArmError::JointLimit { joint: 1, .. }));
    }

    #[test]
    fn ik_recovers_known_pose() {
        let q = [0.3, 0.4, -0.8, 0.2];
        let (p, pitch) = forward_kinematics(&q, &cfg()).unwrap();
        let sols = inverse_kinematics(p, pitch, &cfg()).unwrap();
        assert!(sols.len() <= 2);
        assert!(sols.iter().any(|s| s.q.iter().zip(q.iter()).all(|(a, b)| (a - b).abs() < 1e-9)));
        for s in &sols {
            let (pp, _) = forward_kinematics(&s.q, &cfg()).unwrap();
            assert!(close(pp, p, 1e-9));
        }
    }

    #[test]
    fn ik_unreachable() {
        assert_eq!(inverse_kinematics([10.0, 0.0, 0.0], 0.3, &cfg()).unwrap_err(), ArmError::Unreachable);
    }

    #[test]
    fn ik_filtered_by_limits() {
        // Reachable only by folding the shoulder far below its lower limit.
        let mut c = cfg();
        c.limits[1] = [0.5, 1.0];
        assert_eq!(inverse_kinematics([0.25, 0.0, 0.07], 0.0, &c).unwrap_err(), ArmError::AllSolutionsFiltered);
    }

    #[test]
    fn ik_single_solution_at_full_extension() {
        let sols = inverse_kinematics([0.25, 0.0, 0.07], 0.0, &cfg()).unwrap();
        assert_eq!(sols.len(), 1);
    }

    #[test]
    fn set_targets_limit_named() {
        let mut arm = Arm::new(cfg()).unwrap();
        let err = arm.set_targets([0.0, 0.0, 3.0, 0.0]).unwrap_err();
        assert!(matches!(err, ArmError::JointLimit { joint: 2, .. }));
    }

    #[test]
    fn idle_at_target() {
        let mut arm = Arm::new(cfg()).unwrap();
        let (state, tele) = arm.step_servos(0.02).unwrap();
        assert_eq!(state.qdot, [0.0; 4]);
        for t in tele {
            assert_eq!(t.current, 0.1);
            assert_eq!(t.rpm, 0.0);
            assert_eq!(t.voltage, 12.0);
        }
    }

    #[test]
    fn converges_and_stays() {
        let mut arm = Arm::new(cfg()).unwrap();
        let target = [1.0, -0.5, 1.2, 0.3];
        arm.set_targets(target).unwrap();
        for _ in 0..400 {
            arm.step_servos(0.02).unwrap();
        }
        assert!(arm.converged());
        for _ in 0..50 {
            let (s, _) = arm.step_servos(0.02).unwrap();
            for j in 0..4 {
                assert!((s.q[j] - target[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn triangular_profile_timing() {
        let (vmax, amax) = (1.5f64, 3.0f64);
        let dist = vmax * vmax / amax;
        let total = 2.0 * vmax / amax;
        let (mut q, mut v, mut peak) = (0.0f64, 0.0f64, 0.0f64);
        let dt = 0.01;
        let steps = (total / dt).round() as usize;
        for _ in 0..steps {
            (q, v) = servo_profile_step(q, v, dist, vmax, amax, dt);
            peak = peak.max(v.abs());
        }
        assert!((peak - vmax).abs() < 1e-9);
        assert!((q - dist).abs() < 1e-12 && v == 0.0);
    }

    #[test]
    fn reversal_when_target_jumps_behind() {
        let (mut q, mut v) = (0.0f64, 1.0f64);
        let mut prev_v = v;
        for _ in 0..300 {
            (q, v) = servo_profile_step(q, v, -0.5, 1.5, 3.0, 0.01);
            assert!((v - prev_v).abs() <= 3.0 * 0.01 + 1e-12);
            assert!(v.abs() <= 1.5 + 1e-12);
            prev_v = v;
        }
        assert_eq!((q, v), (-0.5, 0.0));
    }

    #[test]
    fn telemetry_rpm_consistent() {
        let mut arm = Arm::new(cfg()).unwrap();
        arm.set_targets([PI / 2.0, 0.5, -0.5, 0.2]).unwrap();
        for _ in 0..20 {
            let (s, tele) = arm.step_servos(0.05).unwrap();
            for j in 0..4 {
                assert!((tele[j].rpm - s.qdot[j] * 60.0 / (2.0 * PI)).abs() < 1e-9);
                assert_eq!(tele[j].position, s.q[j]);
            }
        }
    }

    #[test]
    fn temperature_rises_under_load() {
        let mut arm = Arm::new(cfg()).unwrap();
        arm.set_targets([3.0, 0.0, 0.0, 0.0]).unwrap();
        arm.step_servos(0.1).unwrap();
        let (_, tele) = arm.step_servos(0.1).unwrap();
        assert!(tele[0].temperature > AMBIENT_TEMP);
        assert!(tele[1].temperature > AMBIENT_TEMP - 1e-12);
    }

    #[test]
    fn invalid_dt() {
        let mut arm = Arm::new(cfg()).unwrap();
        assert!(matches!(arm.step_servos(0.0), Err(ArmError::InvalidDt(_))));
        assert!(matches!(arm.step_servos(0.2), Err(ArmError::InvalidDt(_))));
    }

    #[test]
    fn gripper_grasp_and_release() {
        let mut arm = Arm::new(cfg()).unwrap();
        let (grip, _) = arm.grip_point();
        let far = Graspable { id: 7, position: [1.0, 1.0, 1.0], grip_width: 0.03 };
        assert_eq!(arm.gripper_set(0.01, &[far]).unwrap().holding, None);
        arm.gripper_set(0.06, &[]).unwrap();
        let near = Graspable { id: 3, position: grip, grip_width: 0.03 };
        assert_eq!(arm.gripper_set(0.01, &[far, near]).unwrap().holding, Some(3));
        assert_eq!(arm.gripper_set(0.05, &[]).unwrap().holding, None);
    }

    #[test]
    fn gripper_too_narrow_object_slips() {
        let mut arm = Arm::new(cfg()).unwrap();
        let (grip, _) = arm.grip_point();
        let thin = Graspable { id: 1, position: grip, grip_width: 0.005 };
        assert_eq!(arm.gripper_set(0.01, &[thin]).unwrap().holding, None);
    }

    #[test]
    fn holding_adds_current_at_target() {
        let mut arm = Arm::new(cfg()).unwrap();
        let (grip, _) = arm.grip_point();
        arm.gripper_set(0.01, &[Graspable { id: 0, position: grip, grip_width: 0.03 }]).unwrap();
        let (_, tele) = arm.step_servos(0.02).unwrap();
        assert!((tele[0].current - (0.1 + 0.3 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn move_to_branch_selection() {
        let mut arm = Arm::new(cfg()).unwrap();
        let q = [0.2, 0.4, -0.8, 0.2];
        let (p, pitch) = forward_kinematics(&q, &cfg()).unwrap();
        let up = arm.move_to(p, pitch, Branch::Up).unwrap();
        assert!(up[2] <= 0.0);
        let down = arm.move_to(p, pitch, Branch::Down).unwrap();
        assert!(down[2] >= 0.0);
    }

    #[test]
    fn works_in_f32() {
        let c: ArmConfig<f32> = ArmConfig::default();
        let (p, pitch) = forward_kinematics(&[0.3f32, 0.4, -0.8, 0.2], &c).unwrap();
        let sols = inverse_kinematics(p, pitch, &c).unwrap();
        for s in sols {
            let (pp, _) = forward_kinematics(&s.q, &c).unwrap();
            assert!((0..3).all(|i| (pp[i] - p[i]).abs() < 1e-5));
        }
    }
}
