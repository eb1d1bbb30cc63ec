mod common;

use stair_bus::{catalog, Broker};
use stair_core::scenarios::{
    evaluate_trace, parse_program, parse_trace, replay, run, trace_to_string, Command, Outcome, ReplayPace, RunOptions, Scenario,
};
use stair_core::twin::BaseConfig;
use stair_core::world::Arena;
use stair_core::Pose2d;

use common::fixtures;

fn drive_for() -> Vec<Command> {
    vec![Command::DriveFor { left: 0.1, right: 0.1, duration: 2.0 }]
}

/// Steps the tread-speed slew by hand: `speed` for `duration`, then zero,
/// summing v·dt until the robot is at rest.
fn ramp_distance(speed: f64, duration: f64, accel: f64, dt: f64) -> f64 {
    let driving = (duration / dt).round() as usize;
    let (mut v, mut x) = (0.0f64, 0.0);
    for k in 0.. {
        let target = if k < driving { speed } else { 0.0 };
        v += (target - v).clamp(-accel * dt, accel * dt);
        x += v * dt;
        if k >= driving && v == 0.0 {
            break;
        }
    }
    x
}

fn empty_run(dt: f64) -> f64 {
    let s = Scenario::free_play(Arena::empty(4.0, 3.0), Pose2d::new(0.0, 0.0, 0.0));
    let out = run(&s, &drive_for(), &RunOptions { seed: 0, dt, max_time: 3.0 }).unwrap();
    assert_eq!(out.report.outcome, Outcome::Pass);
    out.trace.last().unwrap().pose[0]
}

#[test]
fn empty_program_fills_the_horizon() {
    let s = Scenario::free_play(Arena::empty(4.0, 3.0), Pose2d::new(1.0, 1.0, 0.0));
    let out = run(&s, &[], &RunOptions::new(0, 1.0)).unwrap();
    assert_eq!(out.report.outcome, Outcome::Pass);
    assert_eq!(out.trace.len(), 50);
    for (k, w) in out.trace.windows(2).enumerate() {
        assert_eq!(w[1].step, k as u64 + 1);
        assert!((w[1].t - w[0].t - 0.02).abs() < 1e-12);
    }
}

#[test]
fn timed_drive_covers_the_ramped_distance() {
    let accel = BaseConfig::default().tread_accel_limit;
    let oracle = ramp_distance(0.1, 2.0, accel, 0.02);
    // Ramp-up loss and ramp-down gain cancel for a symmetric slew.
    assert!((oracle - 0.2).abs() < 1e-12, "{oracle}");
    assert!((empty_run(0.02) - oracle).abs() < 1e-12);
}

#[test]
fn halving_dt_barely_moves_the_endpoint() {
    let (coarse, fine) = (empty_run(0.02), empty_run(0.01));
    assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn driving_into_a_wall_reports_collision_at_first_contact() {
    let s = Scenario::free_play(
        stair_core::world::load_arena(&std::fs::read(fixtures().join("traffic_demo_arena.json")).unwrap()).unwrap(),
        Pose2d::new(3.5, 1.5, 0.0),
    );
    let program = parse_program(br#"[{"cmd": "drive", "left": 0.3, "right": 0.3}]"#).unwrap();
    let out = run(&s, &program, &RunOptions::new(0, 5.0)).unwrap();
    assert_eq!(out.report.outcome, Outcome::Collision);
    let first = out.trace.iter().find(|r| r.collision).unwrap();
    let event = out.report.events.iter().find(|e| e.kind == "collision").unwrap();
    assert_eq!(event.t, first.t);
    assert!(out.trace.iter().all(|r| r.pose[0] < 4.0 - 0.185 / 2.0 * 1.2 + 1e-12));
}

fn mixed_program() -> Vec<Command> {
    parse_program(
        br#"[
            {"cmd": "drive_for", "left": 0.2, "right": 0.15, "duration": 1.0},
            {"cmd": "turn_to", "theta": 1.2},
            {"cmd": "arm_set_joints", "q": [0.3, 0.4, -0.8, 0.2]},
            {"cmd": "gripper", "aperture": 0.01},
            {"cmd": "drive_for", "left": 0.1, "right": 0.1, "duration": 0.5}
        ]"#,
    )
    .unwrap()
}

#[test]
fn runs_are_byte_identical_per_seed() {
    let scenario = Scenario::load(&fixtures().join("traffic_demo.json")).unwrap();
    let trace = |seed| trace_to_string(&run(&scenario, &mixed_program(), &RunOptions::new(seed, 4.0)).unwrap().trace);
    let a = trace(11);
    assert_eq!(a, trace(11));
    assert_ne!(a, trace(12));
}

#[test]
fn constant_speed_through_the_stop_zone_is_one_violation_and_replay_scores_alike() {
    let mut scenario = Scenario::load(&fixtures().join("traffic_demo.json")).unwrap();
    scenario.model = None;
    let program = parse_program(br#"[{"cmd": "drive", "left": 0.1, "right": 0.1}]"#).unwrap();
    let out = run(&scenario, &program, &RunOptions::new(0, scenario.max_time)).unwrap();
    assert_eq!(out.report.outcome, Outcome::Fail);
    assert_eq!(out.report.metrics["violations"], 1.0);
    assert_eq!(out.report.events.iter().filter(|e| e.kind == "violation").count(), 1);

    let text = trace_to_string(&out.trace);
    let parsed = parse_trace(&text).unwrap();
    let bus = Broker::new();
    let odom = bus.subscribe_to(catalog::ODOM).unwrap();
    assert_eq!(replay(&parsed, &bus, ReplayPace::Fast), out.trace.len());
    let seen = odom.drain();
    assert_eq!(seen.len(), out.trace.len());
    for (env, r) in seen.iter().zip(&out.trace) {
        assert_eq!(env.payload["x"].as_f64().unwrap(), r.odom[0]);
    }

    let original = evaluate_trace(&out.trace, &scenario).unwrap();
    let replayed = evaluate_trace(&parsed, &scenario).unwrap();
    assert_eq!(original, replayed);
    assert_eq!(original.metrics, out.report.metrics);
}
