//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use serde_json::{Map, Value};
use stair_core::scenarios::{GroundRecord, TraceRecord};
use stair_core::Vec2d;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Forward Euler on the unicycle model with a fixed small step. Returns
/// `(x, y, theta)` with theta left unwrapped.
pub fn euler(start: [f64; 3], v_left: f64, v_right: f64, track: f64, duration: f64, h: f64) -> [f64; 3] {
    let v = (v_left + v_right) / 2.0;
    let w = (v_right - v_left) / track;
    let n = (duration / h).round() as u64;
    let h = duration / n as f64;
    let [mut x, mut y, mut th] = start;
    for _ in 0..n {
        x += v * th.cos() * h;
        y += v * th.sin() * h;
        th += w * h;
    }
    [x, y, th]
}

/// Distance to a polyline by scanning every segment with the textbook
/// clamped projection.
pub fn brute_polyline_distance(p: Vec2d, pts: &[Vec2d]) -> f64 {
    if pts.len() == 1 {
        return ((p.x - pts[0].x).powi(2) + (p.y - pts[0].y).powi(2)).sqrt();
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let (ax, ay, bx, by) = (w[0].x, w[0].y, w[1].x, w[1].y);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.x - ax) * dx + (p.y - ay) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        best = best.min(((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt());
    }
    best
}

/// Homogeneous-transform forward kinematics for the yaw-pitch-pitch-pitch
/// chain: yaw about z, lift by L1, then three pitch joints each followed
/// by a link along the local x axis.
pub fn fk_matrices(q: [f64; 4], lengths: [f64; 4]) -> ([f64; 3], f64) {
    type M = [[f64; 4]; 4];
    fn mul(a: &M, b: &M) -> M {
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }
    let rot_z = |a: f64| -> M { [[a.cos(), -a.sin(), 0.0, 0.0], [a.sin(), a.cos(), 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]] };
    // Positive pitch raises the link: rotation about −y.
    let pitch = |a: f64| -> M { [[a.cos(), 0.0, -a.sin(), 0.0], [0.0, 1.0, 0.0, 0.0], [a.sin(), 0.0, a.cos(), 0.0], [0.0, 0.0, 0.0, 1.0]] };
    let trans = |x: f64, z: f64| -> M { [[1.0, 0.0, 0.0, x], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, z], [0.0, 0.0, 0.0, 1.0]] };
    let mut t = mul(&rot_z(q[0]), &trans(0.0, lengths[0]));
    for j in 1..4 {
        t = mul(&t, &pitch(q[j]));
        t = mul(&t, &trans(lengths[j], 0.0));
    }
    // The tool x axis, projected onto the vertical plane, gives the pitch.
    let horizontal = (t[0][0] * t[0][0] + t[1][0] * t[1][0]).sqrt();
    let mut tool_pitch = t[2][0].atan2(horizontal);
    if (t[0][0] * q[0].cos() + t[1][0] * q[0].sin()) < 0.0 {
        tool_pitch = std::f64::consts::PI - tool_pitch;
    }
    ([t[0][3], t[1][3], t[2][3]], tool_pitch)
}

pub fn record(step: u64, t: f64, x: f64, y: f64, theta: f64, v: f64) -> TraceRecord {
    TraceRecord {
        step,
        t,
        pose: [x, y, theta],
        odom: [x, y, theta],
        v: [v, v],
        q: [0.0; 4],
        gripper: 0.06,
        ground: GroundRecord {
            rgb: [128; 3],
            distance: None,
            light: 400.0,
        },
        detections: None,
        collision: false,
    }
}

/// A random walk of `n` records at 0.02 s spacing.
pub fn random_trace<R: Rng>(rng: &mut R, n: usize) -> Vec<TraceRecord> {
    let (mut x, mut y, mut th) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(-3.0..3.0));
    (0..n)
        .map(|k| {
            let v: f64 = rng.random_range(0.0..0.3);
            th += rng.random_range(-0.2..0.2);
            x += v * 0.02 * f64::cos(th);
            y += v * 0.02 * f64::sin(th);
            record(k as u64, k as f64 * 0.02, x, y, th, v)
        })
        .collect()
}

pub fn random_polyline<R: Rng>(rng: &mut R) -> Vec<Vec2d> {
    let n = rng.random_range(1..8);
    (0..n).map(|_| Vec2d::new(rng.random_range(-0.5..2.5), rng.random_range(-0.5..2.5))).collect()
}

/// Nested JSON documents with finite numbers, strings and containers.
pub fn random_document<R: Rng>(rng: &mut R, depth: u32) -> Value {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        return match rng.random_range(0..5) {
            0 => Value::Null,
            1 => Value::Bool(rng.random()),
            2 => Value::from(rng.random::<i64>()),
            3 => Value::from(rng.random_range(-1e6..1e6) * rng.random::<f64>()),
            _ => {
                let len = rng.random_range(0..12);
                Value::String((0..len).map(|_| char::from_u32(rng.random_range(0x20..0x2FF)).unwrap_or('?')).collect())
            }
        };
    }
    if rng.random_bool(0.5) {
        Value::Array((0..rng.random_range(0..5)).map(|_| random_document(rng, depth - 1)).collect())
    } else {
        let mut m = Map::new();
        for i in 0..rng.random_range(0..5) {
            m.insert(format!("k{i}"), random_document(rng, depth - 1));
        }
        Value::Object(m)
    }
}
