//! Static arena: walls, floor paint, line tracks and traffic signs, plus the
//! ray and point queries the sensors are built on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::{convex_contains, distance_to_polyline, is_convex, normalize_angle};
use crate::{Pose2d, Segment2d, Vec2d};

pub type Rgb = [u8; 3];

pub const DEFAULT_FLOOR: Rgb = [128, 128, 128];
pub const DEFAULT_AMBIENT_LUX: f64 = 400.0;

/// Equal-distance tolerance for raycast tie-breaking.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("arena parse error: {0}")]
    Parse(String),
    #[error("arena schema error: {0}")]
    Schema(String),
    #[error("arena geometry out of bounds: {0}")]
    Bounds(String),
    #[error("point ({x}, {y}) is outside the arena")]
    OutOfArena { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Stop,
    Yield,
    #[serde(rename = "speed30")]
    SpeedLimit30,
    #[serde(rename = "speed50")]
    SpeedLimit50,
    TurnLeft,
    TurnRight,
    NoEntry,
    /// Classifier output only; never placed in an arena.
    None,
}

impl SignClass {
    /// Every class that can appear in an arena, in canonical order.
    pub const PLACEABLE: [SignClass; 7] = [
        SignClass::Stop,
        SignClass::Yield,
        SignClass::SpeedLimit30,
        SignClass::SpeedLimit50,
        SignClass::TurnLeft,
        SignClass::TurnRight,
        SignClass::NoEntry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SignClass::Stop => "stop",
            SignClass::Yield => "yield",
            SignClass::SpeedLimit30 => "speed30",
            SignClass::SpeedLimit50 => "speed50",
            SignClass::TurnLeft => "turn_left",
            SignClass::TurnRight => "turn_right",
            SignClass::NoEntry => "no_entry",
            SignClass::None => "none",
        }
    }

    /// Position in [`PLACEABLE`](Self::PLACEABLE); `None` for the reject class.
    pub fn index(self) -> Option<usize> {
        SignClass::PLACEABLE.iter().position(|c| *c == self)
    }

    pub fn is_placeable(self) -> bool {
        self != SignClass::None
    }
}

impl fmt::Display for SignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignClass::PLACEABLE
            .iter()
            .chain(std::iter::once(&SignClass::None))
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown sign class {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sign {
    pub class: SignClass,
    /// Center of the face; `theta` is the direction the face looks toward.
    pub pose: Pose2d,
    pub face_width: f64,
    /// Height of the bottom edge of the face above the floor.
    pub mount_height: f64,
}

impl Sign {
    pub fn center(&self) -> Vec2d {
        self.pose.position()
    }

    /// Unit normal of the printed face.
    pub fn facing(&self) -> Vec2d {
        self.pose.heading()
    }

    /// The face as a floor-plan segment, perpendicular to the facing direction.
    pub fn face_segment(&self) -> Segment2d {
        let half = self.facing().perp() * (self.face_width / 2.0);
        Segment2d::new(self.center() - half, self.center() + half)
    }

    /// Height of the face center above the floor.
    pub fn center_height(&self) -> f64 {
        self.mount_height + self.face_width / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorRegion {
    pub polygon: Vec<Vec2d>,
    pub rgb: Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineTrack {
    pub points: Vec<Vec2d>,
    pub width: f64,
    pub rgb: Rgb,
}

impl LineTrack {
    pub fn covers(&self, p: Vec2d) -> bool {
        distance_to_polyline(p, &self.points) <= self.width / 2.0
    }
}

/// Immutable world description. Walls and signs are identified by their
/// index in the respective list.
#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
    pub ambient_light: f64,
    pub walls: Vec<Segment2d>,
    pub floor_regions: Vec<FloorRegion>,
    pub line_tracks: Vec<LineTrack>,
    pub signs: Vec<Sign>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Wall,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub surface: Surface,
    pub id: usize,
}

/// A sign passing the range, bearing, facing and occlusion tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignSighting {
    pub id: usize,
    pub sign: Sign,
    /// Counter-clockwise angle from the camera's optical axis.
    pub bearing: f64,
    pub distance: f64,
}

impl Arena {
    /// Empty arena with default ambient light.
    pub fn empty(width: f64, height: f64) -> Self {
        Arena {
            width,
            height,
            ambient_light: DEFAULT_AMBIENT_LUX,
            walls: Vec::new(),
            floor_regions: Vec::new(),
            line_tracks: Vec::new(),
            signs: Vec::new(),
        }
    }

    pub fn contains(&self, p: Vec2d) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    /// The four boundary walls, in the order bottom, right, top, left.
    pub fn perimeter(width: f64, height: f64) -> Vec<Segment2d> {
        let c = [
            Vec2d::new(0.0, 0.0),
            Vec2d::new(width, 0.0),
            Vec2d::new(width, height),
            Vec2d::new(0.0, height),
        ];
        (0..4).map(|i| Segment2d::new(c[i], c[(i + 1) % 4])).collect()
    }

    /// Nearest wall or sign face along the ray within `max_range`.
    ///
    /// Equal distances (within 1e-12) prefer walls over signs, then the lower id.
    pub fn raycast(&self, origin: Vec2d, direction: Vec2d, max_range: f64) -> Option<RayHit> {
        debug_assert!((direction.norm() - 1.0).abs() <= 1e-9, "direction must be a unit vector");
        debug_assert!(max_range > 0.0);
        let walls = self.walls.iter().enumerate().map(|(id, s)| (Surface::Wall, id, *s));
        let signs = self
            .signs
            .iter()
            .enumerate()
            .map(|(id, s)| (Surface::Sign, id, s.face_segment()));
        let mut best: Option<RayHit> = None;
        for (surface, id, seg) in walls.chain(signs) {
            let Some(t) = seg.ray_intersection(origin, direction) else {
                continue;
            };
            if t > max_range {
                continue;
            }
            let replace = match best {
                None => true,
                // Candidates arrive walls-first in id order, so an equal
                // distance never displaces the incumbent.
                Some(b) => t < b.distance - TIE_EPS,
            };
            if replace {
                best = Some(RayHit {
                    distance: t,
                    surface,
                    id,
                });
            }
        }
        best
    }

    /// Like [`raycast`](Self::raycast) but ignoring sign faces.
    pub fn raycast_walls(&self, origin: Vec2d, direction: Vec2d, max_range: f64) -> Option<RayHit> {
        self.walls
            .iter()
            .enumerate()
            .filter_map(|(id, s)| s.ray_intersection(origin, direction).map(|t| (id, t)))
            .filter(|&(_, t)| t <= max_range)
            .fold(None, |best: Option<RayHit>, (id, t)| match best {
                Some(b) if t >= b.distance - TIE_EPS => Some(b),
                _ => Some(RayHit {
                    distance: t,
                    surface: Surface::Wall,
                    id,
                }),
            })
    }

    /// Floor color under `p`: line tracks beat regions, later entries beat
    /// earlier ones, and bare floor is gray.
    pub fn floor_color_at(&self, p: Vec2d) -> Result<Rgb, WorldError> {
        if !self.contains(p) {
            return Err(WorldError::OutOfArena { x: p.x, y: p.y });
        }
        if let Some(track) = self.line_tracks.iter().rev().find(|t| t.covers(p)) {
            return Ok(track.rgb);
        }
        Ok(self
            .floor_regions
            .iter()
            .rev()
            .find(|r| convex_contains(&r.polygon, p))
            .map_or(DEFAULT_FLOOR, |r| r.rgb))
    }

    pub fn on_line_track(&self, p: Vec2d) -> bool {
        self.line_tracks.iter().any(|t| t.covers(p))
    }

    /// Signs the camera can see, nearest first.
    pub fn visible_signs(&self, camera: Pose2d, fov: f64, max_range: f64) -> Vec<SignSighting> {
        debug_assert!(fov > 0.0 && fov <= std::f64::consts::PI);
        let eye = camera.position();
        let mut out: Vec<SignSighting> = self
            .signs
            .iter()
            .enumerate()
            .filter_map(|(id, sign)| {
                let to_sign = sign.center() - eye;
                let distance = to_sign.norm();
                if distance <= 0.0 || distance > max_range {
                    return None;
                }
                let bearing = normalize_angle(to_sign.angle() - camera.theta);
                if bearing.abs() > fov / 2.0 {
                    return None;
                }
                let dir = to_sign * (1.0 / distance);
                if sign.facing().dot(dir) >= 0.0 {
                    return None;
                }
                if let Some(hit) = self.raycast_walls(eye, dir, distance) {
                    if hit.distance < distance - 1e-9 {
                        return None;
                    }
                }
                Some(SignSighting {
                    id,
                    sign: *sign,
                    bearing,
                    distance,
                })
            })
            .collect();
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Arena, WorldError> {
        load_arena(bytes)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pt = |p: &Vec2d| [p.x, p.y];
        serde_json::json!({
            "size": [self.width, self.height],
            "ambient_light": self.ambient_light,
            "walls": self.walls.iter().map(|w| [pt(&w.a), pt(&w.b)]).collect::<Vec<_>>(),
            "floor": self.floor_regions.iter().map(|r| serde_json::json!({
                "poly": r.polygon.iter().map(pt).collect::<Vec<_>>(),
                "rgb": r.rgb,
            })).collect::<Vec<_>>(),
            "lines": self.line_tracks.iter().map(|t| serde_json::json!({
                "pts": t.points.iter().map(pt).collect::<Vec<_>>(),
                "width": t.width,
                "rgb": t.rgb,
            })).collect::<Vec<_>>(),
            "signs": self.signs.iter().map(|s| serde_json::json!({
                "class": s.class,
                "pose": [s.pose.x, s.pose.y, s.pose.theta],
                "face_width": s.face_width,
                "mount_height": s.mount_height,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArena {
    size: [f64; 2],
    ambient_light: f64,
    walls: Vec<[[f64; 2]; 2]>,
    floor: Vec<RawRegion>,
    lines: Vec<RawLine>,
    signs: Vec<RawSign>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    poly: Vec<[f64; 2]>,
    rgb: Rgb,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    pts: Vec<[f64; 2]>,
    width: f64,
    rgb: Rgb,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSign {
    class: SignClass,
    pose: [f64; 3],
    face_width: f64,
    mount_height: f64,
}

fn v(p: [f64; 2]) -> Vec2d {
    Vec2d::new(p[0], p[1])
}

/// Parses and validates an arena document.
pub fn load_arena(bytes: &[u8]) -> Result<Arena, WorldError> {
    let raw: RawArena = serde_json::from_slice(bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => WorldError::Schema(e.to_string()),
        _ => WorldError::Parse(e.to_string()),
    })?;
    let [width, height] = raw.size;
    if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
        return Err(WorldError::Schema(format!("size must be positive, got {width}x{height}")));
    }
    if !(raw.ambient_light.is_finite() && raw.ambient_light >= 0.0) {
        return Err(WorldError::Schema("ambient_light must be >= 0".into()));
    }
    let arena_box = Arena::empty(width, height);
    let check = |what: String, p: Vec2d| -> Result<Vec2d, WorldError> {
        if !p.is_finite() {
            return Err(WorldError::Schema(format!("{what}: non-finite coordinate")));
        }
        if arena_box.contains(p) {
            Ok(p)
        } else {
            Err(WorldError::Bounds(format!("{what} at ({}, {}) outside {width}x{height}", p.x, p.y)))
        }
    };

    let mut walls = Vec::with_capacity(raw.walls.len());
    for (i, [a, b]) in raw.walls.into_iter().enumerate() {
        walls.push(Segment2d::new(check(format!("walls[{i}]"), v(a))?, check(format!("walls[{i}]"), v(b))?));
    }

    let mut floor_regions = Vec::with_capacity(raw.floor.len());
    for (i, r) in raw.floor.into_iter().enumerate() {
        let polygon = r
            .poly
            .into_iter()
            .map(|p| check(format!("floor[{i}].poly"), v(p)))
            .collect::<Result<Vec<_>, _>>()?;
        if !is_convex(&polygon) {
            return Err(WorldError::Schema(format!("floor[{i}].poly is not a convex polygon")));
        }
        floor_regions.push(FloorRegion { polygon, rgb: r.rgb });
    }

    let mut line_tracks = Vec::with_capacity(raw.lines.len());
    for (i, l) in raw.lines.into_iter().enumerate() {
        if l.pts.len() < 2 {
            return Err(WorldError::Schema(format!("lines[{i}].pts needs at least 2 points")));
        }
        if !(l.width.is_finite() && l.width > 0.0) {
            return Err(WorldError::Schema(format!("lines[{i}].width must be positive")));
        }
        let points = l
            .pts
            .into_iter()
            .map(|p| check(format!("lines[{i}].pts"), v(p)))
            .collect::<Result<Vec<_>, _>>()?;
        line_tracks.push(LineTrack {
            points,
            width: l.width,
            rgb: l.rgb,
        });
    }

    let mut signs = Vec::with_capacity(raw.signs.len());
    for (i, s) in raw.signs.into_iter().enumerate() {
        if s.class == SignClass::None {
            return Err(WorldError::Schema(format!("signs[{i}].class: `none` cannot be placed")));
        }
        if !(s.face_width > 0.05 && s.face_width < 1.0) {
            return Err(WorldError::Schema(format!(
                "signs[{i}].face_width must lie in (0.05, 1.0), got {}",
                s.face_width
            )));
        }
        if !(s.mount_height.is_finite() && s.mount_height >= 0.0) {
            return Err(WorldError::Schema(format!("signs[{i}].mount_height must be >= 0")));
        }
        let [x, y, theta] = s.pose;
        if !theta.is_finite() {
            return Err(WorldError::Schema(format!("signs[{i}].pose: non-finite heading")));
        }
        let center = check(format!("signs[{i}]"), Vec2d::new(x, y))?;
        signs.push(Sign {
            class: s.class,
            pose: Pose2d::new(center.x, center.y, theta),
            face_width: s.face_width,
            mount_height: s.mount_height,
        });
    }

    Ok(Arena {
        width,
        height,
        ambient_light: raw.ambient_light,
        walls,
        floor_regions,
        line_tracks,
        signs,
    })
}
