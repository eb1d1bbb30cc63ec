//! Synthetic camera: renders arena signs as glyph billboards over a two-band
//! background, cuts patches and computes gradient/color features.

use base64::Engine;
use serde_json::json;

use crate::world::{Arena, Rgb, SignSighting};
use crate::Pose2d;

pub mod dataset;
pub mod features;
pub mod glyphs;

pub use features::{cut_patch, extract_features, Patch, FEATURE_LEN, PATCH_SIZE};

pub const DEFAULT_WIDTH: usize = 128;
pub const DEFAULT_HEIGHT: usize = 96;
pub const DEFAULT_HFOV: f64 = 1.2;
pub const DEFAULT_MAX_RANGE: f64 = 6.0;

pub const SKY: Rgb = [255, 255, 255];
pub const FLOOR_BAND: Rgb = [128, 128, 128];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerceptError {
    #[error("camera at ({x}, {y}) is outside the arena")]
    OutOfArena { x: f64, y: f64 },
    #[error("bad bbox {0:?}")]
    BadBBox(PixelRect),
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("bad patch: {0}")]
    BadPatch(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

/// Integer pixel rectangle, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        PixelRect { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn intersection(&self, o: &PixelRect) -> usize {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = (self.x + self.w).min(o.x + o.w);
        let y1 = (self.y + self.h).min(o.y + o.h);
        x1.saturating_sub(x0) * y1.saturating_sub(y0)
    }

    pub fn iou(&self, o: &PixelRect) -> f64 {
        let inter = self.intersection(o);
        let union = self.area() + o.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, top-left origin.
    pub pixels: Vec<u8>,
    pub sim_time: f64,
    pub hfov: f64,
}

impl Frame {
    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Frame {
        Frame {
            width,
            height,
            pixels: rgb.repeat(width * height),
            sim_time: 0.0,
            hfov: DEFAULT_HFOV,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn focal_px(&self) -> f64 {
        focal_length(self.width, self.hfov)
    }

    /// `/camera/frame` payload.
    pub fn to_payload(&self) -> serde_json::Value {
        json!({
            "w": self.width,
            "h": self.height,
            "rgb_base64": base64::engine::general_purpose::STANDARD.encode(&self.pixels),
            "sim_time": self.sim_time,
        })
    }

    pub fn from_payload(v: &serde_json::Value) -> Result<Frame, PerceptError> {
        let bad = |m: &str| PerceptError::BadFrame(m.to_string());
        let w = v["w"].as_u64().ok_or_else(|| bad("missing w"))? as usize;
        let h = v["h"].as_u64().ok_or_else(|| bad("missing h"))? as usize;
        let data = v["rgb_base64"].as_str().ok_or_else(|| bad("missing rgb_base64"))?;
        let pixels = base64::engine::general_purpose::STANDARD
            .decode(data)
            .map_err(|e| PerceptError::BadFrame(e.to_string()))?;
        if pixels.len() != w * h * 3 {
            return Err(bad("pixel count does not match w*h"));
        }
        Ok(Frame {
            width: w,
            height: h,
            pixels,
            sim_time: v["sim_time"].as_f64().unwrap_or(0.0),
            hfov: DEFAULT_HFOV,
        })
    }
}

pub fn focal_length(width: usize, hfov: f64) -> f64 {
    (width as f64 / 2.0) / libm::tan(hfov / 2.0)
}

/// Camera intrinsics plus mount height above the floor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub hfov: f64,
    pub mount_height: f64,
    pub max_range: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            hfov: DEFAULT_HFOV,
            mount_height: 0.12,
            max_range: DEFAULT_MAX_RANGE,
        }
    }
}

/// Billboard placement in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Billboard {
    pub left: f64,
    pub top: f64,
    pub size: f64,
}

impl Billboard {
    pub fn center_col(&self) -> f64 {
        self.left + self.size / 2.0
    }

    /// Pixels whose centers fall inside the billboard, clipped to the frame.
    pub fn pixel_rect(&self, width: usize, height: usize) -> Option<PixelRect> {
        let span = |start: f64, limit: usize| {
            let a = (start - 0.5).ceil().max(0.0);
            let b = (start + self.size - 0.5).ceil().min(limit as f64);
            (b > a).then_some((a as usize, (b - a) as usize))
        };
        let (x, w) = span(self.left, width)?;
        let (y, h) = span(self.top, height)?;
        Some(PixelRect { x, y, w, h })
    }
}

/// Pinhole projection of a sighted sign. Positive (counter-clockwise)
/// bearings land left of the image center.
pub fn billboard(camera: &Camera, sighting: &SignSighting) -> Billboard {
    let f = focal_length(camera.width, camera.hfov);
    let half_w = camera.width as f64 / 2.0;
    let col = half_w * (1.0 - libm::tan(sighting.bearing) / libm::tan(camera.hfov / 2.0));
    let size = sighting.sign.face_width * f / sighting.distance;
    let row = camera.height as f64 / 2.0 - f * (sighting.sign.center_height() - camera.mount_height) / sighting.distance;
    Billboard {
        left: col - size / 2.0,
        top: row - size / 2.0,
        size,
    }
}

/// Ground-truth pixel boxes of every visible sign, nearest first.
pub fn visible_billboards(camera: &Camera, pose: Pose2d, arena: &Arena) -> Vec<(SignSighting, PixelRect)> {
    arena
        .visible_signs(pose, camera.hfov, camera.max_range)
        .into_iter()
        .filter_map(|s| billboard(camera, &s).pixel_rect(camera.width, camera.height).map(|r| (s, r)))
        .collect()
}

pub fn render_frame(camera: &Camera, pose: Pose2d, arena: &Arena, sim_time: f64) -> Result<Frame, PerceptError> {
    if !arena.contains(pose.position()) {
        return Err(PerceptError::OutOfArena { x: pose.x, y: pose.y });
    }
    let (w, h) = (camera.width, camera.height);
    let mut frame = Frame::filled(w, h, SKY);
    for y in h / 2..h {
        for x in 0..w {
            frame.set_pixel(x, y, FLOOR_BAND);
        }
    }
    frame.sim_time = sim_time;
    frame.hfov = camera.hfov;

    let sightings = arena.visible_signs(pose, camera.hfov, camera.max_range);
    for s in sightings.iter().rev() {
        let Some(glyph) = glyphs::glyph(s.sign.class) else { continue };
        let bb = billboard(camera, s);
        let Some(rect) = bb.pixel_rect(w, h) else { continue };
        let cell = |p: usize, origin: f64| {
            let g = ((p as f64 + 0.5 - origin) / bb.size * glyphs::GLYPH_SIZE as f64).floor();
            (g.max(0.0) as usize).min(glyphs::GLYPH_SIZE - 1)
        };
        for y in rect.y..rect.y + rect.h {
            let gy = cell(y, bb.top);
            for x in rect.x..rect.x + rect.w {
                if let Some(rgb) = glyph[gy][cell(x, bb.left)] {
                    frame.set_pixel(x, y, rgb);
                }
            }
        }
    }
    Ok(frame)
}
