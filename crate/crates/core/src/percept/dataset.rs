//! Jittered glyph patches rendered through the camera model, and PPM
//! dataset directories of `<class>_<index>.ppm` files.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{billboard, cut_patch, render_frame, Billboard, Camera, Frame, Patch, PerceptError, PixelRect, PATCH_SIZE};
use crate::world::{Arena, Sign, SignClass};
use crate::Pose2d;

pub const SIGN_FACE: f64 = 0.15;

/// Ranges the generator samples from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Jitter {
    pub distance: (f64, f64),
    pub bearing: f64,
    pub mount_height: (f64, f64),
    /// Window side relative to the billboard side.
    pub scale: (f64, f64),
    /// Window center shift as a fraction of the billboard side.
    pub shift: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            distance: (0.42, 0.7),
            bearing: 0.4,
            mount_height: (0.03, 0.07),
            scale: (0.95, 1.1),
            shift: 0.05,
        }
    }
}

/// A camera at the origin of a 4×4 arena looking at one sign.
pub fn sign_view(class: SignClass, distance: f64, bearing: f64, mount_height: f64, camera: &Camera) -> (Frame, Billboard) {
    let eye = Pose2d::new(0.5, 2.0, 0.0);
    let mut arena = Arena::empty(4.0, 4.0);
    let sign = Sign {
        class,
        pose: Pose2d::new(eye.x + distance * bearing.cos(), eye.y + distance * bearing.sin(), bearing + PI),
        face_width: SIGN_FACE,
        mount_height,
    };
    arena.signs.push(sign);
    let frame = render_frame(camera, eye, &arena, 0.0).expect("eye is inside the arena");
    let sighting = arena.visible_signs(eye, camera.hfov, camera.max_range)[0];
    (frame, billboard(camera, &sighting))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Square window of side `size` centered at (`cx`, `cy`), clamped to the frame.
pub fn square_window(cx: f64, cy: f64, size: f64, width: usize, height: usize) -> PixelRect {
    let s = (size.round() as usize).clamp(4, width.min(height));
    let x = ((cx - s as f64 / 2.0).round().max(0.0) as usize).min(width - s);
    let y = ((cy - s as f64 / 2.0).round().max(0.0) as usize).min(height - s);
    PixelRect::new(x, y, s, s)
}

pub fn generate_patch<R: Rng + ?Sized>(class: SignClass, jitter: &Jitter, rng: &mut R) -> Patch {
    let camera = Camera::default();
    let distance = uniform(rng, jitter.distance);
    let bearing = uniform(rng, (-jitter.bearing, jitter.bearing));
    let mount = uniform(rng, jitter.mount_height);
    let scale = uniform(rng, jitter.scale);
    let dx = uniform(rng, (-jitter.shift, jitter.shift));
    let dy = uniform(rng, (-jitter.shift, jitter.shift));
    let (frame, bb) = sign_view(class, distance, bearing, mount, &camera);
    let cy = bb.top + bb.size / 2.0;
    let window = square_window(bb.center_col() + dx * bb.size, cy + dy * bb.size, bb.size * scale, frame.width, frame.height);
    cut_patch(&frame, window).expect("window clamped to frame")
}

/// `per_class` patches for each class, grouped by class in the given order.
pub fn generate_dataset(classes: &[SignClass], per_class: usize, seed: u64, jitter: &Jitter) -> Vec<(SignClass, Patch)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for &class in classes {
        for _ in 0..per_class {
            out.push((class, generate_patch(class, jitter, &mut rng)));
        }
    }
    out
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PerceptError {
    PerceptError::Dataset(format!("{}: {e}", path.display()))
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<(), PerceptError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let enc = PnmEncoder::new(std::io::BufWriter::new(file)).with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary));
    enc.write_image(rgb, width as u32, height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| io_err(path, e))
}

/// Reads any PNM image as RGB; images that are not 32×32 are resampled.
pub fn read_patch(path: &Path) -> Result<Patch, PerceptError> {
    let img = image::ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| io_err(path, e))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.into_raw();
    if w == PATCH_SIZE && h == PATCH_SIZE {
        return Patch::from_rgb(pixels);
    }
    let frame = Frame {
        width: w,
        height: h,
        pixels,
        sim_time: 0.0,
        hfov: super::DEFAULT_HFOV,
    };
    cut_patch(&frame, PixelRect::new(0, 0, w, h)).map_err(|e| io_err(path, e))
}

/// Writes `<class>_<index>.ppm`, numbering each class from 0.
pub fn save_dataset(dir: &Path, items: &[(SignClass, Patch)]) -> Result<(), PerceptError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut counts = [0usize; SignClass::PLACEABLE.len()];
    for (class, patch) in items {
        let k = class.index().ok_or_else(|| PerceptError::Dataset("class none cannot be saved".into()))?;
        let path = dir.join(format!("{}_{}.ppm", class.as_str(), counts[k]));
        counts[k] += 1;
        write_ppm(&path, PATCH_SIZE, PATCH_SIZE, patch.as_rgb())?;
    }
    Ok(())
}

/// Loads every `<class>_<index>.ppm` in `dir`, ordered by class then index.
pub fn load_dataset(dir: &Path) -> Result<Vec<(SignClass, Patch)>, PerceptError> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("ppm") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let Some((name, index)) = stem.rsplit_once('_') else {
            return Err(io_err(&path, "expected <class>_<index>.ppm"));
        };
        let class: SignClass = name.parse().map_err(|_| io_err(&path, format!("unknown class {name:?}")))?;
        if !class.is_placeable() {
            return Err(io_err(&path, "class none is not a sign"));
        }
        let index: usize = index.parse().map_err(|_| io_err(&path, "index is not a number"))?;
        found.push((class.index().unwrap_or(usize::MAX), index, class, path));
    }
    found.sort_by_key(|f| (f.0, f.1));
    found
        .into_iter()
        .map(|(_, _, class, path)| Ok((class, read_patch(&path)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dataset(&SignClass::PLACEABLE, 3, 9, &Jitter::default());
        let b = generate_dataset(&SignClass::PLACEABLE, 3, 9, &Jitter::default());
        assert_eq!(a, b);
        assert_eq!(a.len(), 21);
        let c = generate_dataset(&SignClass::PLACEABLE, 3, 10, &Jitter::default());
        assert_ne!(a, c);
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let items = generate_dataset(&[SignClass::Stop, SignClass::Yield], 2, 1, &Jitter::default());
        save_dataset(dir.path(), &items).unwrap();
        assert!(dir.path().join("stop_1.ppm").exists());
        assert!(dir.path().join("yield_0.ppm").exists());
        let bytes = fs::read(dir.path().join("stop_0.ppm")).unwrap();
        assert!(bytes.starts_with(b"P6"));
        assert_eq!(load_dataset(dir.path()).unwrap(), items);
    }

    #[test]
    fn bad_file_name_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_ppm(&dir.path().join("banana_0.ppm"), 32, 32, &[0; 32 * 32 * 3]).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn view_window_covers_sign() {
        let cam = Camera::default();
        let (frame, bb) = sign_view(SignClass::Stop, 0.6, 0.0, 0.05, &cam);
        let rect = bb.pixel_rect(frame.width, frame.height).unwrap();
        assert!((rect.w as f64 - 0.15 * cam_focal() / 0.6).abs() <= 1.0);
    }

    fn cam_focal() -> f64 {
        super::super::focal_length(128, 1.2)
    }
}
