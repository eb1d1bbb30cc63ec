//! 32×32 patches and the 155-value descriptor: 4×4 cells of 8 unsigned
//! orientation bins, then a 3×3×3 color histogram.

use std::f64::consts::PI;

use super::{Frame, PerceptError, PixelRect};
use crate::world::Rgb;

pub const PATCH_SIZE: usize = 32;
pub const CELLS: usize = 4;
pub const BINS: usize = 8;
pub const GRADIENT_LEN: usize = CELLS * CELLS * BINS;
pub const COLOR_LEN: usize = 27;
pub const FEATURE_LEN: usize = GRADIENT_LEN + COLOR_LEN;
pub const MIN_BBOX: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pixels: Vec<u8>,
}

impl Patch {
    pub fn from_rgb(pixels: Vec<u8>) -> Result<Patch, PerceptError> {
        if pixels.len() != PATCH_SIZE * PATCH_SIZE * 3 {
            return Err(PerceptError::BadPatch(format!("expected {} bytes, got {}", PATCH_SIZE * PATCH_SIZE * 3, pixels.len())));
        }
        Ok(Patch { pixels })
    }

    pub fn uniform(rgb: Rgb) -> Patch {
        Patch {
            pixels: rgb.repeat(PATCH_SIZE * PATCH_SIZE),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Rgb) -> Patch {
        let mut pixels = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE * 3);
        for y in 0..PATCH_SIZE {
            for x in 0..PATCH_SIZE {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Patch { pixels }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * PATCH_SIZE + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn as_rgb(&self) -> &[u8] {
        &self.pixels
    }
}

/// Bilinear resample of `bbox` to 32×32. Sample points sit at pixel
/// centers, so a 32×32 box is copied unchanged.
pub fn cut_patch(frame: &Frame, bbox: PixelRect) -> Result<Patch, PerceptError> {
    if bbox.w < MIN_BBOX || bbox.h < MIN_BBOX || !bbox.fits_in(frame.width, frame.height) {
        return Err(PerceptError::BadBBox(bbox));
    }
    let axis = |origin: usize, len: usize, k: usize| {
        let s = (k as f64 + 0.5) * len as f64 / PATCH_SIZE as f64 - 0.5;
        let s = s.clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (origin + i0, origin + i1, s - i0 as f64)
    };
    let xs: [(usize, usize, f64); PATCH_SIZE] = std::array::from_fn(|k| axis(bbox.x, bbox.w, k));
    let ys: [(usize, usize, f64); PATCH_SIZE] = std::array::from_fn(|k| axis(bbox.y, bbox.h, k));
    let src = &frame.pixels;
    let stride = frame.width * 3;
    let mut pixels = vec![0u8; PATCH_SIZE * PATCH_SIZE * 3];
    for (row, &(y0, y1, fy)) in pixels.chunks_exact_mut(PATCH_SIZE * 3).zip(&ys) {
        let (top_row, bottom_row) = (&src[y0 * stride..(y0 + 1) * stride], &src[y1 * stride..(y1 + 1) * stride]);
        for (out, &(x0, x1, fx)) in row.chunks_exact_mut(3).zip(&xs) {
            let (a, b) = (&top_row[x0 * 3..x0 * 3 + 3], &top_row[x1 * 3..x1 * 3 + 3]);
            let (c, d) = (&bottom_row[x0 * 3..x0 * 3 + 3], &bottom_row[x1 * 3..x1 * 3 + 3]);
            for ch in 0..3 {
                let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
                let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                // v is in [0, 255]; the cast truncates, which rounds half up here.
                out[ch] = (v + 0.5) as u8;
            }
        }
    }
    Ok(Patch { pixels })
}

fn color_bin(v: u8) -> usize {
    match v {
        0..=84 => 0,
        85..=169 => 1,
        _ => 2,
    }
}

pub fn extract_features(patch: &Patch) -> Vec<f64> {
    let n = PATCH_SIZE;
    let mut gray = [0.0f64; PATCH_SIZE * PATCH_SIZE];
    for (g, p) in gray.iter_mut().zip(patch.pixels.chunks_exact(3)) {
        *g = (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0;
    }
    // Central differences inside, one-sided at the border; `step` is 1 for x, n for y.
    let diff = |i: usize, base: usize, step: usize| {
        if i == 0 {
            gray[base + step] - gray[base]
        } else if i == n - 1 {
            gray[base] - gray[base - step]
        } else {
            (gray[base + step] - gray[base - step]) / 2.0
        }
    };

    let mut out = vec![0.0; FEATURE_LEN];
    let cell_px = n / CELLS;
    let bin_width = PI / BINS as f64;
    for y in 0..n {
        for x in 0..n {
            let at = y * n + x;
            let gx = diff(x, at, 1);
            let gy = diff(y, at, n);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx);
            let theta = if theta < 0.0 { theta + PI } else { theta };
            let bin = ((theta / bin_width) as usize) % BINS;
            let cell = (y / cell_px) * CELLS + x / cell_px;
            out[cell * BINS + bin] += mag;
        }
    }
    let norm = out[..GRADIENT_LEN].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= 1e-12 {
        out[..GRADIENT_LEN].iter_mut().for_each(|v| *v /= norm);
    } else {
        out[..GRADIENT_LEN].iter_mut().for_each(|v| *v = 0.0);
    }

    let total = (n * n) as f64;
    for p in patch.pixels.chunks_exact(3) {
        let idx = color_bin(p[0]) * 9 + color_bin(p[1]) * 3 + color_bin(p[2]);
        out[GRADIENT_LEN + idx] += 1.0;
    }
    out[GRADIENT_LEN..].iter_mut().for_each(|v| *v /= total);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_from(w: usize, h: usize, f: impl Fn(usize, usize) -> Rgb) -> Frame {
        let mut fr = Frame::filled(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                fr.set_pixel(x, y, f(x, y));
            }
        }
        fr
    }

    #[test]
    fn identity_cut() {
        let fr = frame_from(64, 48, |x, y| [(x * 3) as u8, (y * 5) as u8, ((x + y) % 256) as u8]);
        let p = cut_patch(&fr, PixelRect::new(10, 7, 32, 32)).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(p.pixel(x, y), fr.pixel(10 + x, 7 + y));
            }
        }
    }

    #[test]
    fn uniform_cut_any_size() {
        let fr = Frame::filled(128, 96, [12, 200, 99]);
        for (w, h) in [(4, 4), (17, 9), (100, 90)] {
            assert_eq!(cut_patch(&fr, PixelRect::new(3, 2, w, h)).unwrap(), Patch::uniform([12, 200, 99]));
        }
    }

    #[test]
    fn checkerboard_downsample() {
        let fr = frame_from(64, 64, |x, y| if (x / 2 + y / 2) % 2 == 0 { [255; 3] } else { [0; 3] });
        let p = cut_patch(&fr, PixelRect::new(0, 0, 64, 64)).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let want = if (x + y) % 2 == 0 { [255; 3] } else { [0; 3] };
                assert_eq!(p.pixel(x, y), want);
            }
        }
    }

    #[test]
    fn bad_bboxes() {
        let fr = Frame::filled(128, 96, [0; 3]);
        assert!(cut_patch(&fr, PixelRect::new(0, 0, 3, 10)).is_err());
        assert!(cut_patch(&fr, PixelRect::new(120, 0, 10, 10)).is_err());
        assert!(cut_patch(&fr, PixelRect::new(0, 90, 10, 10)).is_err());
    }

    #[test]
    fn uniform_features() {
        let f = extract_features(&Patch::uniform([200, 100, 10]));
        assert_eq!(f.len(), FEATURE_LEN);
        assert!(f[..GRADIENT_LEN].iter().all(|&v| v == 0.0));
        let color = &f[GRADIENT_LEN..];
        assert_eq!(color[2 * 9 + 3 + 0], 1.0);
        assert_eq!(color.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn vertical_step_edge() {
        let p = Patch::from_fn(|x, _| if x < 16 { [0; 3] } else { [255; 3] });
        let f = extract_features(&p);
        for cell in 0..16 {
            for bin in 0..BINS {
                let v = f[cell * BINS + bin];
                let col = cell % CELLS;
                if bin == 0 && (col == 1 || col == 2) {
                    assert!(v > 0.0);
                } else {
                    assert_eq!(v, 0.0, "cell {cell} bin {bin}");
                }
            }
        }
        let norm: f64 = f[..GRADIENT_LEN].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brightness_scaling_invariance() {
        let p = Patch::from_fn(|x, y| [((x * 7 + y * 3) % 128 * 2) as u8, ((x * y) % 100 * 2) as u8, 40]);
        let half = Patch::from_rgb(p.as_rgb().iter().map(|v| v / 2).collect()).unwrap();
        let a = extract_features(&p);
        let b = extract_features(&half);
        for i in 0..GRADIENT_LEN {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn orientation_bins_wrap_mod_pi() {
        // Horizontal edge: gradient along y lands in the π/2 bin.
        let p = Patch::from_fn(|_, y| if y < 16 { [0; 3] } else { [255; 3] });
        let f = extract_features(&p);
        let mass: f64 = (0..16).map(|c| f[c * BINS + 4]).sum();
        let total: f64 = f[..GRADIENT_LEN].iter().sum();
        assert!((mass - total).abs() < 1e-12);
        // Bright-to-dark flips the sign of the gradient but not the bin.
        let q = Patch::from_fn(|x, _| if x < 16 { [255; 3] } else { [0; 3] });
        let g = extract_features(&q);
        let bin0: f64 = (0..16).map(|c| g[c * BINS]).sum();
        assert!((bin0 - g[..GRADIENT_LEN].iter().sum::<f64>()).abs() < 1e-12);
    }
}
