//! Deterministic synthetic scenes (gradients, discs, bars, stripes) used as
//! training data in tests, in the demo and by `rclut synth`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imagecore::{save_png, Image};

enum Shape {
    Disc { cx: f64, cy: f64, r: f64 },
    Bar { cx: f64, cy: f64, half_w: f64, half_h: f64, cos: f64, sin: f64 },
    Stripes { period: f64, cos: f64, sin: f64 },
}

impl Shape {
    /// Coverage in `[0, 1]` with a one-pixel soft edge.
    fn coverage(&self, x: f64, y: f64) -> f64 {
        let soft = |d: f64| (0.5 - d).clamp(0.0, 1.0);
        match *self {
            Shape::Disc { cx, cy, r } => soft(((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r),
            Shape::Bar {
                cx,
                cy,
                half_w,
                half_h,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let u = (dx * cos + dy * sin).abs() - half_w;
                let v = (-dx * sin + dy * cos).abs() - half_h;
                soft(u.max(v))
            }
            Shape::Stripes { period, cos, sin } => {
                let t = (x * cos + y * sin) / period;
                0.5 + 0.5 * (std::f64::consts::TAU * t).sin()
            }
        }
    }
}

/// RGB scene of the given size; identical seeds give identical pixels.
pub fn scene(seed: u64, width: usize, height: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let color = |rng: &mut ChaCha8Rng| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
    let bg0 = color(&mut rng);
    let bg1 = color(&mut rng);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ga, gb) = (angle.cos(), angle.sin());
    let mut shapes = Vec::new();
    let count = rng.gen_range(8..16);
    for _ in 0..count {
        let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let shape = match rng.gen_range(0..3) {
            0 => Shape::Disc {
                cx: rng.gen_range(0.0..w),
                cy: rng.gen_range(0.0..h),
                r: rng.gen_range(2.0..(w.min(h) / 5.0).max(3.0)),
            },
            1 => Shape::Bar {
                cx: rng.gen_range(0.0..w),
                cy: rng.gen_range(0.0..h),
                half_w: rng.gen_range(1.0..w / 4.0 + 2.0),
                half_h: rng.gen_range(1.0..6.0),
                cos: a.cos(),
                sin: a.sin(),
            },
            // Periods stay above the x4 Nyquist limit of 8 pixels.
            _ => Shape::Stripes {
                period: rng.gen_range(10.0..28.0),
                cos: a.cos(),
                sin: a.sin(),
            },
        };
        let alpha = if matches!(shape, Shape::Stripes { .. }) {
            rng.gen_range(0.2..0.5)
        } else {
            rng.gen_range(0.6..1.0)
        };
        shapes.push((shape, color(&mut rng), alpha));
    }
    let diag = (w * w + h * h).sqrt().max(1.0);
    let mut data = Vec::with_capacity(width * height * 3);
    for py in 0..height {
        for px in 0..width {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let t = ((x * ga + y * gb) / diag + 0.5).clamp(0.0, 1.0);
            let mut rgb = [0.0; 3];
            for c in 0..3 {
                rgb[c] = bg0[c] * (1.0 - t) + bg1[c] * t;
            }
            for (shape, col, alpha) in &shapes {
                let k = alpha * shape.coverage(x, y);
                for c in 0..3 {
                    rgb[c] = rgb[c] * (1.0 - k) + col[c] * k;
                }
            }
            for v in rgb {
                data.push((v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::rgb(width, height, data).expect("scene buffer has the declared size")
}

/// Writes `count` scenes named `scene_000.png`, ... into `dir`.
pub fn write_scenes(dir: &std::path::Path, count: usize, size: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    for i in 0..count {
        let img = scene(seed.wrapping_mul(1000).wrapping_add(i as u64), size, size);
        save_png(&img, dir.join(format!("scene_{i:03}.png")))?;
    }
    Ok(())
}
