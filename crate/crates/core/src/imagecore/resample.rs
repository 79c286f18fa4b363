//! Separable cubic convolution (Keys, a = -0.5) with half-pixel centres.
//!
//! Downscaling widens the kernel by the inverse scale and renormalises the
//! taps, the same antialiasing convention as MATLAB's `imresize`. Borders
//! replicate the edge sample.

use super::{FloatPlane, Plane, QuantPlane};
use crate::error::{Error, Result};

const KEYS_A: f64 = -0.5;

/// The Keys cubic convolution kernel.
pub fn keys_cubic(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (KEYS_A + 2.0) * t * t * t - (KEYS_A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        KEYS_A * t * t * t - 5.0 * KEYS_A * t * t + 8.0 * KEYS_A * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Taps for one output coordinate: (first source index per tap, weight).
struct Contrib {
    taps: Vec<(usize, f64)>,
}

fn contributions(in_len: usize, out_len: usize) -> Vec<Contrib> {
    let scale = out_len as f64 / in_len as f64;
    // kernel stretch for downscaling
    let stretch = if scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    (0..out_len)
        .map(|i| {
            let x = (i as f64 + 0.5) / scale - 0.5;
            let lo = (x - support).floor() as i64;
            let hi = (x + support).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            for j in lo..=hi {
                let w = keys_cubic((x - j as f64) * stretch);
                if w == 0.0 {
                    continue;
                }
                let idx = j.clamp(0, in_len as i64 - 1) as usize;
                taps.push((idx, w));
            }
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= sum;
            }
            Contrib { taps }
        })
        .collect()
}

fn resize_f64(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let cols = contributions(w, out_w);
    let rows = contributions(h, out_h);
    // horizontal pass
    let mut tmp = vec![0.0; out_w * h];
    for r in 0..h {
        let line = &src[r * w..(r + 1) * w];
        for (c, contrib) in cols.iter().enumerate() {
            tmp[r * out_w + c] = contrib.taps.iter().map(|&(j, wt)| wt * line[j]).sum();
        }
    }
    // vertical pass
    let mut out = vec![0.0; out_w * out_h];
    for (r, contrib) in rows.iter().enumerate() {
        let dst = &mut out[r * out_w..(r + 1) * out_w];
        for &(j, wt) in &contrib.taps {
            let line = &tmp[j * out_w..(j + 1) * out_w];
            for (d, &s) in dst.iter_mut().zip(line) {
                *d += wt * s;
            }
        }
    }
    out
}

fn check_dims(w: usize, h: usize, out_w: usize, out_h: usize) -> Result<()> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "resize target {out_w}x{out_h} is empty"
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    Ok(())
}

/// Bicubic resize of a `[0, 1]` plane; the result is clamped to `[0, 1]`.
pub fn bicubic_resize(plane: &FloatPlane, out_w: usize, out_h: usize) -> Result<FloatPlane> {
    check_dims(plane.width, plane.height, out_w, out_h)?;
    let src: Vec<f64> = plane.data.iter().map(|&v| v as f64).collect();
    let out = resize_f64(&src, plane.width, plane.height, out_w, out_h);
    Ok(Plane::from_vec(
        out_w,
        out_h,
        out.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    ))
}

/// Bicubic resize directly on byte samples.
///
/// Sums run in `f64` on integer-valued samples, so for power-of-two upscaling
/// every intermediate is exact and the result does not depend on summation
/// order (in particular it commutes bit-exactly with rotations).
pub fn bicubic_resize_u8(plane: &QuantPlane, out_w: usize, out_h: usize) -> Result<QuantPlane> {
    check_dims(plane.width, plane.height, out_w, out_h)?;
    let src: Vec<f64> = plane.data.iter().map(|&v| v as f64).collect();
    let out = resize_f64(&src, plane.width, plane.height, out_w, out_h);
    Ok(Plane::from_vec(
        out_w,
        out_h,
        out.into_iter()
            .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::rotate90;

    #[test]
    fn constant_is_preserved() {
        let p = FloatPlane::filled(7, 5, 0.5);
        for (w, h) in [(14, 10), (3, 2), (28, 20), (1, 1), (9, 4)] {
            let out = bicubic_resize(&p, w, h).unwrap();
            assert!(out.data.iter().all(|&v| (v - 0.5).abs() < 1e-6), "{w}x{h}");
        }
    }

    #[test]
    fn identity_size() {
        let data: Vec<f32> = (0..30).map(|i| ((i * 37) % 29) as f32 / 29.0).collect();
        let p = Plane::from_vec(6, 5, data);
        let out = bicubic_resize(&p, 6, 5).unwrap();
        assert!(out.max_abs_diff(&p) < 1e-6);
    }

    #[test]
    fn zero_target_rejected() {
        let p = FloatPlane::filled(4, 4, 0.0);
        assert!(bicubic_resize(&p, 0, 4).is_err());
    }

    /// Direct 2D kernel sum at every output pixel, no separability.
    fn direct_oracle(p: &FloatPlane, out_w: usize, out_h: usize) -> Vec<f64> {
        let sx = out_w as f64 / p.width as f64;
        let sy = out_h as f64 / p.height as f64;
        let (kx, ky) = (sx.min(1.0), sy.min(1.0));
        let mut out = Vec::new();
        for r in 0..out_h {
            for c in 0..out_w {
                let y = (r as f64 + 0.5) / sy - 0.5;
                let x = (c as f64 + 0.5) / sx - 0.5;
                let (mut acc, mut wsum_y, mut wsum_x) = (0.0, 0.0, 0.0);
                for j in -20i64..(p.width as i64 + 20) {
                    wsum_x += keys_cubic((x - j as f64) * kx);
                }
                for i in -20i64..(p.height as i64 + 20) {
                    let wy = keys_cubic((y - i as f64) * ky);
                    wsum_y += wy;
                    for j in -20i64..(p.width as i64 + 20) {
                        let wx = keys_cubic((x - j as f64) * kx);
                        let ii = i.clamp(0, p.height as i64 - 1) as usize;
                        let jj = j.clamp(0, p.width as i64 - 1) as usize;
                        acc += wy * wx * p.get(ii, jj) as f64;
                    }
                }
                out.push((acc / (wsum_x * wsum_y)).clamp(0.0, 1.0));
            }
        }
        out
    }

    #[test]
    fn ramp_downscale_matches_direct_sum() {
        let data: Vec<f32> = (0..64).map(|i| ((i % 8) + (i / 8)) as f32 / 14.0).collect();
        let p = Plane::from_vec(8, 8, data);
        let got = bicubic_resize(&p, 4, 4).unwrap();
        let want = direct_oracle(&p, 4, 4);
        for (g, w) in got.data.iter().zip(&want) {
            assert!((*g as f64 - w).abs() < 1e-6, "{g} vs {w}");
        }
        let up = bicubic_resize(&p, 16, 12).unwrap();
        let want = direct_oracle(&p, 16, 12);
        for (g, w) in up.data.iter().zip(&want) {
            assert!((*g as f64 - w).abs() < 1e-6);
        }
    }

    #[test]
    fn byte_upscale_commutes_with_rotation() {
        let data: Vec<u8> = (0..35u32).map(|i| ((i * 97 + 13) % 256) as u8).collect();
        let p = Plane::from_vec(7, 5, data);
        let up = bicubic_resize_u8(&p, 28, 20).unwrap();
        for k in 1..4 {
            let r = rotate90(&p, k);
            let up_r = bicubic_resize_u8(&r, r.width * 4, r.height * 4).unwrap();
            assert_eq!(up_r, rotate90(&up, k));
        }
    }
}
