//! Y-channel PSNR/SSIM and dataset evaluation.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imagecore::{crop, load_png, Image, QuantPlane};

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 100.0;

fn cropped_luma(img: &Image, border: usize) -> Result<QuantPlane> {
    let y = img.luma_u8()?;
    if 2 * border >= y.width || 2 * border >= y.height {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} image is too small for a {border}-pixel border crop",
            y.width, y.height
        )));
    }
    Ok(crop(&y, border, border, y.height - 2 * border, y.width - 2 * border))
}

fn pair(a: &Image, b: &Image, border: usize) -> Result<(QuantPlane, QuantPlane)> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok((cropped_luma(a, border)?, cropped_luma(b, border)?))
}

/// `10 log10(255^2 / MSE)` on the 8-bit luma plane with `border` pixels shaved
/// from every side; capped at [`PSNR_CAP`].
pub fn psnr_y(a: &Image, b: &Image, border: usize) -> Result<f64> {
    let (ya, yb) = pair(a, b, border)?;
    let sse: f64 = ya
        .data
        .iter()
        .zip(&yb.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / ya.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP))
}

const WIN: usize = 11;
const SIGMA: f64 = 1.5;

fn gaussian() -> [f64; WIN] {
    let mut g = [0.0; WIN];
    let c = (WIN / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable Gaussian filter over valid positions only.
fn filter_valid(x: &[f64], w: usize, h: usize, g: &[f64; WIN]) -> Vec<f64> {
    let ow = w - WIN + 1;
    let oh = h - WIN + 1;
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..WIN).map(|k| g[k] * x[r * w + c + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WIN).map(|k| g[k] * tmp[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Single-scale SSIM (11x11 Gaussian, sigma 1.5, K1 0.01, K2 0.03, L 255)
/// averaged over valid windows of the shaved luma planes.
pub fn ssim_y(a: &Image, b: &Image, border: usize) -> Result<f64> {
    let (ya, yb) = pair(a, b, border)?;
    let (w, h) = (ya.width, ya.height);
    if w < WIN || h < WIN {
        return Err(Error::InvalidDimensions(format!(
            "SSIM needs at least {WIN}x{WIN} after cropping, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = ya.data.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = yb.data.iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let g = gaussian();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &g));
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ma, mb) = (mx[i], my[i]);
        let va = sxx[i] - ma * ma;
        let vb = syy[i] - mb * mb;
        let cov = sxy[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mx.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: Vec<ImageScore>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl EvalReport {
    pub fn from_scores(images: Vec<ImageScore>) -> Self {
        let n = images.len().max(1) as f64;
        let mean_psnr = images.iter().map(|s| s.psnr).sum::<f64>() / n;
        let mean_ssim = images.iter().map(|s| s.ssim).sum::<f64>() / n;
        EvalReport {
            images,
            mean_psnr,
            mean_ssim,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,psnr,ssim\n");
        for i in &self.images {
            s.push_str(&format!("{},{:.4},{:.6}\n", i.name, i.psnr, i.ssim));
        }
        s.push_str(&format!("mean,{:.4},{:.6}\n", self.mean_psnr, self.mean_ssim));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// PNG files of a directory, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Ground truth cropped to a multiple of `r` and its bicubic `1/r` input.
pub fn make_lr(hr: &Image, r: usize) -> Result<(Image, Image)> {
    let (w, h) = (hr.width() / r * r, hr.height() / r * r);
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} image is smaller than the scale {r}",
            hr.width(),
            hr.height()
        )));
    }
    let hr = hr.center_crop(w, h);
    let lr = hr.resize(w / r, h / r)?;
    Ok((hr, lr))
}

/// Scores `sr` on every PNG of `dir`. `sr` receives the low-resolution input
/// and the (cropped) ground truth and returns an image of the ground-truth size.
pub fn evaluate(
    dir: &Path,
    r: usize,
    border: usize,
    mut sr: impl FnMut(&Image, &Image) -> Result<Image>,
) -> Result<EvalReport> {
    let files = list_pngs(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset(dir.to_path_buf()));
    }
    let mut scores = Vec::with_capacity(files.len());
    for f in files {
        let (hr, lr) = make_lr(&load_png(&f)?, r)?;
        let out = sr(&lr, &hr)?;
        scores.push(ImageScore {
            name: f.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            psnr: psnr_y(&out, &hr, border)?,
            ssim: ssim_y(&out, &hr, border)?,
        });
    }
    Ok(EvalReport::from_scores(scores))
}
