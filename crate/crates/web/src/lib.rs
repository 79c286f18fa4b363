//! Browser bindings for the LUT upscaler.
//!
//! Three operations are exposed: upscaling an RGBA canvas with a loaded pack,
//! decomposing a 4D lookup into its simplex, and the size / receptive-field
//! calculator. Each has a plain Rust function (tested natively) and a thin
//! `wasm_bindgen` wrapper.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rclut::lutengine::{simplex_weights, upscale};
use rclut::lutpack::{export, format_bytes, size_formula, topology_bytes, SizeEstimate, SizeKind};
use rclut::presets::preset;
use rclut::refnet::receptive_field;
use rclut::{Image, LutPack, NetworkParams};
use wasm_bindgen::prelude::*;

fn js(e: rclut::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rgba_to_rgb(rgba: &[u8]) -> Vec<u8> {
    rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect()
}

fn rgb_to_rgba(rgb: &[u8]) -> Vec<u8> {
    rgb.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

/// Upscales RGBA pixels; alpha is dropped and returned opaque.
pub fn upscale_rgba(width: usize, height: usize, rgba: &[u8], pack: Option<&LutPack>) -> rclut::Result<Vec<u8>> {
    if rgba.len() != width * height * 4 {
        return Err(rclut::Error::ShapeMismatch(format!(
            "{} bytes for a {width}x{height} RGBA image",
            rgba.len()
        )));
    }
    let img = Image::rgb(width, height, rgba_to_rgb(rgba))?;
    let out = match pack {
        Some(p) => upscale(&img, p)?,
        None => img.resize(width * 4, height * 4)?,
    };
    Ok(rgb_to_rgba(out.data()))
}

/// Pack exported from an untrained network of a preset. Useful to exercise
/// the engine before a trained `.rclt` file is loaded.
pub fn untrained_pack(name: &str, seed: u64) -> rclut::Result<LutPack> {
    let cfg = preset(name).ok_or_else(|| rclut::Error::InvalidConfig(format!("unknown preset {name:?}")))?;
    let params = NetworkParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    export(&cfg, &params, true)
}

/// Lines describing the simplex for four input bytes.
pub fn simplex_report(inputs: [u8; 4]) -> String {
    let fr = inputs.map(|v| v & 15);
    let base = inputs.map(|v| v >> 4);
    let sw = simplex_weights(fr);
    let mut lines = vec![
        format!("grid cell {:?}, fractions {:?} / 16", base, fr),
    ];
    for (v, w) in sw.vertices.iter().zip(sw.weights) {
        let corner: Vec<u8> = (0..4).map(|a| base[a] + ((v >> a) & 1)).collect();
        lines.push(format!("vertex {corner:?} weight {w}/16"));
    }
    lines.join("\n")
}

fn estimate_text(e: SizeEstimate) -> String {
    match e {
        SizeEstimate::Bytes(b) => format!("{} ({b} B)", format_bytes(b)),
        other => other.to_string(),
    }
}

pub fn size_report(kind: &str, n: u32, r: u32) -> rclut::Result<String> {
    let kind: SizeKind = kind.parse()?;
    Ok(estimate_text(size_formula(kind, n, r)?))
}

pub fn preset_report(name: &str) -> rclut::Result<String> {
    let cfg = preset(name).ok_or_else(|| rclut::Error::InvalidConfig(format!("unknown preset {name:?}")))?;
    let rf = receptive_field(&cfg)?;
    let bytes = topology_bytes(&cfg, true)?;
    Ok(format!("receptive field {rf}x{rf}, tables {} ({bytes} B)", format_bytes(bytes)))
}

/// Holds the pack currently used by the page.
#[wasm_bindgen]
pub struct Demo {
    pack: Option<LutPack>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo { pack: None }
    }

    /// Parses an `.rclt` file; returns a one-line summary.
    pub fn load(&mut self, bytes: &[u8]) -> Result<String, JsError> {
        let pack = LutPack::from_bytes(bytes).map_err(js)?;
        let text = format!("{} tables, {}", pack.table_count(), format_bytes(pack.total_bytes() as u128));
        self.pack = Some(pack);
        Ok(text)
    }

    pub fn load_untrained(&mut self, name: &str, seed: u64) -> Result<String, JsError> {
        let pack = untrained_pack(name, seed).map_err(js)?;
        let text = format!("untrained {name}, {}", format_bytes(pack.total_bytes() as u128));
        self.pack = Some(pack);
        Ok(text)
    }

    pub fn has_pack(&self) -> bool {
        self.pack.is_some()
    }

    /// LUT upscale, or bicubic when `bicubic` is set.
    pub fn upscale(&self, width: usize, height: usize, rgba: &[u8], bicubic: bool) -> Result<Vec<u8>, JsError> {
        let pack = if bicubic { None } else { self.pack.as_ref() };
        if !bicubic && pack.is_none() {
            return Err(JsError::new("no pack loaded"));
        }
        upscale_rgba(width, height, rgba, pack).map_err(js)
    }
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}

#[wasm_bindgen]
pub fn simplex(a: u8, b: u8, c: u8, d: u8) -> String {
    simplex_report([a, b, c, d])
}

#[wasm_bindgen]
pub fn table_size(kind: &str, n: u32, r: u32) -> Result<String, JsError> {
    size_report(kind, n, r).map_err(js)
}

#[wasm_bindgen]
pub fn preset_info(name: &str) -> Result<String, JsError> {
    preset_report(name).map_err(js)
}

#[wasm_bindgen]
pub fn preset_names() -> Vec<String> {
    rclut::presets::NAMES.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicubic_upscale_shape() {
        let rgba = vec![128u8; 3 * 2 * 4];
        let out = upscale_rgba(3, 2, &rgba, None).unwrap();
        assert_eq!(out.len(), 12 * 8 * 4);
        assert!(out.chunks(4).all(|p| p == [128, 128, 128, 255]));
    }

    #[test]
    fn lut_upscale_matches_engine() {
        let pack = untrained_pack("srlut-baseline", 1).unwrap();
        let rgba: Vec<u8> = (0..5 * 4 * 4).map(|i| (i * 37 % 256) as u8).collect();
        let out = upscale_rgba(5, 4, &rgba, Some(&pack)).unwrap();
        let direct = upscale(&Image::rgb(5, 4, rgba_to_rgb(&rgba)).unwrap(), &pack).unwrap();
        assert_eq!(out, rgb_to_rgba(direct.data()));
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(upscale_rgba(2, 2, &[0; 15], None).is_err());
    }

    #[test]
    fn simplex_weights_sum_to_sixteen() {
        let text = simplex_report([20, 200, 7, 255]);
        let total: u32 = text
            .lines()
            .skip(1)
            .map(|l| l.split("weight ").nth(1).unwrap().trim_end_matches("/16").parse::<u32>().unwrap())
            .sum();
        assert_eq!(total, 16);
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn calculator_values() {
        assert_eq!(size_report("full_1d", 3, 4).unwrap(), "36 KB (36864 B)");
        assert!(size_report("sampled", 2, 4).unwrap().starts_with("1.274 MB"));
        assert!(size_report("bogus", 2, 4).is_err());
        assert!(preset_report("srlut-baseline").unwrap().starts_with("receptive field 3x3"));
        assert!(preset_report("nope").is_err());
    }
}
