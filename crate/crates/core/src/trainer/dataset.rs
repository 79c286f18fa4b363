//! HR/LR pair preparation with an on-disk cache, and patch sampling.

use std::path::{Path, PathBuf};

use rand::Rng;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::imagecore::{bicubic_resize_u8, center_crop, crop, decode_png, dihedral, FloatPlane, Plane, QuantPlane};
use crate::metrics::list_pngs;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub hr_dir: PathBuf,
    pub scale: usize,
    /// Where derived LR planes are cached; `None` disables the cache.
    pub cache_dir: Option<PathBuf>,
}

/// Luma planes in `[0, 1]`; `hr` is exactly `scale` times `lr` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub name: String,
    pub lr: FloatPlane,
    pub hr: FloatPlane,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepareStats {
    pub loaded: usize,
    /// Pairs computed by resampling (cache misses).
    pub resampled: usize,
    pub cache_hits: usize,
    /// Files that could not be used, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

const CACHE_MAGIC: &[u8; 4] = b"RCPR";

fn encode_cache(hr: &QuantPlane, lr: &QuantPlane) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + hr.len() + lr.len());
    out.extend_from_slice(CACHE_MAGIC);
    for d in [hr.width, hr.height, lr.width, lr.height] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&hr.data);
    out.extend_from_slice(&lr.data);
    out
}

fn decode_cache(bytes: &[u8]) -> Option<(QuantPlane, QuantPlane)> {
    if bytes.len() < 20 || &bytes[..4] != CACHE_MAGIC {
        return None;
    }
    let d: Vec<usize> = bytes[4..20]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let (hn, ln) = (d[0] * d[1], d[2] * d[3]);
    if bytes.len() != 20 + hn + ln {
        return None;
    }
    Some((
        Plane::from_vec(d[0], d[1], bytes[20..20 + hn].to_vec()),
        Plane::from_vec(d[2], d[3], bytes[20 + hn..].to_vec()),
    ))
}

fn derive_pair(bytes: &[u8], r: usize) -> Result<(QuantPlane, QuantPlane)> {
    let y = decode_png(bytes)?.luma_u8()?;
    let (w, h) = (y.width / r * r, y.height / r * r);
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} is smaller than the scale {r}",
            y.width, y.height
        )));
    }
    let hr = center_crop(&y, h, w);
    let lr = bicubic_resize_u8(&hr, w / r, h / r)?;
    Ok((hr, lr))
}

/// Loads every PNG of `spec.hr_dir` as a luma pair: HR center-cropped to a
/// multiple of the scale, LR by bicubic downscaling. Undecodable files are
/// skipped and reported in the stats.
pub fn prepare_pairs(spec: &DatasetSpec) -> Result<(Vec<Pair>, PrepareStats)> {
    if spec.scale == 0 {
        return Err(Error::InvalidConfig("scale must be positive".into()));
    }
    let files = list_pngs(&spec.hr_dir)?;
    if let Some(dir) = &spec.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut stats = PrepareStats::default();
    let mut pairs = Vec::new();
    for path in files {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let cache_path = spec
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{stem}-{:08x}-x{}.pair", crc32fast::hash(&bytes), spec.scale)));
        let cached = cache_path
            .as_ref()
            .and_then(|p| std::fs::read(p).ok())
            .and_then(|b| decode_cache(&b));
        let (hr, lr) = match cached {
            Some(p) => {
                stats.cache_hits += 1;
                p
            }
            None => match derive_pair(&bytes, spec.scale) {
                Ok((hr, lr)) => {
                    stats.resampled += 1;
                    if let Some(cp) = &cache_path {
                        std::fs::write(cp, encode_cache(&hr, &lr)).map_err(|e| Error::io(cp, e))?;
                    }
                    (hr, lr)
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    stats.skipped.push((path.clone(), e.to_string()));
                    continue;
                }
            },
        };
        stats.loaded += 1;
        pairs.push(Pair {
            name: stem,
            lr: lr.to_unit(),
            hr: hr.to_unit(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(spec.hr_dir.clone()));
    }
    Ok((pairs, stats))
}

/// Draws `batch_size` aligned crops. Each sample picks a pair, an LR window
/// and (with augmentation) one of the eight dihedral transforms, applied to
/// both crops. The LR crop carries `margin` extra pixels of context on every
/// side; the HR crop covers only the central `lr_patch` cells.
pub fn sample_batch<R: Rng>(
    pairs: &[Pair],
    tcfg: &TrainConfig,
    scale: usize,
    margin: usize,
    rng: &mut R,
) -> Result<Vec<(FloatPlane, FloatPlane)>> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(PathBuf::new()));
    }
    let p = tcfg.lr_patch;
    let full = p + 2 * margin;
    if let Some(small) = pairs.iter().find(|x| x.lr.width < full || x.lr.height < full) {
        return Err(Error::InvalidDimensions(format!(
            "{}: LR {}x{} is smaller than the {full}x{full} patch",
            small.name, small.lr.width, small.lr.height
        )));
    }
    let mut out = Vec::with_capacity(tcfg.batch_size);
    for _ in 0..tcfg.batch_size {
        let pair = &pairs[rng.gen_range(0..pairs.len())];
        let top = rng.gen_range(0..=pair.lr.height - full);
        let left = rng.gen_range(0..=pair.lr.width - full);
        let lr = crop(&pair.lr, top, left, full, full);
        let hr = crop(&pair.hr, (top + margin) * scale, (left + margin) * scale, p * scale, p * scale);
        let d = if tcfg.augment { rng.gen_range(0..8u8) } else { 0 };
        out.push((dihedral(&lr, d), dihedral(&hr, d)));
    }
    Ok(out)
}

/// Helper for tests and tools: dataset spec without a cache.
impl DatasetSpec {
    pub fn new(hr_dir: impl AsRef<Path>, scale: usize) -> Self {
        DatasetSpec {
            hr_dir: hr_dir.as_ref().to_path_buf(),
            scale,
            cache_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{save_png, Image};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn write_gray(dir: &Path, name: &str, w: usize, h: usize, f: impl Fn(usize, usize) -> u8) {
        let data = (0..w * h).map(|i| f(i % w, i / w)).collect();
        save_png(&Image::gray(w, h, data).unwrap(), dir.join(name)).unwrap();
    }

    #[test]
    fn shapes_and_constant_images() {
        let dir = tempfile::tempdir().unwrap();
        write_gray(dir.path(), "a.png", 100, 100, |x, y| (x + y) as u8);
        write_gray(dir.path(), "b.png", 50, 41, |_, _| 77);
        std::fs::write(dir.path().join("c.png"), b"not a png").unwrap();
        let (pairs, stats) = prepare_pairs(&DatasetSpec::new(dir.path(), 4)).unwrap();
        assert_eq!(stats.loaded, 2);
        assert_eq!(stats.skipped.len(), 1);
        assert_eq!((pairs[0].hr.width, pairs[0].hr.height), (100, 100));
        assert_eq!((pairs[0].lr.width, pairs[0].lr.height), (25, 25));
        assert_eq!((pairs[1].hr.width, pairs[1].hr.height), (48, 40));
        let gray = 77.0 / 255.0;
        assert!(pairs[1].lr.data.iter().all(|&v| (v - gray).abs() < 1e-7));
    }

    #[test]
    fn warm_cache_skips_resampling() {
        let dir = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        write_gray(dir.path(), "a.png", 40, 36, |x, y| (x * 5 ^ y * 3) as u8);
        let spec = DatasetSpec {
            cache_dir: Some(cache.path().to_path_buf()),
            ..DatasetSpec::new(dir.path(), 4)
        };
        let (cold, s1) = prepare_pairs(&spec).unwrap();
        let (warm, s2) = prepare_pairs(&spec).unwrap();
        assert_eq!((s1.resampled, s1.cache_hits), (1, 0));
        assert_eq!((s2.resampled, s2.cache_hits), (0, 1));
        assert_eq!(cold, warm);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            prepare_pairs(&DatasetSpec::new(dir.path(), 4)),
            Err(Error::EmptyDataset(_))
        ));
    }

    fn ramp_pair(p: usize, r: usize) -> Pair {
        let hr = Plane::from_vec(
            p * r,
            p * r,
            (0..p * r * p * r).map(|i| ((i % (p * r)) as f32) / (p * r) as f32).collect(),
        );
        let lr = crate::imagecore::bicubic_resize(&hr, p, p).unwrap();
        Pair {
            name: "ramp".into(),
            lr,
            hr,
        }
    }

    #[test]
    fn batches_are_reproducible_and_aligned() {
        let pairs = vec![ramp_pair(20, 4)];
        let tcfg = TrainConfig {
            batch_size: 6,
            lr_patch: 8,
            ..TrainConfig::default()
        };
        let a = sample_batch(&pairs, &tcfg, 4, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_batch(&pairs, &tcfg, 4, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        for (lr, hr) in &a {
            assert_eq!((lr.width, hr.width), (8, 32));
            // Interior pixels of the downscaled HR crop match the LR crop.
            let down = crate::imagecore::bicubic_resize(hr, 8, 8).unwrap();
            for r in 2..6 {
                for c in 2..6 {
                    assert!((down.get(r, c) - lr.get(r, c)).abs() < 0.02);
                }
            }
        }
    }

    #[test]
    fn exact_patch_without_augmentation_is_whole_image() {
        let pairs = vec![ramp_pair(6, 2)];
        let tcfg = TrainConfig {
            batch_size: 2,
            lr_patch: 6,
            augment: false,
            ..TrainConfig::default()
        };
        let batch = sample_batch(&pairs, &tcfg, 2, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(batch[0].0, pairs[0].lr);
        assert_eq!(batch[0].1, pairs[0].hr);
        let big = TrainConfig { lr_patch: 7, ..tcfg };
        assert!(sample_batch(&pairs, &big, 2, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn margin_surrounds_the_target() {
        let pairs = vec![ramp_pair(10, 2)];
        let tcfg = TrainConfig {
            batch_size: 3,
            lr_patch: 4,
            augment: false,
            ..TrainConfig::default()
        };
        let batch = sample_batch(&pairs, &tcfg, 2, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (lr, hr) = &batch[0];
        assert_eq!((lr.width, lr.height, hr.width, hr.height), (10, 10, 8, 8));
        assert_eq!(*hr, crop(&pairs[0].hr, 6, 6, 8, 8));
        let wide = TrainConfig { lr_patch: 5, ..tcfg };
        assert!(sample_batch(&pairs, &wide, 2, 3, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }
}
