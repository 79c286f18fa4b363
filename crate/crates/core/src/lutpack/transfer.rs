//! Sampling trained modules into tables.

use super::{BlockTable, BranchTables, Lut1D, Lut4D, LutPack, LutPixel, FULL, SAMPLES};
use crate::error::{Error, Result};
use crate::real::{quantize_unit, Real};
use crate::refnet::{BlockKind, ConvBlockParams, NetworkConfig, NetworkParams, RcModuleParams};

/// Input levels `min(j * 2^bits, 255)` for `j = 0 ..= 256 >> bits`.
pub fn sample_points(interval_bits: u32) -> Result<Vec<u8>> {
    if interval_bits != 4 {
        return Err(Error::UnsupportedInterval(interval_bits));
    }
    Ok((0..SAMPLES).map(|j| (j * 16).min(255) as u8).collect())
}

#[inline]
fn unit<T: Real>(level: u8) -> T {
    T::lit(level as f64 / 255.0)
}

/// One table per offset. `sampled` picks 17 entries (interval 16) instead of 256.
pub fn transfer_rc<T: Real>(params: &RcModuleParams<T>, sampled: bool) -> Vec<Lut1D> {
    let levels: Vec<u8> = if sampled {
        sample_points(4).expect("interval 4 is supported")
    } else {
        (0..=255).collect()
    };
    (0..params.offsets())
        .map(|k| Lut1D {
            offset_index: k,
            entries: levels
                .iter()
                .map(|&v| quantize_unit(params.offset_response(k, unit::<T>(v))))
                .collect(),
        })
        .collect()
}

/// Evaluates a four-input block on the full `17^4` lattice.
pub fn transfer_block4<T: Real>(params: &ConvBlockParams<T>) -> Result<Lut4D> {
    if params.kind.inputs() != 4 {
        return Err(Error::ShapeMismatch("4D transfer needs a four-input block".into()));
    }
    let pts: Vec<T> = sample_points(4)?.into_iter().map(unit).collect();
    let heads = params.head_channels;
    let mut entries = Vec::with_capacity(super::GRID4 * heads);
    // One row of the lattice (fixed i0, i1, i2) per batch.
    let mut x = Vec::with_capacity(SAMPLES * 4);
    for &a in &pts {
        for &b in &pts {
            for &c in &pts {
                x.clear();
                for &d in &pts {
                    x.extend_from_slice(&[a, b, c, d]);
                }
                entries.extend(params.eval_sites(&x, SAMPLES).into_iter().map(quantize_unit));
            }
        }
    }
    Ok(Lut4D {
        out_channels: heads,
        entries,
    })
}

/// Evaluates a one-input block at every byte level.
pub fn transfer_block1<T: Real>(params: &ConvBlockParams<T>) -> Result<LutPixel> {
    if params.kind != BlockKind::In1Out4 {
        return Err(Error::ShapeMismatch("1-input transfer needs a one-input block".into()));
    }
    let x: Vec<T> = (0..FULL).map(|v| unit(v as u8)).collect();
    Ok(LutPixel {
        out_channels: params.head_channels,
        entries: params.eval_sites(&x, FULL).into_iter().map(quantize_unit).collect(),
    })
}

/// Caches every module of a trained network.
pub fn export<T: Real>(cfg: &NetworkConfig, params: &NetworkParams<T>, sampled_rc: bool) -> Result<LutPack> {
    cfg.validate_executable()?;
    params.check_config(cfg)?;
    let mut stages = Vec::with_capacity(cfg.stages.len());
    for (s, stage) in params.stages.iter().enumerate() {
        let mut branches = Vec::with_capacity(stage.len());
        for (b, bp) in stage.iter().enumerate() {
            let rc = bp.rc.as_ref().map(|p| transfer_rc(p, sampled_rc)).unwrap_or_default();
            let block = match cfg.stages[s][b].block {
                BlockKind::In1Out4 => BlockTable::Pixel(transfer_block1(&bp.block)?),
                _ => BlockTable::Grid4(transfer_block4(&bp.block)?),
            };
            branches.push(BranchTables { rc, block });
        }
        stages.push(branches);
    }
    let pack = LutPack {
        scale: cfg.scale,
        rotation_ensemble: cfg.rotation_ensemble,
        stages,
    };
    pack.validate()?;
    Ok(pack)
}
