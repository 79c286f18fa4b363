//! Integer-only inference over a [`LutPack`].

mod interp;

pub use interp::{expand_rc, lut1d_eval, lut4d_eval, simplex_weights, SimplexWeights};

use crate::error::{Error, Result};
use crate::imagecore::{pad_replicate, rotate90, upscale_luma, Image, Plane, QuantPlane};
use crate::lutpack::{BlockTable, BranchTables, LutPack};
use crate::refnet::{pixel_shuffle, Tensor};

/// RC tables expanded to 256 interpolated values per offset, ready for direct indexing.
struct PreparedBranch<'a> {
    rc: Vec<[u8; 256]>,
    n: usize,
    tables: &'a BranchTables,
}

fn prepare(branch: &BranchTables) -> PreparedBranch<'_> {
    PreparedBranch {
        rc: branch.rc.iter().map(expand_rc).collect(),
        n: branch.rc_size(),
        tables: branch,
    }
}

/// `V'` plane: mean of the per-offset table values over each `N x N` window.
fn rc_plane(padded: &QuantPlane, rc: &[[u8; 256]], n: usize) -> QuantPlane {
    if rc.is_empty() {
        return padded.clone();
    }
    let (ow, oh) = (padded.width - n + 1, padded.height - n + 1);
    let nn = (n * n) as u32;
    let mut out = Vec::with_capacity(ow * oh);
    for m in 0..oh {
        for q in 0..ow {
            let mut acc = 0u32;
            for i in 0..n {
                let row = &padded.data[(m + i) * padded.width + q..];
                for j in 0..n {
                    acc += rc[i * n + j][row[j] as usize] as u32;
                }
            }
            out.push(((acc + nn / 2) / nn) as u8);
        }
    }
    Plane::from_vec(ow, oh, out)
}

/// Block lookup over `V'`, as an `(H, W, channels)` tensor.
fn block_tensor(v: &QuantPlane, block: &BlockTable) -> Result<Tensor<u8>> {
    match block {
        BlockTable::Pixel(t) => {
            let ch = t.out_channels;
            let mut data = Vec::with_capacity(v.len() * ch);
            for &x in &v.data {
                data.extend_from_slice(&t.entries[x as usize * ch..(x as usize + 1) * ch]);
            }
            Tensor::from_vec(&[v.height, v.width, ch], data)
        }
        BlockTable::Grid4(t) => {
            let ch = t.out_channels;
            let (ow, oh) = (v.width - 1, v.height - 1);
            let mut data = vec![0u8; ow * oh * ch];
            for r in 0..oh {
                for c in 0..ow {
                    let i = [v.get(r, c), v.get(r, c + 1), v.get(r + 1, c), v.get(r + 1, c + 1)];
                    let at = (r * ow + c) * ch;
                    lut4d_eval(i, t, &mut data[at..at + ch]);
                }
            }
            Tensor::from_vec(&[oh, ow, ch], data)
        }
    }
}

fn branch_term(input: &QuantPlane, br: &PreparedBranch<'_>, scale: Option<usize>, rot: i32) -> Result<QuantPlane> {
    let rotated = rotate90(input, rot);
    let pad = br.tables.window() - 1;
    let padded = pad_replicate(&rotated, 0, 0, pad, pad);
    let v = rc_plane(&padded, &br.rc, br.n);
    let t = block_tensor(&v, &br.tables.block)?;
    let out = match scale {
        Some(r) => pixel_shuffle(&t, r)?,
        None => Plane::from_vec(rotated.width, rotated.height, t.into_data()),
    };
    Ok(rotate90(&out, -rot))
}

#[cfg(feature = "parallel")]
fn run_terms(jobs: &[(usize, i32)], f: impl Fn(usize, i32) -> Result<QuantPlane> + Sync) -> Result<Vec<QuantPlane>> {
    use rayon::prelude::*;
    jobs.par_iter().map(|&(b, rot)| f(b, rot)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_terms(jobs: &[(usize, i32)], f: impl Fn(usize, i32) -> Result<QuantPlane>) -> Result<Vec<QuantPlane>> {
    jobs.iter().map(|&(b, rot)| f(b, rot)).collect()
}

/// One stage in the byte domain. Every (branch, rotation) term is summed in
/// `u32` and divided once by the term count, rounding half up.
pub fn engine_stage(plane: &QuantPlane, pack: &LutPack, stage: usize) -> Result<QuantPlane> {
    let tables = pack
        .stages
        .get(stage)
        .ok_or_else(|| Error::TopologyMismatch(format!("pack has no stage {stage}")))?;
    if plane.is_empty() {
        return Err(Error::EmptyImage);
    }
    let scale = (stage + 1 == pack.stages.len()).then_some(pack.scale);
    let prepared: Vec<_> = tables.iter().map(prepare).collect();
    let rots: &[i32] = if pack.rotation_ensemble { &[0, 1, 2, 3] } else { &[0] };
    let jobs: Vec<(usize, i32)> = (0..prepared.len())
        .flat_map(|b| rots.iter().map(move |&r| (b, r)))
        .collect();
    let terms = run_terms(&jobs, |b, rot| branch_term(plane, &prepared[b], scale, rot))?;
    let r = scale.unwrap_or(1);
    let mut acc = vec![0u32; plane.len() * r * r];
    for t in &terms {
        for (a, &v) in acc.iter_mut().zip(&t.data) {
            *a += v as u32;
        }
    }
    let count = terms.len() as u32;
    Ok(Plane::from_vec(
        plane.width * r,
        plane.height * r,
        acc.into_iter().map(|s| ((s + count / 2) / count) as u8).collect(),
    ))
}

/// Runs every stage on one byte plane.
pub fn upscale_plane(plane: &QuantPlane, pack: &LutPack) -> Result<QuantPlane> {
    pack.validate()?;
    let mut cur = plane.clone();
    for s in 0..pack.stages.len() {
        cur = engine_stage(&cur, pack, s)?;
    }
    Ok(cur)
}

/// Gray input runs the luma pipeline only; RGB goes through YCbCr with
/// bicubic chroma.
pub fn upscale(image: &Image, pack: &LutPack) -> Result<Image> {
    pack.validate()?;
    upscale_luma(image, |y| upscale_plane(y, pack))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ColorSpace;
    use crate::lutpack::{Lut1D, Lut4D, LutPixel, GRID4};

    fn constant_pack(k: u8, scale: usize) -> LutPack {
        let rc = |n: usize| {
            (0..n * n)
                .map(|o| Lut1D {
                    offset_index: o,
                    entries: vec![k; 17],
                })
                .collect()
        };
        LutPack {
            scale,
            rotation_ensemble: true,
            stages: vec![
                vec![
                    BranchTables {
                        rc: rc(3),
                        block: BlockTable::Grid4(Lut4D {
                            out_channels: 1,
                            entries: vec![k; GRID4],
                        }),
                    },
                    BranchTables {
                        rc: vec![],
                        block: BlockTable::Pixel(LutPixel {
                            out_channels: 1,
                            entries: vec![k; 256],
                        }),
                    },
                ],
                vec![BranchTables {
                    rc: rc(5),
                    block: BlockTable::Grid4(Lut4D {
                        out_channels: scale * scale,
                        entries: vec![k; GRID4 * scale * scale],
                    }),
                }],
            ],
        }
    }

    fn ramp(w: usize, h: usize) -> QuantPlane {
        Plane::from_vec(w, h, (0..w * h).map(|i| (i * 37 % 256) as u8).collect())
    }

    #[test]
    fn constant_tables_give_constant_output() {
        let pack = constant_pack(93, 4);
        let out = upscale_plane(&ramp(8, 8), &pack).unwrap();
        assert_eq!((out.width, out.height), (32, 32));
        assert!(out.data.iter().all(|&v| v == 93));
    }

    #[test]
    fn rgb_shape_law() {
        let pack = constant_pack(10, 2);
        let img = Image::rgb(5, 3, (0..45).map(|i| (i * 5) as u8).collect()).unwrap();
        let out = upscale(&img, &pack).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (10, 6, 3));
        let ycc = Image::from_planes(&[ramp(2, 2), ramp(2, 2), ramp(2, 2)], ColorSpace::YCbCr).unwrap();
        assert!(upscale(&ycc, &pack).is_err());
    }

    #[test]
    fn missing_stage_is_topology_error() {
        let pack = constant_pack(1, 2);
        assert!(matches!(
            engine_stage(&ramp(4, 4), &pack, 5),
            Err(Error::TopologyMismatch(_))
        ));
    }
}
