//! LUT-aware finetuning: table entries become trainable and the engine's
//! lookup arithmetic is replayed in float so gradients reach every entry
//! through its interpolation weight.
//!
//! Entries are held in `[0, 1]` (level / 255). Indices stay integral: values
//! that the engine rounds before using them as indices (`V'` and the outputs
//! of non-final stages) are rounded here too, and the gradient passes the
//! rounding unchanged. Entries are re-quantised only when the pack is rebuilt.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::window_residual;
use super::{adam_update, sample_batch, AdamHyper, Pair, TrainConfig};
use crate::error::{Error, Result};
use crate::imagecore::{pad_replicate, rotate90, FloatPlane, Plane, QuantPlane};
use crate::lutengine::{simplex_weights, upscale_plane};
use crate::lutpack::{BlockTable, LutPack, SAMPLES};
use crate::real::quantize_unit;
use crate::refnet::{pixel_shuffle, pixel_unshuffle, Tensor};

const STRIDES: [usize; 4] = [SAMPLES * SAMPLES * SAMPLES, SAMPLES * SAMPLES, SAMPLES, 1];

#[derive(Clone, Debug)]
struct FBranch {
    n: usize,
    rc: Vec<Vec<f32>>,
    block: Vec<f32>,
    grid: bool,
    ch: usize,
    pad: usize,
}

#[derive(Clone, Debug)]
struct FPack {
    scale: usize,
    ensemble: bool,
    stages: Vec<Vec<FBranch>>,
}

impl FPack {
    fn from_pack(pack: &LutPack) -> Self {
        let unit = |v: &[u8]| v.iter().map(|&x| x as f32 / 255.0).collect::<Vec<f32>>();
        let stages = pack
            .stages
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|br| {
                        let (block, grid) = match &br.block {
                            BlockTable::Grid4(t) => (unit(&t.entries), true),
                            BlockTable::Pixel(t) => (unit(&t.entries), false),
                        };
                        FBranch {
                            n: br.rc_size(),
                            rc: br.rc.iter().map(|t| unit(&t.entries)).collect(),
                            block,
                            grid,
                            ch: br.block.out_channels(),
                            pad: br.window() - 1,
                        }
                    })
                    .collect()
            })
            .collect();
        FPack {
            scale: pack.scale,
            ensemble: pack.rotation_ensemble,
            stages,
        }
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.arrays_mut().into_iter().for_each(|a| a.fill(0.0));
        z
    }

    fn arrays(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for br in self.stages.iter().flatten() {
            out.extend(br.rc.iter().map(|t| &t[..]));
            out.push(&br.block);
        }
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        for br in self.stages.iter_mut().flatten() {
            out.extend(br.rc.iter_mut().map(|t| &mut t[..]));
            out.push(&mut br.block);
        }
        out
    }

    fn to_pack(&self, template: &LutPack) -> LutPack {
        let mut pack = template.clone();
        for (fb, br) in self.stages.iter().flatten().zip(pack.stages.iter_mut().flatten()) {
            for (src, dst) in fb.rc.iter().zip(br.rc.iter_mut()) {
                dst.entries = src.iter().map(|&v| quantize_unit(v)).collect();
            }
            let entries = match &mut br.block {
                BlockTable::Grid4(t) => &mut t.entries,
                BlockTable::Pixel(t) => &mut t.entries,
            };
            *entries = fb.block.iter().map(|&v| quantize_unit(v)).collect();
        }
        pack
    }
}

/// Interpolation taps of a one-input table at level `x`: `(index, weight)` pairs
/// with weights in sixteenths, plus the local slope per level.
#[inline]
fn taps1(table: &[f32], x: u8) -> ([(usize, f32); 2], f32) {
    if table.len() == SAMPLES {
        let (j, f) = ((x >> 4) as usize, (x & 15) as f32);
        (
            [(j, (16.0 - f) / 16.0), (j + 1, f / 16.0)],
            (table[j + 1] - table[j]) / 16.0,
        )
    } else {
        let i = x as usize;
        let next = (i + 1).min(255);
        ([(i, 1.0), (i, 0.0)], table[next] - table[i])
    }
}

/// Vertex indices and weights (fractions of 1) of a 4D lookup, plus the axis
/// order the simplex chain follows.
#[inline]
fn taps4(inputs: [u8; 4]) -> ([usize; 5], [f32; 5], [usize; 4]) {
    let mut base = 0;
    let mut fr = [0u8; 4];
    for a in 0..4 {
        base += (inputs[a] >> 4) as usize * STRIDES[a];
        fr[a] = inputs[a] & 15;
    }
    let sw = simplex_weights(fr);
    let mut idx = [0usize; 5];
    let mut w = [0f32; 5];
    let mut order = [0usize; 4];
    for k in 0..5 {
        let mask = sw.vertices[k];
        idx[k] = base + (0..4).filter(|a| mask & (1 << a) != 0).map(|a| STRIDES[a]).sum::<usize>();
        w[k] = sw.weights[k] as f32 / 16.0;
        if k > 0 {
            order[k - 1] = (sw.vertices[k] ^ sw.vertices[k - 1]).trailing_zeros() as usize;
        }
    }
    (idx, w, order)
}

struct TermTape {
    branch: usize,
    rot: i32,
    padded: QuantPlane,
    vq: QuantPlane,
}

struct StageTape {
    in_w: usize,
    in_h: usize,
    terms: Vec<TermTape>,
}

fn block_forward(fb: &FBranch, vq: &QuantPlane) -> Tensor<f32> {
    let ch = fb.ch;
    if fb.grid {
        let (ow, oh) = (vq.width - 1, vq.height - 1);
        let mut data = vec![0f32; ow * oh * ch];
        for r in 0..oh {
            for c in 0..ow {
                let (idx, w, _) = taps4([vq.get(r, c), vq.get(r, c + 1), vq.get(r + 1, c), vq.get(r + 1, c + 1)]);
                let out = &mut data[(r * ow + c) * ch..(r * ow + c + 1) * ch];
                for k in 0..5 {
                    if w[k] != 0.0 {
                        for (cc, o) in out.iter_mut().enumerate() {
                            *o += w[k] * fb.block[idx[k] * ch + cc];
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&[oh, ow, ch], data).expect("block tensor shape")
    } else {
        let mut data = Vec::with_capacity(vq.len() * ch);
        for &x in &vq.data {
            data.extend_from_slice(&fb.block[x as usize * ch..(x as usize + 1) * ch]);
        }
        Tensor::from_vec(&[vq.height, vq.width, ch], data).expect("block tensor shape")
    }
}

fn rc_forward_levels(fb: &FBranch, padded: &QuantPlane) -> QuantPlane {
    if fb.rc.is_empty() {
        return padded.clone();
    }
    let n = fb.n;
    let (ow, oh) = (padded.width - n + 1, padded.height - n + 1);
    let norm = (n * n) as f32;
    let mut out = Vec::with_capacity(ow * oh);
    for m in 0..oh {
        for q in 0..ow {
            let mut acc = 0f32;
            for i in 0..n {
                for j in 0..n {
                    let t = &fb.rc[i * n + j];
                    let (taps, _) = taps1(t, padded.get(m + i, q + j));
                    acc += taps[0].1 * t[taps[0].0] + taps[1].1 * t[taps[1].0];
                }
            }
            out.push(quantize_unit(acc / norm));
        }
    }
    Plane::from_vec(ow, oh, out)
}

fn forward(fp: &FPack, input: &QuantPlane) -> Result<(FloatPlane, Vec<StageTape>)> {
    let rots: &[i32] = if fp.ensemble { &[0, 1, 2, 3] } else { &[0] };
    let mut x = input.clone();
    let mut tapes = Vec::with_capacity(fp.stages.len());
    let last = fp.stages.len() - 1;
    let mut out = FloatPlane::zeros(0, 0);
    for (s, stage) in fp.stages.iter().enumerate() {
        let r = if s == last { fp.scale } else { 1 };
        let mut acc = FloatPlane::zeros(x.width * r, x.height * r);
        let mut terms = Vec::new();
        for (b, fb) in stage.iter().enumerate() {
            for &rot in rots {
                let rotated = rotate90(&x, rot);
                let padded = pad_replicate(&rotated, 0, 0, fb.pad, fb.pad);
                let vq = rc_forward_levels(fb, &padded);
                let t = block_forward(fb, &vq);
                let plane = if s == last {
                    pixel_shuffle(&t, r)?
                } else {
                    Plane::from_vec(rotated.width, rotated.height, t.into_data())
                };
                let back = rotate90(&plane, -rot);
                for (a, v) in acc.data.iter_mut().zip(&back.data) {
                    *a += v;
                }
                terms.push(TermTape {
                    branch: b,
                    rot,
                    padded,
                    vq,
                });
            }
        }
        let count = terms.len() as f32;
        acc.data.iter_mut().for_each(|v| *v /= count);
        tapes.push(StageTape {
            in_w: x.width,
            in_h: x.height,
            terms,
        });
        if s == last {
            out = acc;
        } else {
            x = acc.map(quantize_unit);
        }
    }
    Ok((out, tapes))
}

/// Accumulates entry gradients for `sum(upstream * output)`.
fn backward(fp: &FPack, tapes: &[StageTape], upstream: &FloatPlane, grads: &mut FPack) -> Result<()> {
    let last = fp.stages.len() - 1;
    let mut g = upstream.clone();
    for s in (0..fp.stages.len()).rev() {
        let st = &tapes[s];
        let count = st.terms.len() as f32;
        let g_term = g.map(|v| v / count);
        let mut g_in = FloatPlane::zeros(st.in_w, st.in_h);
        for term in &st.terms {
            let fb = &fp.stages[s][term.branch];
            let gb = &mut grads.stages[s][term.branch];
            let ch = fb.ch;
            let g_rot = rotate90(&g_term, term.rot);
            let g_t = if s == last {
                pixel_unshuffle(&g_rot, fp.scale)?
            } else {
                Tensor::from_vec(&[g_rot.height, g_rot.width, 1], g_rot.data)?
            };
            let gt = g_t.data();
            let vq = &term.vq;
            // Gradient with respect to the block input, per level.
            let mut g_vq = FloatPlane::zeros(vq.width, vq.height);
            if fb.grid {
                let ow = vq.width - 1;
                for r in 0..vq.height - 1 {
                    for c in 0..ow {
                        let pos = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
                        let (idx, w, order) = taps4(pos.map(|(a, b)| vq.get(a, b)));
                        let gp = &gt[(r * ow + c) * ch..(r * ow + c + 1) * ch];
                        for k in 0..5 {
                            if w[k] != 0.0 {
                                for (cc, &gv) in gp.iter().enumerate() {
                                    gb.block[idx[k] * ch + cc] += w[k] * gv;
                                }
                            }
                        }
                        for k in 0..4 {
                            let mut d = 0f32;
                            for (cc, &gv) in gp.iter().enumerate() {
                                d += gv * (fb.block[idx[k + 1] * ch + cc] - fb.block[idx[k] * ch + cc]);
                            }
                            let (pr, pc) = pos[order[k]];
                            g_vq.data[pr * vq.width + pc] += d / 16.0;
                        }
                    }
                }
            } else {
                for (p, &x) in vq.data.iter().enumerate() {
                    let (i, next) = (x as usize, (x as usize + 1).min(255));
                    let gp = &gt[p * ch..(p + 1) * ch];
                    let mut d = 0f32;
                    for (cc, &gv) in gp.iter().enumerate() {
                        gb.block[i * ch + cc] += gv;
                        d += gv * (fb.block[next * ch + cc] - fb.block[i * ch + cc]);
                    }
                    g_vq.data[p] = d;
                }
            }
            let padded = &term.padded;
            let g_padded = if fb.rc.is_empty() {
                g_vq
            } else {
                let n = fb.n;
                let scale = 255.0 / (n * n) as f32;
                let mut gx = FloatPlane::zeros(padded.width, padded.height);
                for m in 0..vq.height {
                    for q in 0..vq.width {
                        let gv = g_vq.data[m * vq.width + q] * scale;
                        if gv == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            for j in 0..n {
                                let k = i * n + j;
                                let (taps, slope) = taps1(&fb.rc[k], padded.get(m + i, q + j));
                                gb.rc[k][taps[0].0] += taps[0].1 * gv;
                                gb.rc[k][taps[1].0] += taps[1].1 * gv;
                                gx.data[(m + i) * padded.width + q + j] += slope * gv;
                            }
                        }
                    }
                }
                gx
            };
            if s > 0 {
                // Fold the padding back and undo the rotation.
                let (rw, rh) = if term.rot % 2 == 0 { (st.in_w, st.in_h) } else { (st.in_h, st.in_w) };
                let mut folded = FloatPlane::zeros(rw, rh);
                for r in 0..g_padded.height {
                    for c in 0..g_padded.width {
                        folded.data[r.min(rh - 1) * rw + c.min(rw - 1)] += g_padded.data[r * g_padded.width + c];
                    }
                }
                let back = rotate90(&folded, -term.rot);
                for (a, v) in g_in.data.iter_mut().zip(&back.data) {
                    *a += v;
                }
            }
        }
        // The next stage indexed with round(255 * v): pass straight through.
        g = g_in.map(|v| v * 255.0);
    }
    Ok(())
}

/// Mean squared error (on `[0, 1]` luma) of the integer engine over `pairs`.
pub fn pipeline_mse(pack: &LutPack, pairs: &[Pair]) -> Result<f64> {
    let mut sse = 0.0;
    let mut n = 0.0;
    for p in pairs {
        let out = upscale_plane(&p.lr.quantize(), pack)?;
        if !out.same_shape(&p.hr) {
            return Err(Error::ShapeMismatch(format!("{}: output does not match HR", p.name)));
        }
        for (&a, &b) in out.data.iter().zip(&p.hr.data) {
            let d = a as f64 / 255.0 - b as f64;
            sse += d * d;
        }
        n += out.len() as f64;
    }
    Ok(sse / n.max(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneReport {
    /// Per-step batch loss of the float pipeline.
    pub losses: Vec<f64>,
    pub validation_before: Option<f64>,
    pub validation_after: Option<f64>,
    /// False when validation got worse and the input pack was kept.
    pub accepted: bool,
}

/// Adam on the table entries for `tcfg.iterations` steps. With a validation
/// set, the finetuned pack is only returned if the integer pipeline's MSE on
/// it did not get worse.
pub fn lut_aware_finetune(
    pack: &LutPack,
    pairs: &[Pair],
    tcfg: &TrainConfig,
    validation: Option<&[Pair]>,
) -> Result<(LutPack, FinetuneReport)> {
    pack.validate()?;
    let mut report = FinetuneReport {
        losses: Vec::new(),
        validation_before: None,
        validation_after: None,
        accepted: true,
    };
    if tcfg.iterations == 0 {
        return Ok((pack.clone(), report));
    }
    tcfg.validate()?;
    let mut fp = FPack::from_pack(pack);
    let mut m = fp.zeros_like();
    let mut v = fp.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x5eed_f1e7);
    let margin: usize = pack
        .stages
        .iter()
        .map(|stage| stage.iter().map(|b| b.window()).max().unwrap_or(1) - 1)
        .sum();
    for t in 1..=tcfg.iterations {
        let batch = sample_batch(pairs, tcfg, pack.scale, margin, &mut rng)?;
        let total: f64 = batch.iter().map(|(_, hr)| hr.len() as f64).sum();
        let mut grads = fp.zeros_like();
        let mut sse = 0.0f64;
        for (lr, hr) in &batch {
            let (pred, tapes) = forward(&fp, &lr.quantize())?;
            let (e, up) = window_residual(&pred, hr, margin * pack.scale, total)?;
            sse += e;
            backward(&fp, &tapes, &up, &mut grads)?;
        }
        report.losses.push(sse / total);
        for (a, g) in grads.arrays().iter().enumerate() {
            if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    iteration: t,
                    name: format!("table {a} entry {i}"),
                });
            }
        }
        let g_arrays = grads.arrays();
        let mut m_arrays = m.arrays_mut();
        let mut v_arrays = v.arrays_mut();
        for (a, p) in fp.arrays_mut().into_iter().enumerate() {
            adam_update(p, g_arrays[a], &mut m_arrays[a][..], &mut v_arrays[a][..], t, tcfg.lr, AdamHyper::default());
            p.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        }
    }
    let tuned = fp.to_pack(pack);
    if let Some(val) = validation {
        let before = pipeline_mse(pack, val)?;
        let after = pipeline_mse(&tuned, val)?;
        report.validation_before = Some(before);
        report.validation_after = Some(after);
        if after > before {
            report.accepted = false;
            return Ok((pack.clone(), report));
        }
    }
    Ok((tuned, report))
}
