//! Multi-branch cascaded network with rotation ensemble.
//!
//! Every branch pads its (rotated) input at the bottom/right by `window - 1`
//! with replicated edges, so its window is anchored at the top-left pixel and
//! the branch output keeps the input geometry. All `branches x rotations`
//! terms of a stage are averaged with equal weight.

use rand::Rng;

use super::config::{BlockKind, NetworkConfig};
use super::convblock::{
    convblock_backward_into, convblock_forward, convblock_forward_cached, BlockCache, ConvBlockParams,
};
use super::rc::{rc_backward_into, rc_forward, RcModuleParams};
use super::tensor::{pixel_shuffle, pixel_unshuffle, Tensor};
use crate::error::{Error, Result};
use crate::imagecore::{pad_replicate, rotate90, upscale_luma, Image, Plane};
use crate::real::{quantize_unit, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct BranchParams<T> {
    pub rc: Option<RcModuleParams<T>>,
    pub block: ConvBlockParams<T>,
}

/// Parameters of every stage and branch. The same type doubles as the
/// gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    pub stages: Vec<Vec<BranchParams<T>>>,
}

/// Shape descriptor of one named parameter array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate_executable()?;
        Ok(Self::build(cfg, |n, c| RcModuleParams::zeros(n, c), |k, h| {
            ConvBlockParams::zeros(k, cfg.hidden_width, cfg.hidden_depth, h)
        }))
    }

    pub fn init<R: Rng>(cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        cfg.validate_executable()?;
        let mut stages = Vec::new();
        for stage in &cfg.stages {
            let mut branches = Vec::new();
            for br in stage {
                let rc = br.rc.map(|n| RcModuleParams::init(n, cfg.rc_channels, rng));
                let block =
                    ConvBlockParams::init(br.block, cfg.hidden_width, cfg.hidden_depth, br.head_channels, rng);
                branches.push(BranchParams { rc, block });
            }
            stages.push(branches);
        }
        Ok(NetworkParams { stages })
    }

    fn build(
        cfg: &NetworkConfig,
        rc: impl Fn(usize, usize) -> RcModuleParams<T>,
        block: impl Fn(BlockKind, usize) -> ConvBlockParams<T>,
    ) -> Self {
        NetworkParams {
            stages: cfg
                .stages
                .iter()
                .map(|stage| {
                    stage
                        .iter()
                        .map(|br| BranchParams {
                            rc: br.rc.map(|n| rc(n, cfg.rc_channels)),
                            block: block(br.block, br.head_channels),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// A zeroed container with the same layout.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.arrays_mut().into_iter().for_each(|a| a.fill(T::zero()));
        z
    }

    /// Names and shapes of all arrays, in the order of [`Self::arrays`].
    pub fn specs(&self) -> Vec<ArraySpec> {
        let mut out = Vec::new();
        for (s, stage) in self.stages.iter().enumerate() {
            for (b, br) in stage.iter().enumerate() {
                let pre = format!("s{s}.b{b}");
                if let Some(rc) = &br.rc {
                    let nn = rc.n * rc.n;
                    for name in ["w", "b", "w_out"] {
                        out.push(ArraySpec {
                            name: format!("{pre}.rc.{name}"),
                            shape: vec![nn, rc.channels],
                        });
                    }
                    out.push(ArraySpec {
                        name: format!("{pre}.rc.b_out"),
                        shape: vec![nn],
                    });
                }
                for (l, layer) in br.block.layers.iter().enumerate() {
                    out.push(ArraySpec {
                        name: format!("{pre}.blk.l{l}.w"),
                        shape: vec![layer.inputs, layer.outputs],
                    });
                    out.push(ArraySpec {
                        name: format!("{pre}.blk.l{l}.b"),
                        shape: vec![layer.outputs],
                    });
                }
            }
        }
        out
    }

    pub fn arrays(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for br in self.stages.iter().flatten() {
            if let Some(rc) = &br.rc {
                out.extend([&rc.w[..], &rc.b[..], &rc.w_out[..], &rc.b_out[..]]);
            }
            for layer in &br.block.layers {
                out.extend([&layer.weight[..], &layer.bias[..]]);
            }
        }
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for br in self.stages.iter_mut().flatten() {
            if let Some(rc) = &mut br.rc {
                out.push(&mut rc.w[..]);
                out.push(&mut rc.b[..]);
                out.push(&mut rc.w_out[..]);
                out.push(&mut rc.b_out[..]);
            }
            for layer in &mut br.block.layers {
                out.push(&mut layer.weight[..]);
                out.push(&mut layer.bias[..]);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    /// `self += other`, array by array.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in self.arrays_mut() {
            a.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        NetworkParams {
            stages: self
                .stages
                .iter()
                .map(|stage| {
                    stage
                        .iter()
                        .map(|br| BranchParams {
                            rc: br.rc.as_ref().map(|rc| RcModuleParams {
                                n: rc.n,
                                channels: rc.channels,
                                w: conv(&rc.w),
                                b: conv(&rc.b),
                                w_out: conv(&rc.w_out),
                                b_out: conv(&rc.b_out),
                            }),
                            block: ConvBlockParams {
                                kind: br.block.kind,
                                hidden_width: br.block.hidden_width,
                                hidden_depth: br.block.hidden_depth,
                                head_channels: br.block.head_channels,
                                layers: br
                                    .block
                                    .layers
                                    .iter()
                                    .map(|l| super::convblock::Dense {
                                        inputs: l.inputs,
                                        outputs: l.outputs,
                                        weight: conv(&l.weight),
                                        bias: conv(&l.bias),
                                    })
                                    .collect(),
                            },
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Checks that the parameter layout matches `cfg`.
    pub fn check_config(&self, cfg: &NetworkConfig) -> Result<()> {
        let expect = NetworkParams::<T>::zeros(cfg)?;
        if expect.specs() != self.specs() {
            return Err(Error::ShapeMismatch(
                "parameters do not match the network config".into(),
            ));
        }
        Ok(())
    }
}

/// Simulated 8-bit quantisation, `round(v * 255) / 255` (round half up).
pub fn quantize_sim<T: Real>(plane: &Plane<T>) -> Plane<T> {
    plane.map(|v| T::lit(quantize_unit(v) as f64) / T::lit(255.0))
}

fn rotations(cfg: &NetworkConfig) -> &'static [i32] {
    if cfg.rotation_ensemble {
        &[0, 1, 2, 3]
    } else {
        &[0]
    }
}

#[derive(Debug)]
struct TermTape<T> {
    rot: i32,
    /// Rotated, padded branch input.
    padded: Plane<T>,
    block: BlockCache<T>,
}

#[derive(Debug)]
struct StageTape<T> {
    in_width: usize,
    in_height: usize,
    /// Indexed `[branch][rotation]`.
    terms: Vec<Vec<TermTape<T>>>,
}

/// Intermediate values recorded by [`network_forward_train`].
#[derive(Debug)]
pub struct NetworkTape<T> {
    stages: Vec<StageTape<T>>,
    output_pre_clamp: Plane<T>,
}

/// Output of one branch on one rotation, already rotated back.
fn branch_term<T: Real>(
    input: &Plane<T>,
    cfg: &NetworkConfig,
    stage: usize,
    branch: usize,
    params: &BranchParams<T>,
    rot: i32,
    tape: Option<&mut Vec<TermTape<T>>>,
) -> Result<Plane<T>> {
    let bcfg = &cfg.stages[stage][branch];
    let pad = bcfg.window() - 1;
    let rotated = rotate90(input, rot);
    let padded = pad_replicate(&rotated, 0, 0, pad, pad);
    let rc_out = match &params.rc {
        Some(rc) => Some(rc_forward(&padded, rc)?),
        None => None,
    };
    let block_in = rc_out.as_ref().unwrap_or(&padded);
    let tensor = match tape {
        Some(tapes) => {
            let (t, cache) = convblock_forward_cached(block_in, &params.block)?;
            tapes.push(TermTape {
                rot,
                padded: padded.clone(),
                block: cache,
            });
            t
        }
        None => convblock_forward(block_in, &params.block)?,
    };
    let out = if cfg.is_final(stage) {
        pixel_shuffle(&tensor, cfg.scale)?
    } else {
        Plane::from_vec(rotated.width, rotated.height, tensor.into_data())
    };
    Ok(rotate90(&out, -rot))
}

fn run_stage<T: Real>(
    input: &Plane<T>,
    cfg: &NetworkConfig,
    stage: usize,
    params: &[BranchParams<T>],
    mut tape: Option<&mut StageTape<T>>,
) -> Result<Plane<T>> {
    if params.len() != cfg.stages[stage].len() {
        return Err(Error::ShapeMismatch(format!(
            "stage {stage}: {} branch parameter sets for {} branches",
            params.len(),
            cfg.stages[stage].len()
        )));
    }
    let r = if cfg.is_final(stage) { cfg.scale } else { 1 };
    let mut acc = Plane::zeros(input.width * r, input.height * r);
    let mut count = 0usize;
    for (b, bp) in params.iter().enumerate() {
        let mut branch_tapes = tape.as_ref().map(|_| Vec::new());
        for &rot in rotations(cfg) {
            let term = branch_term(input, cfg, stage, b, bp, rot, branch_tapes.as_mut())?;
            if !term.same_shape(&acc) {
                return Err(Error::ShapeMismatch(format!(
                    "stage {stage} branch {b} produced {}x{}, expected {}x{}",
                    term.width, term.height, acc.width, acc.height
                )));
            }
            for (a, &v) in acc.data.iter_mut().zip(&term.data) {
                *a += v;
            }
            count += 1;
        }
        if let (Some(t), Some(bt)) = (tape.as_mut(), branch_tapes) {
            t.terms.push(bt);
        }
    }
    let norm = T::lit(count as f64);
    acc.data.iter_mut().for_each(|v| *v /= norm);
    Ok(acc)
}

/// One stage: branch/rotation average, followed by simulated quantisation
/// when the stage feeds another one.
pub fn stage_forward<T: Real>(
    plane: &Plane<T>,
    cfg: &NetworkConfig,
    stage: usize,
    params: &[BranchParams<T>],
) -> Result<Plane<T>> {
    let out = run_stage(plane, cfg, stage, params, None)?;
    Ok(if !cfg.is_final(stage) && cfg.quantize_between_stages {
        quantize_sim(&out)
    } else {
        out
    })
}

pub fn network_forward<T: Real>(
    plane: &Plane<T>,
    cfg: &NetworkConfig,
    params: &NetworkParams<T>,
) -> Result<Plane<T>> {
    check_layout(cfg, params)?;
    let mut cur = plane.clone();
    for s in 0..cfg.stages.len() {
        cur = stage_forward(&cur, cfg, s, &params.stages[s])?;
    }
    Ok(cur.map(|v| v.max(T::zero()).min(T::one())))
}

/// Float reference on an 8-bit image: luma through the network, chroma
/// bicubic.
pub fn network_upscale(image: &Image, cfg: &NetworkConfig, params: &NetworkParams<f32>) -> Result<Image> {
    upscale_luma(image, |y| Ok(network_forward(&y.to_unit::<f32>(), cfg, params)?.quantize()))
}

fn check_layout<T>(cfg: &NetworkConfig, params: &NetworkParams<T>) -> Result<()> {
    if params.stages.len() != cfg.stages.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter stages for {} config stages",
            params.stages.len(),
            cfg.stages.len()
        )));
    }
    Ok(())
}

/// Forward pass that records what [`network_backward`] needs.
pub fn network_forward_train<T: Real>(
    plane: &Plane<T>,
    cfg: &NetworkConfig,
    params: &NetworkParams<T>,
) -> Result<(Plane<T>, NetworkTape<T>)> {
    check_layout(cfg, params)?;
    let mut cur = plane.clone();
    let mut stages = Vec::with_capacity(cfg.stages.len());
    for s in 0..cfg.stages.len() {
        let mut st = StageTape {
            in_width: cur.width,
            in_height: cur.height,
            terms: Vec::new(),
        };
        let out = run_stage(&cur, cfg, s, &params.stages[s], Some(&mut st))?;
        stages.push(st);
        cur = if !cfg.is_final(s) && cfg.quantize_between_stages {
            quantize_sim(&out)
        } else {
            out
        };
    }
    let output = cur.map(|v| v.max(T::zero()).min(T::one()));
    Ok((
        output,
        NetworkTape {
            stages,
            output_pre_clamp: cur,
        },
    ))
}

/// Folds the gradient of a bottom/right replicate-padded plane back onto the
/// original `width x height` grid.
fn unpad_grad<T: Real>(g: &Plane<T>, width: usize, height: usize) -> Plane<T> {
    let mut out = Plane::zeros(width, height);
    for r in 0..g.height {
        let sr = r.min(height - 1);
        for c in 0..g.width {
            let sc = c.min(width - 1);
            out.data[sr * width + sc] += g.data[r * g.width + c];
        }
    }
    out
}

/// Accumulates parameter gradients of `sum(upstream * output)` into `grads`
/// and returns the gradient with respect to the network input. Quantisation
/// between stages is treated as identity (straight-through).
pub fn network_backward<T: Real>(
    tape: &NetworkTape<T>,
    cfg: &NetworkConfig,
    params: &NetworkParams<T>,
    upstream: &Plane<T>,
    grads: &mut NetworkParams<T>,
) -> Result<Plane<T>> {
    check_layout(cfg, params)?;
    if !upstream.same_shape(&tape.output_pre_clamp) {
        return Err(Error::ShapeMismatch("network upstream gradient".into()));
    }
    let mut g = upstream.clone();
    for (gv, &pre) in g.data.iter_mut().zip(&tape.output_pre_clamp.data) {
        if pre < T::zero() || pre > T::one() {
            *gv = T::zero();
        }
    }
    for s in (0..cfg.stages.len()).rev() {
        let st = &tape.stages[s];
        let count: usize = st.terms.iter().map(|t| t.len()).sum();
        let norm = T::lit(count as f64);
        let g_term = g.map(|v| v / norm);
        let mut g_in = Plane::zeros(st.in_width, st.in_height);
        for (b, terms) in st.terms.iter().enumerate() {
            let bp = &params.stages[s][b];
            let bg = &mut grads.stages[s][b];
            for term in terms {
                let g_out = rotate90(&g_term, term.rot);
                let (rw, rh) = (g_out.width, g_out.height);
                let g_tensor = if cfg.is_final(s) {
                    pixel_unshuffle(&g_out, cfg.scale)?
                } else {
                    Tensor::from_vec(&[rh, rw, 1], g_out.data)?
                };
                let g_block_in = convblock_backward_into(&term.block, &bp.block, &g_tensor, &mut bg.block)?;
                let g_padded = match (&bp.rc, bg.rc.as_mut()) {
                    (Some(rc), Some(rc_g)) => rc_backward_into(&term.padded, rc, &g_block_in, rc_g)?,
                    (None, None) => g_block_in,
                    _ => return Err(Error::ShapeMismatch("RC gradient container".into())),
                };
                let (ow, oh) = if cfg.is_final(s) {
                    (rw / cfg.scale, rh / cfg.scale)
                } else {
                    (rw, rh)
                };
                let g_rot_in = unpad_grad(&g_padded, ow, oh);
                let g_back = rotate90(&g_rot_in, -term.rot);
                for (a, &v) in g_in.data.iter_mut().zip(&g_back.data) {
                    *a += v;
                }
            }
        }
        g = g_in;
    }
    Ok(g)
}
