//! Convolution blocks: a small per-site MLP over a 2x2 window (or a single
//! pixel), rectified hidden layers, affine head, output clamped to `[0, 1]`.

use rand::Rng;

use super::config::BlockKind;
use super::tensor::{shape3, Tensor};
use crate::error::{Error, Result};
use crate::imagecore::Plane;
use crate::real::Real;

use super::rc::clamp01;

/// Fully connected layer, `weight[i * outputs + o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// `out[p] = bias + x[p] * W` for `rows` sites. Zero inputs are skipped,
    /// which keeps rectified layers cheap.
    fn apply(&self, x: &[T], rows: usize, out: &mut [T]) {
        let (ni, no) = (self.inputs, self.outputs);
        for p in 0..rows {
            let dst = &mut out[p * no..(p + 1) * no];
            dst.copy_from_slice(&self.bias);
            for (i, &a) in x[p * ni..(p + 1) * ni].iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (d, &w) in dst.iter_mut().zip(&self.weight[i * no..(i + 1) * no]) {
                    *d += a * w;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlockParams<T> {
    pub kind: BlockKind,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub head_channels: usize,
    /// `hidden_depth + 1` layers: `inputs -> H -> ... -> H -> head`.
    pub layers: Vec<Dense<T>>,
}

impl<T: Real> ConvBlockParams<T> {
    pub fn zeros(kind: BlockKind, hidden_width: usize, hidden_depth: usize, head_channels: usize) -> Self {
        let mut widths = vec![kind.inputs()];
        widths.extend(std::iter::repeat_n(hidden_width, hidden_depth));
        widths.push(head_channels);
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        ConvBlockParams {
            kind,
            hidden_width,
            hidden_depth,
            head_channels,
            layers,
        }
    }

    /// Fan-in scaled uniform weights; the head starts at mid-gray.
    pub fn init<R: Rng>(
        kind: BlockKind,
        hidden_width: usize,
        hidden_depth: usize,
        head_channels: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(kind, hidden_width, hidden_depth, head_channels);
        let last = p.layers.len() - 1;
        for (l, layer) in p.layers.iter_mut().enumerate() {
            let fan_in = layer.inputs as f64;
            let bound = if l == last {
                0.5 / fan_in.sqrt()
            } else {
                (6.0 / fan_in).sqrt()
            };
            for w in &mut layer.weight {
                *w = T::lit(rng.gen_range(-bound..bound));
            }
            if l == last {
                layer.bias.iter_mut().for_each(|b| *b = T::lit(0.5));
            }
        }
        p
    }

    pub fn inputs(&self) -> usize {
        self.kind.inputs()
    }

    /// Evaluates `rows` independent sites; `x` is `rows x inputs`, the result
    /// is `rows x head_channels`, clamped.
    pub fn eval_sites(&self, x: &[T], rows: usize) -> Vec<T> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![T::zero(); rows * layer.outputs];
            layer.apply(&cur, rows, &mut next);
            if l < last {
                relu(&mut next);
            } else {
                next.iter_mut().for_each(|v| *v = clamp01(*v));
            }
            cur = next;
        }
        cur
    }
}

fn relu<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Gathers the block inputs of every output site; returns (rows, out_w, out_h).
fn gather<T: Real>(plane: &Plane<T>, kind: BlockKind) -> Result<(Vec<T>, usize, usize)> {
    match kind {
        BlockKind::In1Out4 => {
            if plane.is_empty() {
                return Err(Error::ShapeMismatch("empty block input".into()));
            }
            Ok((plane.data.clone(), plane.width, plane.height))
        }
        BlockKind::In4Out1 | BlockKind::In4OutHead => {
            if plane.width < 2 || plane.height < 2 {
                return Err(Error::ShapeMismatch(format!(
                    "2x2 block needs at least 2x2 input, got {}x{}",
                    plane.width, plane.height
                )));
            }
            let (ow, oh) = (plane.width - 1, plane.height - 1);
            let mut x = Vec::with_capacity(ow * oh * 4);
            for r in 0..oh {
                for c in 0..ow {
                    x.push(plane.get(r, c));
                    x.push(plane.get(r, c + 1));
                    x.push(plane.get(r + 1, c));
                    x.push(plane.get(r + 1, c + 1));
                }
            }
            Ok((x, ow, oh))
        }
    }
}

/// Block output as an `(H_out, W_out, head_channels)` tensor.
pub fn convblock_forward<T: Real>(plane: &Plane<T>, params: &ConvBlockParams<T>) -> Result<Tensor<T>> {
    let (x, ow, oh) = gather(plane, params.kind)?;
    let out = params.eval_sites(&x, ow * oh);
    Tensor::from_vec(&[oh, ow, params.head_channels], out)
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    in_width: usize,
    in_height: usize,
    rows: usize,
    /// `acts[l]` is the input of layer `l` (post-activation of layer `l - 1`).
    acts: Vec<Vec<T>>,
    /// Head output before clamping.
    head_pre: Vec<T>,
}

pub fn convblock_forward_cached<T: Real>(
    plane: &Plane<T>,
    params: &ConvBlockParams<T>,
) -> Result<(Tensor<T>, BlockCache<T>)> {
    let (x, ow, oh) = gather(plane, params.kind)?;
    let rows = ow * oh;
    let last = params.layers.len() - 1;
    let mut acts = vec![x];
    let mut head_pre = Vec::new();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut next = vec![T::zero(); rows * layer.outputs];
        layer.apply(&acts[l], rows, &mut next);
        if l < last {
            relu(&mut next);
            acts.push(next);
        } else {
            head_pre = next;
        }
    }
    let out: Vec<T> = head_pre.iter().map(|&v| clamp01(v)).collect();
    let cache = BlockCache {
        in_width: plane.width,
        in_height: plane.height,
        rows,
        acts,
        head_pre,
    };
    Ok((Tensor::from_vec(&[oh, ow, params.head_channels], out)?, cache))
}

/// Accumulates parameter gradients into `grads`; returns the input gradient.
pub fn convblock_backward_into<T: Real>(
    cache: &BlockCache<T>,
    params: &ConvBlockParams<T>,
    upstream: &Tensor<T>,
    grads: &mut ConvBlockParams<T>,
) -> Result<Plane<T>> {
    let [uh, uw, uc] = shape3(upstream)?;
    if uh * uw != cache.rows || uc != params.head_channels {
        return Err(Error::ShapeMismatch(format!(
            "block upstream {:?} does not match {} sites x {} channels",
            upstream.shape(),
            cache.rows,
            params.head_channels
        )));
    }
    if grads.layers.len() != params.layers.len() {
        return Err(Error::ShapeMismatch("block gradient container".into()));
    }
    let rows = cache.rows;
    let mut g: Vec<T> = upstream
        .data()
        .iter()
        .zip(&cache.head_pre)
        .map(|(&u, &pre)| if pre > T::zero() && pre < T::one() { u } else { T::zero() })
        .collect();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let gl = &mut grads.layers[l];
        let (ni, no) = (layer.inputs, layer.outputs);
        let a = &cache.acts[l];
        for p in 0..rows {
            let gp = &g[p * no..(p + 1) * no];
            for (b, &v) in gl.bias.iter_mut().zip(gp) {
                *b += v;
            }
            for (i, &ai) in a[p * ni..(p + 1) * ni].iter().enumerate() {
                if ai == T::zero() {
                    continue;
                }
                for (w, &v) in gl.weight[i * no..(i + 1) * no].iter_mut().zip(gp) {
                    *w += ai * v;
                }
            }
        }
        // g_in = g * W^T through a transposed copy so the inner loop is an axpy.
        let mut wt = vec![T::zero(); ni * no];
        for i in 0..ni {
            for o in 0..no {
                wt[o * ni + i] = layer.weight[i * no + o];
            }
        }
        let mut g_in = vec![T::zero(); rows * ni];
        for p in 0..rows {
            let dst = &mut g_in[p * ni..(p + 1) * ni];
            for (o, &go) in g[p * no..(p + 1) * no].iter().enumerate() {
                if go == T::zero() {
                    continue;
                }
                for (d, &w) in dst.iter_mut().zip(&wt[o * ni..(o + 1) * ni]) {
                    *d += go * w;
                }
            }
            if l > 0 {
                for (d, &ai) in dst.iter_mut().zip(&a[p * ni..(p + 1) * ni]) {
                    if ai <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
        }
        g = g_in;
    }
    // scatter site gradients back onto the input plane
    let mut dx = Plane::zeros(cache.in_width, cache.in_height);
    match params.kind {
        BlockKind::In1Out4 => dx.data.copy_from_slice(&g),
        BlockKind::In4Out1 | BlockKind::In4OutHead => {
            let ow = cache.in_width - 1;
            let w = cache.in_width;
            for p in 0..rows {
                let (r, c) = (p / ow, p % ow);
                let gp = &g[p * 4..p * 4 + 4];
                dx.data[r * w + c] += gp[0];
                dx.data[r * w + c + 1] += gp[1];
                dx.data[(r + 1) * w + c] += gp[2];
                dx.data[(r + 1) * w + c + 1] += gp[3];
            }
        }
    }
    Ok(dx)
}

pub fn convblock_backward<T: Real>(
    cache: &BlockCache<T>,
    params: &ConvBlockParams<T>,
    upstream: &Tensor<T>,
) -> Result<(Plane<T>, ConvBlockParams<T>)> {
    let mut grads = ConvBlockParams::zeros(
        params.kind,
        params.hidden_width,
        params.hidden_depth,
        params.head_channels,
    );
    let dx = convblock_backward_into(cache, params, upstream, &mut grads)?;
    Ok((dx, grads))
}
