//! Reconstructed convolution: `N*N` independent per-offset channel maps
//! (1 -> C -> 1, affine) whose clamped responses are averaged over the window.

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagecore::Plane;
use crate::real::Real;

/// Parameters of one RC module. Arrays are laid out offset-major: entry
/// `k * C + c` belongs to offset `k = i * N + j` and hidden channel `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct RcModuleParams<T> {
    pub n: usize,
    pub channels: usize,
    /// Up-projection `W` (1 -> C).
    pub w: Vec<T>,
    pub b: Vec<T>,
    /// Down-projection `W'` (C -> 1).
    pub w_out: Vec<T>,
    /// One scalar bias per offset.
    pub b_out: Vec<T>,
}

impl<T: Real> RcModuleParams<T> {
    pub fn zeros(n: usize, channels: usize) -> Self {
        let nn = n * n;
        RcModuleParams {
            n,
            channels,
            w: vec![T::zero(); nn * channels],
            b: vec![T::zero(); nn * channels],
            w_out: vec![T::zero(); nn * channels],
            b_out: vec![T::zero(); nn],
        }
    }

    /// Random hidden projections arranged so every offset starts as the
    /// identity (`z = x`): the module begins as a box mean with outputs that
    /// span the full input range.
    pub fn init<R: Rng>(n: usize, channels: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n, channels);
        for v in &mut p.w {
            *v = T::lit(rng.gen_range(-1.0..1.0));
        }
        for v in &mut p.b {
            *v = T::lit(rng.gen_range(-0.5..0.5));
        }
        for k in 0..p.offsets() {
            let span = k * channels..(k + 1) * channels;
            let norm: T = p.w[span.clone()].iter().map(|&w| w * w).sum();
            let norm = norm.max(T::lit(1e-6));
            let mut intercept = T::zero();
            for i in span {
                p.w_out[i] = p.w[i] / norm;
                intercept += p.w_out[i] * p.b[i];
            }
            p.b_out[k] = -intercept;
        }
        p
    }

    pub fn offsets(&self) -> usize {
        self.n * self.n
    }

    /// Collapses offset `k` into `z = slope * x + intercept`.
    pub fn offset_affine(&self, k: usize) -> (T, T) {
        let c = self.channels;
        let (w, b, wo) = (
            &self.w[k * c..(k + 1) * c],
            &self.b[k * c..(k + 1) * c],
            &self.w_out[k * c..(k + 1) * c],
        );
        let mut slope = T::zero();
        let mut intercept = T::zero();
        for ch in 0..c {
            slope += wo[ch] * w[ch];
            intercept += wo[ch] * b[ch];
        }
        (slope, intercept + self.b_out[k])
    }

    /// Clamped response of offset `k` to input `x`.
    pub fn offset_response(&self, k: usize, x: T) -> T {
        let (a, c) = self.offset_affine(k);
        clamp01(a * x + c)
    }

    fn check_input(&self, plane: &Plane<T>) -> Result<()> {
        if plane.width < self.n || plane.height < self.n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} plane is smaller than the {}x{} RC window",
                plane.width, plane.height, self.n, self.n
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn clamp01<T: Real>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// `y[m][n] = mean_{i,j} clamp(z_ij(x[m+i][n+j]))`. The window is anchored at
/// its top-left pixel, so the output shrinks by `N - 1` per axis.
pub fn rc_forward<T: Real>(plane: &Plane<T>, params: &RcModuleParams<T>) -> Result<Plane<T>> {
    params.check_input(plane)?;
    let n = params.n;
    let (ow, oh) = (plane.width - n + 1, plane.height - n + 1);
    let affine: Vec<(T, T)> = (0..params.offsets()).map(|k| params.offset_affine(k)).collect();
    let norm = T::lit((n * n) as f64);
    let mut out = vec![T::zero(); ow * oh];
    for m in 0..oh {
        for q in 0..ow {
            let mut acc = T::zero();
            for i in 0..n {
                let row = &plane.data[(m + i) * plane.width + q..];
                for j in 0..n {
                    let (a, c) = affine[i * n + j];
                    acc += clamp01(a * row[j] + c);
                }
            }
            out[m * ow + q] = acc / norm;
        }
    }
    Ok(Plane::from_vec(ow, oh, out))
}

/// Accumulates parameter gradients into `grads` and returns the input gradient.
pub fn rc_backward_into<T: Real>(
    plane: &Plane<T>,
    params: &RcModuleParams<T>,
    upstream: &Plane<T>,
    grads: &mut RcModuleParams<T>,
) -> Result<Plane<T>> {
    params.check_input(plane)?;
    let n = params.n;
    let (ow, oh) = (plane.width - n + 1, plane.height - n + 1);
    if upstream.width != ow || upstream.height != oh {
        return Err(Error::ShapeMismatch(format!(
            "RC upstream gradient is {}x{}, forward output was {ow}x{oh}",
            upstream.width, upstream.height
        )));
    }
    if grads.n != n || grads.channels != params.channels {
        return Err(Error::ShapeMismatch("RC gradient container".into()));
    }
    let nn = n * n;
    let affine: Vec<(T, T)> = (0..nn).map(|k| params.offset_affine(k)).collect();
    let norm = T::lit(nn as f64);
    let mut d_slope = vec![T::zero(); nn];
    let mut d_intercept = vec![T::zero(); nn];
    let mut dx = Plane::zeros(plane.width, plane.height);
    for m in 0..oh {
        for q in 0..ow {
            let g = upstream.data[m * ow + q] / norm;
            if g == T::zero() {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    let idx = (m + i) * plane.width + q + j;
                    let x = plane.data[idx];
                    let (a, c) = affine[k];
                    let z = a * x + c;
                    if z > T::zero() && z < T::one() {
                        d_slope[k] += g * x;
                        d_intercept[k] += g;
                        dx.data[idx] += g * a;
                    }
                }
            }
        }
    }
    let c = params.channels;
    for k in 0..nn {
        let (ds, di) = (d_slope[k], d_intercept[k]);
        for ch in 0..c {
            let e = k * c + ch;
            grads.w[e] += ds * params.w_out[e];
            grads.b[e] += di * params.w_out[e];
            grads.w_out[e] += ds * params.w[e] + di * params.b[e];
        }
        grads.b_out[k] += di;
    }
    Ok(dx)
}

pub fn rc_backward<T: Real>(
    plane: &Plane<T>,
    params: &RcModuleParams<T>,
    upstream: &Plane<T>,
) -> Result<(Plane<T>, RcModuleParams<T>)> {
    let mut grads = RcModuleParams::zeros(params.n, params.channels);
    let dx = rc_backward_into(plane, params, upstream, &mut grads)?;
    Ok((dx, grads))
}
