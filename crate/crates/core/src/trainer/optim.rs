//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::refnet::NetworkParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of a flat array; `t` is the 1-based step number.
pub fn adam_update<T: Real>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], t: u64, lr: f64, hp: AdamHyper) {
    let (b1, b2) = (T::lit(hp.beta1), T::lit(hp.beta2));
    let c1 = T::lit(1.0 - hp.beta1.powi(t as i32));
    let c2 = T::lit(1.0 - hp.beta2.powi(t as i32));
    let (lr, eps) = (T::lit(lr), T::lit(hp.eps));
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        param[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

/// Applies Adam to every array; `t` is the 1-based step number. Any
/// non-finite gradient aborts before anything is modified.
pub fn adam_step<T: Real>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    m: &mut NetworkParams<T>,
    v: &mut NetworkParams<T>,
    t: u64,
    lr: f64,
) -> Result<()> {
    let specs = params.specs();
    for (spec, g) in specs.iter().zip(grads.arrays()) {
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient {
                iteration: t,
                name: format!("{}[{i}]", spec.name),
            });
        }
    }
    let hp = AdamHyper::default();
    let g_arrays = grads.arrays();
    let mut m_arrays = m.arrays_mut();
    let mut v_arrays = v.arrays_mut();
    for (a, p) in params.arrays_mut().into_iter().enumerate() {
        adam_update(p, g_arrays[a], &mut m_arrays[a][..], &mut v_arrays[a][..], t, lr, hp);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_state_alone() {
        let mut p = [0.3f64, -1.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, 1e-3, AdamHyper::default());
        assert_eq!(p, [0.3, -1.0]);
        assert_eq!((m, v), ([0.0; 2], [0.0; 2]));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [2.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, 1e-4, AdamHyper::default());
        assert!((p[0] - (2.0 - 1e-4)).abs() < 1e-11);
    }

    #[test]
    fn quadratic_trace_matches_scripted_oracle() {
        // Independent scalar Adam on f(x) = x^2.
        let (lr, b1, b2, eps) = (0.05f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut trace = Vec::new();
        for t in 1..=10 {
            let g = 2.0 * x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
            trace.push(x);
        }
        let (mut p, mut mm, mut vv) = ([1.0f64], [0.0f64], [0.0f64]);
        for (t, want) in trace.iter().enumerate() {
            let g = [2.0 * p[0]];
            adam_update(&mut p, &g, &mut mm, &mut vv, t as u64 + 1, lr, AdamHyper::default());
            assert!((p[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let cfg = crate::presets::preset("srlut-baseline").unwrap();
        let mut p = NetworkParams::<f32>::zeros(&cfg).unwrap();
        let mut g = p.zeros_like();
        let (mut m, mut v) = (p.zeros_like(), p.zeros_like());
        g.stages[0][0].block.layers[1].bias[3] = f32::NAN;
        let err = adam_step(&mut p, &g, &mut m, &mut v, 7, 1e-3).unwrap_err();
        assert!(err.to_string().contains("s0.b0.blk.l1.b[3]"), "{err}");
        assert!(err.to_string().contains("iteration 7"));
    }
}
