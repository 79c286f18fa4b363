//! The training loop and its resumable state.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, sample_batch, Pair, TrainConfig};
use crate::error::{Error, Result};
use crate::imagecore::{FloatPlane, Plane};
use crate::refnet::{network_backward, network_forward_train, Checkpoint, NamedArray, NetworkConfig, NetworkParams};

/// `mean((pred - target)^2)` and its gradient `2 (pred - target) / count`.
pub fn mse_loss(pred: &FloatPlane, target: &FloatPlane) -> Result<(f64, FloatPlane)> {
    if !pred.same_shape(target) || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs target {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    let n = pred.len() as f64;
    let mut sse = 0.0f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data.iter().zip(&target.data) {
        let d = p as f64 - t as f64;
        sse += d * d;
        grad.push((2.0 * d / n) as f32);
    }
    Ok((sse / n, Plane::from_vec(pred.width, pred.height, grad)))
}

/// Everything needed to continue training bit-identically.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: NetworkConfig,
    pub params: NetworkParams<f32>,
    pub adam_m: NetworkParams<f32>,
    pub adam_v: NetworkParams<f32>,
    /// Completed optimisation steps.
    pub iteration: u64,
    pub seed: u64,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    /// Step index; the loss is measured before that step's update.
    pub iteration: u64,
    pub loss: f64,
    pub wall_ms: u128,
}

impl TrainState {
    /// Parameters are drawn from the same stream that later samples batches.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NetworkParams::init(&config, &mut rng)?;
        let zeros = params.zeros_like();
        Ok(TrainState {
            config,
            adam_m: zeros.clone(),
            adam_v: zeros,
            params,
            iteration: 0,
            seed,
            rng,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("iteration".into(), self.iteration.to_string());
        meta.insert("seed".into(), self.seed.to_string());
        meta.insert("rng_word_pos".into(), self.rng.get_word_pos().to_string());
        let specs = self.params.specs();
        let mut arrays = Vec::with_capacity(specs.len() * 3);
        for (prefix, p) in [("", &self.params), ("adam.m.", &self.adam_m), ("adam.v.", &self.adam_v)] {
            for (spec, data) in specs.iter().zip(p.arrays()) {
                arrays.push(NamedArray {
                    name: format!("{prefix}{}", spec.name),
                    shape: spec.shape.clone(),
                    data: data.to_vec(),
                });
            }
        }
        Checkpoint {
            config: self.config.clone(),
            meta,
            arrays,
        }
    }

    /// Restores a state written by [`Self::to_checkpoint`]. Checkpoints
    /// without optimiser arrays start with zero moments.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let bad = |m: String| Error::CorruptCheckpoint(m);
        let meta_u = |k: &str, default: u128| -> Result<u128> {
            match ckpt.meta.get(k) {
                Some(v) => v.parse().map_err(|_| bad(format!("meta {k} = {v:?}"))),
                None => Ok(default),
            }
        };
        let seed = meta_u("seed", 0)? as u64;
        let iteration = meta_u("iteration", 0)? as u64;
        let mut state = TrainState::new(ckpt.config.clone(), seed)?;
        state.iteration = iteration;
        if let Some(pos) = ckpt.meta.get("rng_word_pos") {
            state.rng.set_word_pos(pos.parse().map_err(|_| bad("rng_word_pos".into()))?);
        }
        let specs = state.params.specs();
        for (prefix, target, required) in [
            ("", &mut state.params, true),
            ("adam.m.", &mut state.adam_m, false),
            ("adam.v.", &mut state.adam_v, false),
        ] {
            for (spec, dst) in specs.iter().zip(target.arrays_mut()) {
                let name = format!("{prefix}{}", spec.name);
                match ckpt.array(&name) {
                    Some(a) if a.shape == spec.shape => dst.copy_from_slice(&a.data),
                    Some(a) => return Err(bad(format!("{name}: shape {:?}, expected {:?}", a.shape, spec.shape))),
                    None if required => return Err(bad(format!("missing array {name}"))),
                    None => dst.fill(0.0),
                }
            }
        }
        Ok(state)
    }
}

/// Squared error of the `target`-sized window of `pred` starting at
/// `(offset, offset)`, and `d loss / d pred` for a loss normalised by `total`
/// (zero outside the window).
pub(crate) fn window_residual(
    pred: &FloatPlane,
    target: &FloatPlane,
    offset: usize,
    total: f64,
) -> Result<(f64, FloatPlane)> {
    if pred.width != target.width + 2 * offset || pred.height != target.height + 2 * offset {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} output does not frame the {}x{} target with margin {offset}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    let mut sse = 0.0f64;
    let mut up = Plane::zeros(pred.width, pred.height);
    for r in 0..target.height {
        for c in 0..target.width {
            let d = pred.get(r + offset, c + offset) as f64 - target.get(r, c) as f64;
            sse += d * d;
            up.set(r + offset, c + offset, (2.0 * d / total) as f32);
        }
    }
    Ok((sse, up))
}

fn sample_grads(
    cfg: &NetworkConfig,
    params: &NetworkParams<f32>,
    lr: &FloatPlane,
    hr: &FloatPlane,
    total: f64,
) -> Result<(f64, NetworkParams<f32>)> {
    let (pred, tape) = network_forward_train(lr, cfg, params)?;
    let (sse, upstream) = window_residual(&pred, hr, cfg.context_margin() * cfg.scale, total)?;
    let mut grads = params.zeros_like();
    network_backward(&tape, cfg, params, &upstream, &mut grads)?;
    Ok((sse, grads))
}

#[cfg(feature = "parallel")]
fn batch_grads(
    cfg: &NetworkConfig,
    params: &NetworkParams<f32>,
    batch: &[(FloatPlane, FloatPlane)],
    total: f64,
) -> Result<Vec<(f64, NetworkParams<f32>)>> {
    use rayon::prelude::*;
    batch.par_iter().map(|(lr, hr)| sample_grads(cfg, params, lr, hr, total)).collect()
}

#[cfg(not(feature = "parallel"))]
fn batch_grads(
    cfg: &NetworkConfig,
    params: &NetworkParams<f32>,
    batch: &[(FloatPlane, FloatPlane)],
    total: f64,
) -> Result<Vec<(f64, NetworkParams<f32>)>> {
    batch.iter().map(|(lr, hr)| sample_grads(cfg, params, lr, hr, total)).collect()
}

/// One optimisation step; returns the batch loss before the update.
/// Per-sample gradients are reduced in batch order, so the result does not
/// depend on the thread count.
pub fn train_step(state: &mut TrainState, tcfg: &TrainConfig, pairs: &[Pair]) -> Result<f64> {
    let cfg = &state.config;
    let batch = sample_batch(pairs, tcfg, cfg.scale, cfg.context_margin(), &mut state.rng)?;
    let total: f64 = batch.iter().map(|(_, hr)| hr.len() as f64).sum();
    let per_sample = batch_grads(&state.config, &state.params, &batch, total)?;
    let mut grads = state.params.zeros_like();
    let mut sse = 0.0;
    for (s, g) in &per_sample {
        sse += s;
        grads.add_assign(g);
    }
    let t = state.iteration + 1;
    adam_step(&mut state.params, &grads, &mut state.adam_m, &mut state.adam_v, t, tcfg.lr)?;
    state.iteration = t;
    Ok(sse / total)
}

/// Runs until `state.iteration == tcfg.iterations`. Losses are recorded every
/// `log_every` steps and at the last step; `on_checkpoint` is called every
/// `checkpoint_every` steps.
pub fn train(
    state: &mut TrainState,
    tcfg: &TrainConfig,
    pairs: &[Pair],
    mut on_checkpoint: impl FnMut(&TrainState) -> Result<()>,
) -> Result<Vec<LossRecord>> {
    tcfg.validate()?;
    let start = Instant::now();
    let mut log = Vec::new();
    while state.iteration < tcfg.iterations {
        let it = state.iteration;
        let loss = train_step(state, tcfg, pairs)?;
        if tcfg.log_every > 0 && (it % tcfg.log_every == 0 || state.iteration == tcfg.iterations) {
            let rec = LossRecord {
                iteration: it,
                loss,
                wall_ms: start.elapsed().as_millis(),
            };
            log::info!("iteration {it} loss {loss:.6}");
            log.push(rec);
        }
        if tcfg.checkpoint_every > 0 && state.iteration % tcfg.checkpoint_every == 0 {
            on_checkpoint(state)?;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn mse_closed_forms() {
        let a = Plane::from_vec(2, 2, vec![0.5f32; 4]);
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data.iter().all(|&v| v == 0.0));
        let b = Plane::from_vec(2, 2, vec![0.4f32; 4]);
        let (l, g) = mse_loss(&a, &b).unwrap();
        assert!((l - 0.01).abs() < 1e-7);
        assert!(g.data.iter().all(|&v| (v - 0.05).abs() < 1e-6));
        assert!(mse_loss(&a, &Plane::zeros(1, 4)).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let pred = Plane::from_vec(3, 2, vec![0.1f32, 0.7, 0.3, 0.9, 0.5, 0.2]);
        let target = Plane::from_vec(3, 2, vec![0.2f32, 0.1, 0.3, 0.4, 0.8, 0.6]);
        let (_, g) = mse_loss(&pred, &target).unwrap();
        for i in 0..6 {
            let h = 1e-3f32;
            let mut p = pred.clone();
            p.data[i] += h;
            let (lp, _) = mse_loss(&p, &target).unwrap();
            p.data[i] -= 2.0 * h;
            let (lm, _) = mse_loss(&p, &target).unwrap();
            let num = (lp - lm) / (2.0 * h as f64);
            assert!(((num - g.data[i] as f64) / num.abs().max(1e-3)).abs() < 1e-3);
        }
    }

    fn tiny_cfg() -> NetworkConfig {
        let mut cfg = preset("rclut-3").unwrap();
        cfg.scale = 2;
        cfg.stages[0][0].head_channels = 4;
        cfg.hidden_width = 8;
        cfg.hidden_depth = 1;
        cfg.rc_channels = 4;
        cfg
    }

    fn pairs() -> Vec<Pair> {
        let hr = Plane::from_vec(32, 32, (0..1024).map(|i| ((i * 7 % 256) as f32) / 255.0).collect());
        let lr = crate::imagecore::bicubic_resize(&hr, 16, 16).unwrap();
        vec![Pair {
            name: "p".into(),
            lr,
            hr,
        }]
    }

    fn tcfg(iterations: u64) -> TrainConfig {
        TrainConfig {
            iterations,
            batch_size: 2,
            lr_patch: 6,
            log_every: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_keep_initialisation() {
        let mut s = TrainState::new(tiny_cfg(), 4).unwrap();
        let init = s.params.clone();
        let log = train(&mut s, &tcfg(0), &pairs(), |_| Ok(())).unwrap();
        assert!(log.is_empty());
        assert_eq!(s.params, init);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let mut full = TrainState::new(tiny_cfg(), 9).unwrap();
        let full_log = train(&mut full, &tcfg(6), &pairs(), |_| Ok(())).unwrap();

        let mut part = TrainState::new(tiny_cfg(), 9).unwrap();
        train(&mut part, &tcfg(3), &pairs(), |_| Ok(())).unwrap();
        let bytes = part.to_checkpoint().to_bytes();
        let mut resumed = TrainState::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        let tail = train(&mut resumed, &tcfg(6), &pairs(), |_| Ok(())).unwrap();
        assert_eq!(resumed.params, full.params);
        assert_eq!(resumed.to_checkpoint().to_bytes(), full.to_checkpoint().to_bytes());
        let losses: Vec<f64> = tail.iter().map(|r| r.loss).collect();
        let want: Vec<f64> = full_log[3..].iter().map(|r| r.loss).collect();
        assert_eq!(losses, want);
    }

    #[test]
    fn first_logged_loss_is_untrained_loss_on_first_batch() {
        let cfg = tiny_cfg();
        let t = tcfg(1);
        let mut s = TrainState::new(cfg.clone(), 2).unwrap();
        let mut probe = s.clone();
        let m = cfg.context_margin();
        assert_eq!(m, 3);
        let batch = sample_batch(&pairs(), &t, 2, m, &mut probe.rng).unwrap();
        let mut sse = 0.0;
        let mut n = 0.0;
        for (lr, hr) in &batch {
            let out = crate::refnet::network_forward(lr, &cfg, &s.params).unwrap();
            let inner = crate::imagecore::crop(&out, 2 * m, 2 * m, hr.width, hr.height);
            for (a, b) in inner.data.iter().zip(&hr.data) {
                sse += (*a as f64 - *b as f64).powi(2);
                n += 1.0;
            }
        }
        let log = train(&mut s, &t, &pairs(), |_| Ok(())).unwrap();
        assert!((log[0].loss - sse / n).abs() < 1e-9);
    }
}
