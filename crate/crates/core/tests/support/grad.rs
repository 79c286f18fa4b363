//! Central-difference gradient audit shared by the gradient and acceptance
//! test targets. Everything runs in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rclut::refnet::{
    convblock_backward, convblock_forward, convblock_forward_cached, network_backward, network_forward,
    network_forward_train, rc_backward, rc_forward, BlockKind, BranchConfig, ConvBlockParams, NetworkConfig,
    NetworkParams, RcModuleParams, Tensor,
};
use rclut::Plane;

pub const H: f64 = 1e-3;
pub const TOL: f64 = 1e-3;

pub fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane<f64> {
    Plane::from_vec(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Default)]
pub struct Tally {
    pub instances: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl Tally {
    /// Compares `analytic` against central differences of `eval(delta)`.
    /// Between kinks every loss here is linear in any single coordinate, so
    /// the two one-sided slopes agree to rounding; where they do not, the
    /// step crossed a ReLU or clamp boundary and the point is skipped.
    pub fn compare(&mut self, what: &str, analytic: f64, mut eval: impl FnMut(f64) -> f64) {
        let f0 = eval(0.0);
        let fp = eval(H);
        let fm = eval(-H);
        let (right, left) = ((fp - f0) / H, (f0 - fm) / H);
        let scale = right.abs().max(left.abs()).max(1e-6);
        if (right - left).abs() > 1e-6 * scale + 1e-9 {
            self.skipped += 1;
            return;
        }
        let numeric = (fp - fm) / (2.0 * H);
        let denom = analytic.abs().max(numeric.abs()).max(1e-4);
        let rel = (analytic - numeric).abs() / denom;
        if rel > self.max_rel || self.worst.is_empty() {
            self.max_rel = self.max_rel.max(rel);
            self.worst = format!("{what}: analytic {analytic} numeric {numeric}");
        }
        self.checked += 1;
    }

    pub fn passed(&self, min_checked: usize) -> bool {
        self.max_rel < TOL && self.checked >= min_checked
    }
}

/// One random RC module of kernel `n`: parameters and input coordinates.
pub fn rc_instance(n: usize, seed: u64, tally: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = RcModuleParams::<f64>::init(n, 6, &mut rng);
    let mut params = params;
    // Move away from the identity start so slopes and clamps vary.
    for v in params.w_out.iter_mut().chain(params.b_out.iter_mut()) {
        *v += rng.gen_range(-0.3..0.3);
    }
    let x = random_plane(&mut rng, n + 3, n + 2);
    let out = rc_forward(&x, &params).unwrap();
    let u: Vec<f64> = (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let up = Plane::from_vec(out.width, out.height, u.clone());
    let (dx, g) = rc_backward(&x, &params, &up).unwrap();
    let loss = |p: &RcModuleParams<f64>, x: &Plane<f64>| dot(&rc_forward(x, p).unwrap().data, &u);
    let arrays: [(&str, &Vec<f64>); 4] = [("w", &g.w), ("b", &g.b), ("w_out", &g.w_out), ("b_out", &g.b_out)];
    for (name, grad) in arrays {
        for _ in 0..4 {
            let i = rng.gen_range(0..grad.len());
            tally.compare(&format!("rc{n}.{name}[{i}] seed {seed}"), grad[i], |d| {
                let mut p = params.clone();
                let arr = match name {
                    "w" => &mut p.w,
                    "b" => &mut p.b,
                    "w_out" => &mut p.w_out,
                    _ => &mut p.b_out,
                };
                arr[i] += d;
                loss(&p, &x)
            });
        }
    }
    for _ in 0..4 {
        let i = rng.gen_range(0..x.len());
        tally.compare(&format!("rc{n}.x[{i}] seed {seed}"), dx.data[i], |d| {
            let mut xp = x.clone();
            xp.data[i] += d;
            loss(&params, &xp)
        });
    }
    tally.instances += 1;
}

/// One random conv block of the given kind and depth.
pub fn block_instance(kind: BlockKind, depth: usize, seed: u64, tally: &mut Tally) {
    let heads = if kind == BlockKind::In4Out1 { 1 } else { 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ConvBlockParams::<f64>::init(kind, 6, depth, heads, &mut rng);
    // Keep heads away from the clamp so most points are smooth.
    let last = params.layers.len() - 1;
    params.layers[last].weight.iter_mut().for_each(|w| *w *= 0.3);
    let x = random_plane(&mut rng, 4, 3);
    let (t, cache) = convblock_forward_cached(&x, &params).unwrap();
    let u: Vec<f64> = (0..t.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let up = Tensor::from_vec(t.shape(), u.clone()).unwrap();
    let (dx, g) = convblock_backward(&cache, &params, &up).unwrap();
    let loss = |p: &ConvBlockParams<f64>, x: &Plane<f64>| dot(convblock_forward(x, p).unwrap().data(), &u);
    for l in 0..params.layers.len() {
        for _ in 0..3 {
            let i = rng.gen_range(0..g.layers[l].weight.len());
            tally.compare(&format!("{kind:?} l{l}.w[{i}] seed {seed}"), g.layers[l].weight[i], |d| {
                let mut p = params.clone();
                p.layers[l].weight[i] += d;
                loss(&p, &x)
            });
        }
        let i = rng.gen_range(0..g.layers[l].bias.len());
        tally.compare(&format!("{kind:?} l{l}.b[{i}] seed {seed}"), g.layers[l].bias[i], |d| {
            let mut p = params.clone();
            p.layers[l].bias[i] += d;
            loss(&p, &x)
        });
    }
    for _ in 0..3 {
        let i = rng.gen_range(0..x.len());
        tally.compare(&format!("{kind:?} x[{i}] seed {seed}"), dx.data[i], |d| {
            let mut xp = x.clone();
            xp.data[i] += d;
            loss(&params, &xp)
        });
    }
    tally.instances += 1;
}

pub fn small(mut cfg: NetworkConfig) -> NetworkConfig {
    cfg.rc_channels = 4;
    cfg.hidden_width = 5;
    cfg.hidden_depth = 1;
    cfg
}

/// Two stages, mixed branches, scale 2. Straight-through rounding has no
/// finite-difference counterpart, so inter-stage quantisation is off.
pub fn two_stage(ensemble: bool) -> NetworkConfig {
    let mut cfg = small(NetworkConfig::new(
        2,
        vec![
            vec![
                BranchConfig::new(Some(3), BlockKind::In4Out1, 1),
                BranchConfig::new(None, BlockKind::In4Out1, 1),
            ],
            vec![
                BranchConfig::new(Some(2), BlockKind::In1Out4, 4),
                BranchConfig::new(Some(3), BlockKind::In4OutHead, 4),
            ],
        ],
    ));
    cfg.rotation_ensemble = ensemble;
    cfg.quantize_between_stages = false;
    cfg
}

/// Whole-network check: a sample of every parameter array plus the input.
pub fn network_instance(cfg: &NetworkConfig, seed: u64, per_array: usize, tally: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::<f64>::init(cfg, &mut rng).unwrap();
    for br in params.stages.iter_mut().flatten() {
        let last = br.block.layers.len() - 1;
        br.block.layers[last].weight.iter_mut().for_each(|w| *w *= 0.3);
        if let Some(rc) = br.rc.as_mut() {
            rc.w_out.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
    }
    let x = random_plane(&mut rng, 5, 4);
    let (out, tape) = network_forward_train(&x, cfg, &params).unwrap();
    let u: Vec<f64> = (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let up = Plane::from_vec(out.width, out.height, u.clone());
    let mut grads = params.zeros_like();
    let dx = network_backward(&tape, cfg, &params, &up, &mut grads).unwrap();
    let loss = |p: &NetworkParams<f64>, x: &Plane<f64>| dot(&network_forward(x, cfg, p).unwrap().data, &u);
    let specs = params.specs();
    let flat: Vec<Vec<f64>> = grads.arrays().iter().map(|a| a.to_vec()).collect();
    for (a, spec) in specs.iter().enumerate() {
        for _ in 0..per_array {
            let i = rng.gen_range(0..flat[a].len());
            tally.compare(&format!("{}[{i}] seed {seed}", spec.name), flat[a][i], |d| {
                let mut p = params.clone();
                p.arrays_mut()[a][i] += d;
                loss(&p, &x)
            });
        }
    }
    for _ in 0..per_array {
        let i = rng.gen_range(0..x.len());
        tally.compare(&format!("x[{i}] seed {seed}"), dx.data[i], |d| {
            let mut xp = x.clone();
            xp.data[i] += d;
            loss(&params, &xp)
        });
    }
    tally.instances += 1;
}
