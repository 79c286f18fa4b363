//! Central-difference checks of every hand-written backward pass, in f64.

#[path = "support/grad.rs"]
mod grad;

use grad::{block_instance, network_instance, random_plane, rc_instance, small, two_stage, Tally};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rclut::refnet::{network_backward, network_forward_train, BlockKind, NetworkParams};
use rclut::Plane;

fn assert_tally(what: &str, t: &Tally, min_checked: usize) {
    assert!(
        t.passed(min_checked),
        "{what}: max rel {:.2e} ({}), {} checked, {} skipped",
        t.max_rel,
        t.worst,
        t.checked,
        t.skipped
    );
}

#[test]
fn rc_module_gradients() {
    let mut t = Tally::default();
    for (i, n) in [1, 2, 3, 5, 3, 7].into_iter().enumerate() {
        rc_instance(n, 100 + i as u64, &mut t);
    }
    assert_tally("rc", &t, 50);
}

#[test]
fn conv_block_gradients() {
    for (k, kind) in [BlockKind::In4Out1, BlockKind::In4OutHead, BlockKind::In1Out4].into_iter().enumerate() {
        let mut t = Tally::default();
        for seed in 0..9u64 {
            block_instance(kind, seed as usize % 3, 200 + k as u64 * 100 + seed, &mut t);
        }
        assert_tally(&format!("{kind:?}"), &t, 50);
    }
}

#[test]
fn network_gradients() {
    let mut t = Tally::default();
    network_instance(&two_stage(true), 300, 6, &mut t);
    network_instance(&two_stage(false), 301, 6, &mut t);
    let mut single = small(rclut::presets::preset("rclut-3").unwrap());
    single.scale = 4;
    network_instance(&single, 302, 6, &mut t);
    assert_tally("network", &t, 50);
}

#[test]
fn quantised_cascade_backward_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut cfg = small(rclut::presets::preset("rclut-default").unwrap());
    cfg.scale = 2;
    for b in cfg.stages[1].iter_mut() {
        b.head_channels = 4;
    }
    let params = NetworkParams::<f64>::init(&cfg, &mut rng).unwrap();
    let x = random_plane(&mut rng, 5, 5);
    let (out, tape) = network_forward_train(&x, &cfg, &params).unwrap();
    let up = Plane::from_vec(out.width, out.height, vec![1.0; out.len()]);
    let mut g = params.zeros_like();
    let dx = network_backward(&tape, &cfg, &params, &up, &mut g).unwrap();
    assert!(dx.data.iter().all(|v| v.is_finite()));
    assert!(g.arrays().iter().flat_map(|a| a.iter()).any(|v| *v != 0.0));
}
