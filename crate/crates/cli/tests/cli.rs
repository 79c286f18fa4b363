//! End-to-end runs of the `rclut` binary.

use std::path::Path;
use std::process::{Command, Output};

use rclut::imagecore::{load_png, rotate90, save_png};
use rclut::refnet::Checkpoint;
use rclut::trainer::TrainState;
use rclut::{Image, QuantPlane};

fn rclut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rclut"))
        .args(args)
        .env("RCLUT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rclut(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = rclut(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic data plus a short training run; returns the output dir.
fn trained(root: &Path, iters: &str, seed: &str, name: &str) -> std::path::PathBuf {
    let data = root.join("data");
    if !data.exists() {
        ok(&["synth", "--out", s(&data), "--count", "2", "--size", "96", "--seed", "3"]);
    }
    let out = root.join(name);
    ok(&[
        "train", "--preset", "srlut-baseline", "--data", s(&data), "--out", s(&out), "--iters", iters, "--seed", seed,
    ]);
    out
}

#[test]
fn zero_iterations_saves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let out = trained(dir.path(), "0", "11", "run");
    let ckpt = Checkpoint::read(out.join("checkpoint.ckpt")).unwrap();
    let state = TrainState::from_checkpoint(&ckpt).unwrap();
    let fresh = TrainState::new(state.config.clone(), 11).unwrap();
    assert_eq!(state.params, fresh.params);
    assert_eq!(state.iteration, 0);
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let a = trained(dir.path(), "20", "5", "a");
    let b = trained(dir.path(), "20", "5", "b");
    let c = trained(dir.path(), "20", "6", "c");
    let read = |p: &Path| std::fs::read(p.join("checkpoint.ckpt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    for d in [&a, &b] {
        ok(&["export", "--ckpt", s(&d.join("checkpoint.ckpt")), "--out", s(&d.join("p.rclt"))]);
    }
    assert_eq!(std::fs::read(a.join("p.rclt")).unwrap(), std::fs::read(b.join("p.rclt")).unwrap());

    let csv = std::fs::read_to_string(a.join("loss.csv")).unwrap();
    assert!(csv.starts_with("iteration,loss,wall_ms\n"));
}

#[test]
fn export_inspect_and_upscale() {
    let dir = tempfile::tempdir().unwrap();
    let run = trained(dir.path(), "5", "1", "run");
    let pack = run.join("p.rclt");
    let export_out = ok(&["export", "--ckpt", s(&run.join("checkpoint.ckpt")), "--out", s(&pack)]);
    let inspect_out = ok(&["inspect", "--lut", s(&pack)]);
    assert!(inspect_out.contains("crc ok"));
    let total = |text: &str| text.lines().find(|l| l.starts_with("total ")).unwrap().to_string();
    assert_eq!(total(&export_out), total(&inspect_out));

    let data: Vec<u8> = (0..8 * 8 * 3).map(|i| (i * 29 % 251) as u8).collect();
    let img = Image::rgb(8, 8, data).unwrap();
    let (src, dst, dst2) = (dir.path().join("in.png"), dir.path().join("out.png"), dir.path().join("out2.png"));
    save_png(&img, &src).unwrap();
    ok(&["upscale", "--lut", s(&pack), "--in", s(&src), "--out", s(&dst)]);
    ok(&["upscale", "--lut", s(&pack), "--in", s(&src), "--out", s(&dst2)]);
    let up = load_png(&dst).unwrap();
    assert_eq!((up.width(), up.height()), (32, 32));
    assert_eq!(up, load_png(&dst2).unwrap());

    // Rotating the input rotates the output.
    let rot = |im: &Image| {
        let planes: Vec<QuantPlane> = (0..im.channels()).map(|c| rotate90(&im.channel(c), 1)).collect();
        Image::from_planes(&planes, im.colorspace()).unwrap()
    };
    let (rsrc, rdst) = (dir.path().join("rin.png"), dir.path().join("rout.png"));
    save_png(&rot(&img), &rsrc).unwrap();
    ok(&["upscale", "--lut", s(&pack), "--in", s(&rsrc), "--out", s(&rdst)]);
    assert_eq!(load_png(&rdst).unwrap(), rot(&up));
}

#[test]
fn passthrough_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["synth", "--out", s(&data), "--count", "2", "--size", "32"]);
    let report = dir.path().join("r");
    let out = ok(&["eval", "--passthrough", "--dataset", s(&data), "--report", s(&report)]);
    assert!(out.contains("mean PSNR 100.0000 dB, mean SSIM 1.000000"), "{out}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["mean_psnr"], 100.0);
    assert!(report.with_extension("csv").exists());
}

#[test]
fn calculators() {
    let rf = |preset: &str| ok(&["rf", "--preset", preset]);
    assert!(rf("rclut-default").contains("receptive field 27x27"));
    assert!(rf("mulut-shape").contains("receptive field 9x9"));
    assert!(rf("srlut-baseline").contains("receptive field 3x3"));
    assert!(ok(&["size", "--kind", "full_1d", "--n", "3"]).contains("36864 B (36 KB)"));
    assert!(ok(&["size", "--kind", "full_srlut", "--n", "2"]).contains("(64 GB)"));
    assert!(ok(&["size", "--kind", "sampled_srlut", "--n", "3"]).contains("(1.726 TB)"));
    assert!(ok(&["presets"]).contains("srlut-baseline"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Configuration errors.
    assert_eq!(code(&["rf", "--preset", "no-such-preset"]).0, 1);
    assert_eq!(code(&["size", "--kind", "bogus", "--n", "2"]).0, 1);
    assert_eq!(code(&["frobnicate"]).0, 1);
    // Data errors.
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let (c, _) = code(&["train", "--preset", "srlut-baseline", "--data", s(&empty), "--out", s(&dir.path().join("o"))]);
    assert_eq!(c, 2);
    // Artifact errors.
    let run = trained(dir.path(), "0", "1", "run");
    let pack = dir.path().join("p.rclt");
    ok(&["export", "--ckpt", s(&run.join("checkpoint.ckpt")), "--out", s(&pack)]);
    let mut bytes = std::fs::read(&pack).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&pack, &bytes).unwrap();
    let (c, err) = code(&["inspect", "--lut", s(&pack)]);
    assert_eq!(c, 3);
    assert!(err.contains("CorruptPack"), "{err}");
}
