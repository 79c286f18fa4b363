//! One function per subcommand.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rclut::imagecore::{load_png, save_png};
use rclut::lutpack::{self, format_bytes, read_file, sample_points, size_formula, write_file, BlockTable, SizeKind};
use rclut::metrics::{evaluate, EvalReport};
use rclut::refnet::{network_upscale, receptive_field, Checkpoint};
use rclut::trainer::{self, lut_aware_finetune, prepare_pairs, DatasetSpec, Pair, TrainState};
use rclut::{lutengine, presets, synth, Error, LutPack, Result};
use serde_json::json;

use crate::settings::{announce, resolve};
use crate::{EvalArgs, ExportArgs, InspectArgs, NetArgs, SizeArgs, SynthArgs, TrainArgs, UpscaleArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_pairs(dir: &Path, scale: usize, cache: Option<&Path>) -> Result<Vec<Pair>> {
    let spec = DatasetSpec {
        hr_dir: dir.to_path_buf(),
        scale,
        cache_dir: cache.map(Path::to_path_buf),
    };
    let (pairs, stats) = prepare_pairs(&spec)?;
    for (p, why) in &stats.skipped {
        eprintln!("warning: skipped {}: {why}", p.display());
    }
    println!(
        "dataset: {} pairs ({} cached, {} resampled)",
        stats.loaded, stats.cache_hits, stats.resampled
    );
    Ok(pairs)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mut s = resolve(&a.net)?;
    if let Some(n) = a.iters {
        s.train.iterations = n;
    }
    if let Some(seed) = a.seed {
        s.train.seed = seed;
    }
    s.train.validate()?;
    let mut state = match &a.resume {
        Some(p) => {
            let st = TrainState::from_checkpoint(&Checkpoint::read(p)?)?;
            s.network = st.config.clone();
            s.train.seed = st.seed;
            st
        }
        None => {
            s.network.validate_executable()?;
            TrainState::new(s.network.clone(), s.train.seed)?
        }
    };
    announce(
        "train",
        json!({
            "network": s.network,
            "train": s.train,
            "data": a.data,
            "out": a.out,
            "resume_from_iteration": a.resume.as_ref().map(|_| state.iteration),
        }),
    );
    create_dir(&a.out)?;
    let cache = a.cache.clone().unwrap_or_else(|| a.out.join("cache"));
    let pairs = load_pairs(&a.data, s.network.scale, Some(&cache))?;
    let out = a.out.clone();
    let log = trainer::train(&mut state, &s.train, &pairs, |st| {
        st.to_checkpoint().write(out.join(format!("checkpoint-{:07}.ckpt", st.iteration)))
    })?;
    let mut csv = String::from("iteration,loss,wall_ms\n");
    for r in &log {
        let _ = writeln!(csv, "{},{:.8},{}", r.iteration, r.loss, r.wall_ms);
    }
    write_text(&a.out.join("loss.csv"), &csv)?;
    let ckpt = a.out.join("checkpoint.ckpt");
    state.to_checkpoint().write(&ckpt)?;
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        println!("loss {:.6} -> {:.6}", first.loss, last.loss);
    }
    println!("wrote {} (iteration {})", ckpt.display(), state.iteration);
    Ok(())
}

fn table_lines(pack: &LutPack) -> Vec<(String, &'static str, String, usize)> {
    let mut out = Vec::new();
    for (s, stage) in pack.stages.iter().enumerate() {
        for (b, br) in stage.iter().enumerate() {
            for (k, t) in br.rc.iter().enumerate() {
                out.push((format!("s{s}.b{b}.rc{k}"), "rc", format!("{}", t.entries.len()), t.entries.len()));
            }
            let (kind, dims) = match &br.block {
                BlockTable::Grid4(t) => ("4d", format!("17^4x{}", t.out_channels)),
                BlockTable::Pixel(t) => ("1d-multi", format!("256x{}", t.out_channels)),
            };
            out.push((format!("s{s}.b{b}.blk"), kind, dims, br.block.bytes()));
        }
    }
    out
}

fn print_tables(pack: &LutPack) {
    for (id, kind, dims, bytes) in table_lines(pack) {
        println!("  {id:<14} {kind:<8} {dims:>10} {bytes:>9} B");
    }
    let total = pack.total_bytes();
    println!("total {} B ({})", total, format_bytes(total as u128));
}

pub fn export(a: &ExportArgs) -> Result<()> {
    sample_points(a.interval)?;
    let state = TrainState::from_checkpoint(&Checkpoint::read(&a.ckpt)?)?;
    let mut tcfg = trainer::TrainConfig {
        iterations: a.finetune_iters,
        lr: a.finetune_lr,
        ..Default::default()
    };
    if let Some(seed) = a.seed {
        tcfg.seed = seed;
    }
    announce(
        "export",
        json!({
            "ckpt": a.ckpt,
            "out": a.out,
            "interval_bits": a.interval,
            "sampled_rc": !a.full_rc,
            "network": state.config,
            "finetune": (a.finetune_iters > 0).then(|| &tcfg),
        }),
    );
    let mut pack = lutpack::export(&state.config, &state.params, !a.full_rc)?;
    if a.finetune_iters > 0 {
        let data = a
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--finetune-iters needs --data".into()))?;
        let pairs = load_pairs(data, pack.scale, None)?;
        let val = match &a.validation {
            Some(dir) => Some(load_pairs(dir, pack.scale, None)?),
            None => None,
        };
        let (tuned, report) = lut_aware_finetune(&pack, &pairs, &tcfg, val.as_deref())?;
        if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
            println!("finetune batch loss {first:.6e} -> {last:.6e}");
        }
        if let (Some(b), Some(after)) = (report.validation_before, report.validation_after) {
            println!("finetune validation mse {b:.6e} -> {after:.6e}");
        }
        println!("finetune {}", if report.accepted { "accepted" } else { "rejected, keeping the exported tables" });
        pack = tuned;
    }
    write_file(&pack, &a.out)?;
    print_tables(&pack);
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn upscale(a: &UpscaleArgs) -> Result<()> {
    announce("upscale", json!({ "lut": a.lut, "in": a.input, "out": a.out }));
    let pack = read_file(&a.lut)?;
    let img = load_png(&a.input)?;
    let start = Instant::now();
    let out = lutengine::upscale(&img, &pack)?;
    let secs = start.elapsed().as_secs_f64();
    save_png(&out, &a.out)?;
    let mp = (out.width() * out.height()) as f64 / 1e6;
    println!(
        "{}x{} -> {}x{} in {:.1} ms ({:.2} MP/s)",
        img.width(),
        img.height(),
        out.width(),
        out.height(),
        secs * 1e3,
        mp / secs.max(1e-9)
    );
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let border = a.crop.unwrap_or(a.scale);
    let modes = [
        ("lut", a.lut.is_some()),
        ("network", a.ckpt.is_some()),
        ("bicubic", a.bicubic),
        ("passthrough", a.passthrough),
    ];
    let chosen: Vec<&str> = modes.iter().filter(|m| m.1).map(|m| m.0).collect();
    let [mode] = chosen[..] else {
        return Err(Error::InvalidConfig(
            "choose exactly one of --lut, --ckpt, --bicubic, --passthrough".into(),
        ));
    };
    announce(
        "eval",
        json!({ "mode": mode, "lut": a.lut, "ckpt": a.ckpt, "dataset": a.dataset, "scale": a.scale, "border": border, "report": a.report }),
    );
    let scale_check = |s: usize| {
        if s == a.scale {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("model scale {s} but --scale {}", a.scale)))
        }
    };
    let report: EvalReport = match mode {
        "lut" => {
            let pack = read_file(a.lut.as_ref().expect("lut mode"))?;
            scale_check(pack.scale)?;
            evaluate(&a.dataset, a.scale, border, |lr, _| lutengine::upscale(lr, &pack))?
        }
        "network" => {
            let st = TrainState::from_checkpoint(&Checkpoint::read(a.ckpt.as_ref().expect("network mode"))?)?;
            scale_check(st.config.scale)?;
            evaluate(&a.dataset, a.scale, border, |lr, _| network_upscale(lr, &st.config, &st.params))?
        }
        "bicubic" => evaluate(&a.dataset, a.scale, border, |lr, hr| lr.resize(hr.width(), hr.height()))?,
        _ => evaluate(&a.dataset, a.scale, border, |_, hr| Ok(hr.clone()))?,
    };
    for s in &report.images {
        println!("  {:<24} {:>8.4} dB  {:.6}", s.name, s.psnr, s.ssim);
    }
    println!("mean PSNR {:.4} dB, mean SSIM {:.6}", report.mean_psnr, report.mean_ssim);
    if let Some(prefix) = &a.report {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        write_text(&prefix.with_extension("csv"), &report.to_csv())?;
        write_text(&prefix.with_extension("json"), &report.to_json())?;
    }
    Ok(())
}

pub fn rf(a: &NetArgs) -> Result<()> {
    let s = resolve(a)?;
    announce("rf", json!({ "network": s.network }));
    let rf = receptive_field(&s.network)?;
    println!("receptive field {rf}x{rf}");
    Ok(())
}

pub fn size(a: &SizeArgs) -> Result<()> {
    let kind: SizeKind = a.kind.parse()?;
    announce("size", json!({ "kind": a.kind, "n": a.n, "r": a.r }));
    match size_formula(kind, a.n, a.r)? {
        lutpack::SizeEstimate::Bytes(b) => println!("{b} B ({})", format_bytes(b)),
        est => println!("{est}"),
    }
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> Result<()> {
    announce("inspect", json!({ "lut": a.lut }));
    let bytes = std::fs::read(&a.lut).map_err(|e| Error::io(&a.lut, e))?;
    let pack = LutPack::from_bytes(&bytes)?;
    println!(
        "scale x{}, rotation ensemble {}, {} stage(s), {} table(s), file {} B, crc ok",
        pack.scale,
        if pack.rotation_ensemble { "on" } else { "off" },
        pack.stages.len(),
        pack.table_count(),
        bytes.len()
    );
    for (s, stage) in pack.stages.iter().enumerate() {
        let desc: Vec<String> = stage
            .iter()
            .map(|b| match (b.rc_size(), &b.block) {
                (0, t) => format!("{}x{} block", t.span(), t.span()),
                (n, t) => format!("RC-{n} + {}x{} block", t.span(), t.span()),
            })
            .collect();
        println!("stage {s}: {}", desc.join(", "));
    }
    print_tables(&pack);
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    announce("synth", json!({ "out": a.out, "count": a.count, "size": a.size, "seed": a.seed }));
    if a.size < 8 {
        return Err(Error::InvalidConfig("--size must be at least 8".into()));
    }
    create_dir(&a.out)?;
    synth::write_scenes(&a.out, a.count, a.size, a.seed)?;
    println!("wrote {} scenes to {}", a.count, a.out.display());
    Ok(())
}

pub fn presets() -> Result<()> {
    for name in presets::NAMES {
        let cfg = presets::preset(name).expect("listed preset exists");
        let rf = receptive_field(&cfg).map(|r| r.to_string()).unwrap_or_else(|_| "-".into());
        let bytes = lutpack::topology_bytes(&cfg, true)
            .map(|b| format!("{b} B"))
            .unwrap_or_else(|_| "-".into());
        let runnable = if cfg.validate_executable().is_ok() { "" } else { "  (calculator only)" };
        println!("{name:<16} rf {rf:>2}  {bytes:>12}{runnable}");
    }
    Ok(())
}
