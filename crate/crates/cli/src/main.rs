//! `rclut`: train, export, run and inspect reconstructed-convolution LUTs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 corrupt
//! artifact.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rclut::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "rclut", version, about = "Reconstructed-convolution look-up tables for x4 super-resolution")]
struct Cli {
    /// Worker threads (falls back to RCLUT_THREADS, then all cores).
    #[arg(long, global = true, env = "RCLUT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the reference network on a directory of HR PNGs.
    Train(TrainArgs),
    /// Cache a checkpoint into a .rclt table pack.
    Export(ExportArgs),
    /// Upscale one PNG with a table pack.
    Upscale(UpscaleArgs),
    /// Score a pack (or bicubic) on a directory of HR PNGs.
    Eval(EvalArgs),
    /// Print the receptive field of a network config.
    Rf(NetArgs),
    /// Evaluate the table-size formulas.
    Size(SizeArgs),
    /// Print the tables of a pack and verify its checksum.
    Inspect(InspectArgs),
    /// Write deterministic synthetic training images.
    Synth(SynthArgs),
    /// List the built-in network presets.
    Presets,
}

#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// JSON document with a `network` entry (and optionally `train`).
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Preset name; overrides the config's network.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Directory of HR PNGs.
    #[arg(long)]
    data: std::path::PathBuf,
    /// Output directory for checkpoints and the loss log.
    #[arg(long)]
    out: std::path::PathBuf,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cache for derived LR planes (default: <out>/cache).
    #[arg(long)]
    cache: Option<std::path::PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    ckpt: std::path::PathBuf,
    #[arg(long)]
    out: std::path::PathBuf,
    /// Sampling interval exponent; only 4 is supported.
    #[arg(long, default_value_t = 4)]
    interval: u32,
    /// Store RC tables at all 256 levels instead of 17.
    #[arg(long)]
    full_rc: bool,
    /// LUT-aware finetuning steps before writing (needs --data).
    #[arg(long, default_value_t = 0)]
    finetune_iters: u64,
    /// Adam step size for the table entries.
    #[arg(long, default_value_t = 1e-4)]
    finetune_lr: f64,
    #[arg(long)]
    data: Option<std::path::PathBuf>,
    /// Held-out HR PNGs guarding the finetune (kept only if it helps).
    #[arg(long)]
    validation: Option<std::path::PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct UpscaleArgs {
    #[arg(long)]
    lut: std::path::PathBuf,
    #[arg(long = "in")]
    input: std::path::PathBuf,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    lut: Option<std::path::PathBuf>,
    /// Score the float network of a checkpoint instead of a pack.
    #[arg(long)]
    ckpt: Option<std::path::PathBuf>,
    #[arg(long)]
    bicubic: bool,
    /// Score the ground truth against itself.
    #[arg(long)]
    passthrough: bool,
    #[arg(long)]
    dataset: std::path::PathBuf,
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Border shaved before scoring (default: the scale).
    #[arg(long)]
    crop: Option<usize>,
    /// Report path prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    report: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct SizeArgs {
    /// full_srlut, sampled_srlut or full_1d.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 4)]
    r: u32,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    lut: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    out: std::path::PathBuf,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 96)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Artifact => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Export(a) => commands::export(a),
        Command::Upscale(a) => commands::upscale(a),
        Command::Eval(a) => commands::eval(a),
        Command::Rf(a) => commands::rf(a),
        Command::Size(a) => commands::size(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Synth(a) => commands::synth(a),
        Command::Presets => commands::presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
