use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use dynavis::config::RunConfig;
use dynavis::ego::SystemMode;
use dynavis::eval::{evaluate, DEFAULT_TOLERANCE};
use dynavis::io::{load_sequence, read_trajectory, write_cloud, SequenceConfig};
use dynavis::pipeline::{map_from_sequence, read_keyframes, run_sequence};
use dynavis::synth::{emit_sequence, presets, SceneSpec};
use dynavis::{Error, Result};

#[derive(Parser)]
#[command(name = "dynavis", version, about = "Dynamic-object-aware RGB-D odometry, tracking and mapping")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Track a sequence: trajectory, object diagnostics, feedback, timing.
    Run(RunArgs),
    /// Compare an estimated trajectory with ground truth.
    Eval(EvalArgs),
    /// Fuse the keyframes of a finished run into a cloud and an octree.
    Map(MapArgs),
    /// Render a synthetic sequence.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SeqArgs {
    /// Sequence directory (rgb.txt, depth.txt, ...).
    #[arg(long)]
    seq: PathBuf,
    /// Directory with masks.txt and classes.txt (default: the sequence).
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Directory with flow.txt (default: the sequence).
    #[arg(long)]
    flow: Option<PathBuf>,
    /// Directory with keypoints.txt (default: the sequence).
    #[arg(long)]
    keypoints: Option<PathBuf>,
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SystemMode>,
    #[arg(long, default_value = "trajectory.txt")]
    out_traj: PathBuf,
    #[arg(long)]
    diag: Option<PathBuf>,
    #[arg(long)]
    feedback: Option<PathBuf>,
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Keyframe records, needed later by `map`.
    #[arg(long)]
    keyframes: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Timestamp association tolerance, seconds.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long)]
    keyframes: PathBuf,
    /// Octree leaf size, meters.
    #[arg(long)]
    resolution: Option<f64>,
    /// Keep dynamic objects in the cloud.
    #[arg(long)]
    keep_dynamic: bool,
    #[arg(long, default_value = "cloud.txt")]
    cloud: PathBuf,
    #[arg(long, default_value = "octree.txt")]
    octree: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in scene name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<SystemMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn config_for(a: &SeqArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
        cfg.apply_seed();
    }
    cfg.sequence = SequenceConfig {
        masks_dir: a.masks.clone(),
        flow_dir: a.flow.clone(),
        keypoints_dir: a.keypoints.clone(),
        ..cfg.sequence
    };
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<i32> {
    let mut cfg = config_for(&a.seq)?;
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    cfg.validate()?;
    let seq = load_sequence(&a.seq.seq, &cfg.sequence)?;
    info!("{} frames, mode {}", seq.len(), cfg.mode);
    let out = run_sequence(&cfg, &seq, false)?;
    write(&a.out_traj, &out.trajectory.to_text())?;
    if let Some(p) = &a.diag {
        write(p, &out.diag_text())?;
    }
    if let Some(p) = &a.feedback {
        write(p, &out.feedback_text())?;
    }
    if let Some(p) = &a.timing {
        write(p, &out.timing.to_text())?;
    }
    if let Some(p) = &a.keyframes {
        write(p, &out.keyframes_text())?;
    }
    let code = out.exit_code();
    if code != 0 {
        error!("tracking lost in {} of {} frames", out.lost, out.frames);
    }
    Ok(code)
}

fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let est = read_trajectory(&a.est)?;
    let gt = read_trajectory(&a.gt)?;
    let report = evaluate(&est, &gt, a.tolerance)?;
    let text = report.to_string();
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_map(a: MapArgs) -> Result<i32> {
    let cfg = config_for(&a.seq)?;
    let mut dense = cfg.map.clone();
    if let Some(r) = a.resolution {
        dense.resolution = r;
    }
    if a.keep_dynamic {
        dense.filter_dynamic = false;
    }
    let records = read_keyframes(&a.keyframes)?;
    if records.is_empty() {
        return Err(Error::NotEnoughData(format!("{} has no keyframe records", a.keyframes.display())));
    }
    let seq = load_sequence(&a.seq.seq, &cfg.sequence)?;
    let (cloud, octree) = map_from_sequence(&seq, &records, &cfg, &dense)?;
    write_cloud(&cloud.colored(), &a.cloud)?;
    octree.write(&a.octree)?;
    info!("{} cloud points, {} occupied leaves", cloud.len(), octree.leaf_count());
    Ok(0)
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let spec = match (&a.spec, &a.preset) {
        (Some(p), _) => SceneSpec::load(p)?,
        (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
            let names: Vec<&str> = presets::all().into_iter().map(|(n, _)| n).collect();
            Error::Config(format!("unknown preset `{name}`; known: {}", names.join(", ")))
        })?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    emit_sequence(&spec, &a.out)?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Map(a) => cmd_map(a),
        Cmd::Synth(a) => cmd_synth(a),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
