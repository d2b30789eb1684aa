//! Command-line front end.
//!
//! Exit status is 0 on success, 1 for bad input (arguments, files,
//! configuration) and 2 when the numerics fail.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{
    default_precision_thresholds, default_success_thresholds, precision_curve, success_curve, summarize, BoundingBox,
};
use crate::io::{
    config_to_toml, load_frames, load_sequence, parse_box, parse_config, parse_curve, parse_gt, parse_matrix,
    parse_results, render_curve_svg, write_curve, write_gt, write_matrix, write_metrics, write_results, write_summary,
    CurveKind,
};
use crate::io::{read_text, write_text};
use crate::rpca::{decompose_traced, SolverConfig};
use crate::synthetic::SquareSequence;
use crate::tracker::{track_sequence, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

/// Environment variable read for the log filter, e.g. `PRPCA_LOG=info`.
pub const LOG_ENV: &str = "PRPCA_LOG";

#[derive(Debug, Parser)]
#[command(name = "prpca", version, about = "Infrared target tracking with proximal robust PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a target through an image sequence.
    Track(TrackArgs),
    /// Score a results file against ground truth.
    Eval(EvalArgs),
    /// Render precision and success curves as SVG.
    Plot(PlotArgs),
    /// Split a text matrix into low-rank and sparse parts.
    Decompose(DecomposeArgs),
    /// Write the synthetic moving-square sequence as PNG frames.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Directory of frames; file names define the order.
    #[arg(long)]
    seq: PathBuf,
    /// Initial box as X,Y,W,H.
    #[arg(long = "box", value_name = "X,Y,W,H")]
    init_box: String,
    /// Ground truth; when given, metrics and curves are written as well.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Tracker configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `workers` from the configuration.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Directory holding precision.csv and/or success.csv.
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// Whitespace-separated rows of numbers.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Also write the per-iteration scale and residual.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Render without the occlusion band.
    #[arg(long)]
    no_occlusion: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit status. Diagnostics go to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
        Command::Decompose(a) => decompose(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::input(dir, e.to_string()))
}

fn track(a: TrackArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => parse_config(&read_text(p)?).map_err(|e| Error::input(p, e.to_string()))?,
        None => TrackerConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    let init = parse_box(&a.init_box).map_err(|m| Error::Config(format!("--box: {m}")))?;
    let manifest = load_sequence(&a.seq, a.gt.as_deref())?;
    let frames = load_frames(&manifest)?;
    log::info!("{}: {} frames of {}x{}", manifest.name, frames.len(), manifest.width, manifest.height);

    let results = track_sequence(&frames, init, &cfg)?;
    prepare_out(&a.out)?;
    write_text(&a.out.join("results.csv"), &write_results(&results))?;
    write_text(&a.out.join("config.toml"), &config_to_toml(&cfg))?;
    write_text(&a.out.join("seed.txt"), &format!("{}\n", cfg.rng_seed))?;
    if let Some(gt) = &manifest.ground_truth {
        let pred: Vec<BoundingBox> = results.iter().map(|r| r.bbox).collect();
        let frames: Vec<usize> = results.iter().map(|r| r.frame_index).collect();
        write_evaluation(&a.out, &frames, &pred, gt)?;
    }
    Ok(())
}

fn write_evaluation(out: &Path, frames: &[usize], pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<()> {
    let m = summarize(pred, gt)?;
    write_text(&out.join("metrics.csv"), &write_metrics(frames, pred, &m))?;
    write_text(&out.join("summary.txt"), &write_summary(&m))?;
    let p = precision_curve(&m.per_frame_center_px, &default_precision_thresholds())?;
    write_text(&out.join("precision.csv"), &write_curve(&p, "threshold_px", "precision"))?;
    let s = success_curve(&m.per_frame_aos, &default_success_thresholds())?;
    write_text(&out.join("success.csv"), &write_curve(&s, "threshold_aos", "success"))?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let rows = parse_results(&read_text(&a.results)?).map_err(|e| Error::input(&a.results, e.to_string()))?;
    let gt = parse_gt(&read_text(&a.gt)?).map_err(|e| Error::input(&a.gt, e.to_string()))?;
    if rows.len() != gt.len() {
        return Err(Error::input(
            &a.results,
            format!("{} result rows for {} ground-truth boxes", rows.len(), gt.len()),
        ));
    }
    let pred: Vec<BoundingBox> = rows.iter().map(|r| r.bbox).collect();
    let frames: Vec<usize> = rows.iter().map(|r| r.frame).collect();
    prepare_out(&a.out)?;
    write_evaluation(&a.out, &frames, &pred, &gt)
}

fn plot(a: PlotArgs) -> Result<()> {
    let jobs = [
        ("precision", CurveKind::Precision, "Precision plot"),
        ("success", CurveKind::Success, "Success plot"),
    ];
    let mut written = 0;
    prepare_out(&a.out)?;
    for (stem, kind, title) in jobs {
        let src = a.curves.join(format!("{stem}.csv"));
        if !src.exists() {
            continue;
        }
        let curve = parse_curve(&read_text(&src)?).map_err(|e| Error::input(&src, e.to_string()))?;
        write_text(&a.out.join(format!("{stem}.svg")), &render_curve_svg(&curve, kind, title))?;
        written += 1;
    }
    if written == 0 {
        return Err(Error::input(&a.curves, "neither precision.csv nor success.csv found"));
    }
    Ok(())
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let m = parse_matrix(&read_text(&a.matrix)?).map_err(|e| Error::input(&a.matrix, e.to_string()))?;
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        p: a.p,
        rho: a.rho.unwrap_or(d.rho),
        mu0: a.mu0.or(d.mu0),
        lambda_reg: a.lambda.or(d.lambda_reg),
        tol: a.tol.unwrap_or(d.tol),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
    };
    cfg.validate()?;
    let mut trace = String::from("iteration,mu,residual\n");
    let out = decompose_traced(&m, &cfg, None, |r| {
        let _ = writeln!(trace, "{},{},{}", r.iteration, r.mu, r.residual);
    })?;
    prepare_out(&a.out)?;
    write_text(&a.out.join("low_rank.txt"), &write_matrix(&out.low_rank))?;
    write_text(&a.out.join("sparse.txt"), &write_matrix(&out.sparse))?;
    write_text(
        &a.out.join("summary.txt"),
        &format!(
            "iterations = {}\nfinal_residual = {}\nconverged = {}\n",
            out.iterations, out.final_residual, out.converged
        ),
    )?;
    if a.trace {
        write_text(&a.out.join("trace.csv"), &trace)?;
    }
    if !out.converged {
        log::warn!("no convergence after {} iterations", out.iterations);
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let square = SquareSequence {
        frames: a.frames,
        seed: a.seed,
        occlusion: if a.no_occlusion { None } else { SquareSequence::default().occlusion },
        ..Default::default()
    };
    if square.frames == 0 {
        return Err(Error::Config("--frames must be at least 1".into()));
    }
    let seq = square.render();
    let dir = a.out.join("frames");
    prepare_out(&dir)?;
    for (k, f) in seq.frames.iter().enumerate() {
        let path = dir.join(format!("{:04}.png", k + 1));
        f.to_luma8().save(&path).map_err(|e| Error::input(&path, e.to_string()))?;
    }
    write_text(&a.out.join("groundtruth.txt"), &write_gt(&seq.truth))?;
    Ok(())
}
