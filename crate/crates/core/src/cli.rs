//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime or I/O errors.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_corpus, BenchConfig};
use crate::cart::FitReport;
use crate::codec::{load_image, save_image};
use crate::error::{Error, Result};
use crate::pyramid::{build_pyramid, dump_pairs, training_set, Transform};
use crate::upscale::{train_from_image, upscale, StageTimings, UpscaleConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

const UPSCALE_REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mlzoom", version, about = "Single-image decision-tree upscaling")]
struct Cli {
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, env = "MLZOOM_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enlarge an image with a tree trained on the image itself.
    Upscale(UpscaleArgs),
    /// Dump the pyramid training pairs as CSV.
    Pairs(PairsArgs),
    /// Write every pyramid level as level_NN.png.
    Pyramid(PyramidArgs),
    /// Train on an image and write the model file.
    Model(ModelArgs),
    /// Round-trip benchmark over a directory of images.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct UpscaleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    zoom: u32,
    #[arg(long)]
    no_blur: bool,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    blur_passes: Option<u32>,
    /// Comma-separated subset of flip_h,flip_v,rot90,rot180,rot270 (or "all").
    #[arg(long, value_parser = parse_transforms)]
    augment: Option<std::collections::BTreeSet<Transform>>,
    #[arg(long)]
    retrain_per_step: bool,
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// JSON report with fit statistics and timings.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Record wall-clock timings in the report (otherwise written as 0).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct PairsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PyramidArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,4", value_parser = clap::value_parser!(u32).range(2..))]
    factors: Vec<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock timings (otherwise written as 0).
    #[arg(long)]
    timings: bool,
}

fn parse_transforms(s: &str) -> std::result::Result<std::collections::BTreeSet<Transform>, String> {
    Transform::parse_list(s).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Dims {
    width: usize,
    height: usize,
}

#[derive(Serialize)]
struct UpscaleReport<'a> {
    format_version: u32,
    input: Dims,
    output: Dims,
    factor: usize,
    steps_applied: usize,
    train_r2: f64,
    n_samples: u64,
    n_leaves: usize,
    depth: usize,
    fit: &'a FitReport,
    timings: &'a StageTimings,
    config: &'a UpscaleConfig,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Upscale(args) => cmd_upscale(args),
        Command::Pairs(args) => {
            let img = load_image(&args.input)?;
            let ts = build_pyramid(&img)?.extract_pairs();
            dump_pairs(&ts, &args.out)?;
            println!("wrote {} pairs to {}", ts.len(), args.out.display());
            Ok(())
        }
        Command::Pyramid(args) => {
            let img = load_image(&args.input)?;
            let pyramid = build_pyramid(&img)?;
            fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
            for (k, level) in pyramid.levels().iter().enumerate() {
                save_image(level, args.out_dir.join(format!("level_{k:02}.png")))?;
                println!("level {k:2}: {}x{}", level.width(), level.height());
            }
            Ok(())
        }
        Command::Model(args) => {
            let img = load_image(&args.input)?;
            let (tree, report) = train_from_image(&img, &UpscaleConfig::default())?;
            tree.save(&args.out)?;
            println!(
                "trained on {} pairs: {} leaves, depth {}, train R2 {:.6}",
                report.n_samples, report.n_leaves, report.depth, report.r2_uniform
            );
            Ok(())
        }
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_upscale(args: UpscaleArgs) -> Result<()> {
    let img = load_image(&args.input)?;
    let mut cfg = UpscaleConfig {
        blur_enabled: !args.no_blur,
        retrain_per_step: args.retrain_per_step,
        ..UpscaleConfig::default()
    };
    if let Some(p) = args.blur_passes {
        cfg.blur_passes = p as usize;
    }
    if let Some(t) = args.augment {
        cfg.augment_transforms = t;
    }
    let factor = args.zoom as usize;

    let mut result = upscale(&img, factor, &cfg)?;
    save_image(&result.image, &args.output)?;

    if let Some(path) = &args.save_model {
        // Same training set and fit as the upscale; the fit is deterministic.
        let ts = training_set(&img, &cfg.augment_transforms)?;
        let tree = crate::cart::RegressionTree::fit(&ts, Default::default())?;
        tree.save(path)?;
    }

    println!(
        "{}x{} -> {}x{} ({} steps), {} pairs, {} leaves, train R2 {:.6}, {:.3}s",
        img.width(),
        img.height(),
        result.image.width(),
        result.image.height(),
        result.steps_applied,
        result.fit_report.n_samples,
        result.fit_report.n_leaves,
        result.fit_report.r2_uniform,
        result.timing.total_s
    );

    if let Some(path) = &args.report {
        if !args.timings {
            result.timing = StageTimings::default();
            result.fit_report.fit_time_s = 0.0;
        }
        let report = UpscaleReport {
            format_version: UPSCALE_REPORT_VERSION,
            input: Dims {
                width: img.width(),
                height: img.height(),
            },
            output: Dims {
                width: result.image.width(),
                height: result.image.height(),
            },
            factor,
            steps_applied: result.steps_applied,
            train_r2: result.fit_report.r2_uniform,
            n_samples: result.fit_report.n_samples,
            n_leaves: result.fit_report.n_leaves,
            depth: result.fit_report.depth,
            fit: &result.fit_report,
            timings: &result.timing,
            config: &cfg,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        factors: args.factors.iter().map(|&f| f as usize).collect(),
        upscale: UpscaleConfig::default(),
        record_timings: args.timings,
    };
    let report = run_corpus(&args.corpus, &cfg)?;
    report.write_json(&args.out)?;
    if let Some(csv) = &args.csv {
        report.write_csv(csv)?;
    }
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.image_id, s.reason);
    }
    print!("{}", report.summary_table());
    Ok(())
}
