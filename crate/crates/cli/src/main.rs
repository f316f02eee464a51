//! `retinoblob` — fundus anomaly detection from the command line.
//!
//! Subcommands: `detect` runs the pipeline on one image and writes the
//! annotated result, `eval` scores a directory of images against
//! ground-truth masks into a stage-table CSV, `synth` renders synthetic
//! fundus images with exact ground truth.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use retinoblob_core::blob::blob_table_csv;
use retinoblob_core::config::{PipelineConfig, Scoring};
use retinoblob_core::error::Error as CoreError;
use retinoblob_core::eval::{stage_recalls, write_report, EvaluationReport, GroundTruth};
use retinoblob_core::pipeline::run_pipeline;
use retinoblob_core::postprocess::{annotation_table_csv, render_annotations};
use retinoblob_core::raster::{load_color, load_mask, save_color, save_gray, save_mask};
use retinoblob_core::segmentation::preprocess_stages;
use retinoblob_core::synth::synthesize_fundus;

#[derive(Parser)]
#[command(name = "retinoblob", version, about = "Detect bright and dark lesions in fundus images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect lesions in one image and write the annotated result.
    Detect(DetectArgs),
    /// Run the pipeline over an image directory and score it against
    /// ground-truth masks.
    Eval(EvalArgs),
    /// Generate synthetic fundus images with ground-truth masks.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Input image (PNG or binary PPM/PGM).
    image: PathBuf,
    /// Pipeline config file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the intermediate pre-processing rasters.
    #[arg(long)]
    dump_stages: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of input images.
    img_dir: PathBuf,
    /// Directory of ground-truth masks with matching file stems.
    gt_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Scoring mode for the final stage.
    #[arg(long)]
    scoring: Option<Scoring>,
    /// Also write per-image annotated images into this directory.
    #[arg(long)]
    annotated_dir: Option<PathBuf>,
    /// Number of images processed concurrently.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// RNG seed; output is deterministic in it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of image/ground-truth pairs.
    #[arg(long, default_value_t = 10)]
    count: u32,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    /// Override the number of exudates per image.
    #[arg(long)]
    exudates: Option<u32>,
    /// Override the number of haemorrhages per image.
    #[arg(long)]
    haemorrhages: Option<u32>,
    /// Override the pixel-noise sigma.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit 0.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// 2 for data problems (bad content, mismatches), 3 for I/O.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Io { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => {
            let cfg = PipelineConfig::load(p)?;
            Ok(cfg)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        anyhow::Error::new(CoreError::Io { path: path.to_path_buf(), source: e })
    })
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text)
        .map_err(|e| anyhow::Error::new(CoreError::Io { path: path.to_path_buf(), source: e }))
}

fn cmd_detect(args: DetectArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let img = load_color(&args.image)
        .map_err(|e| anyhow::Error::new(e).context("detect: loading input image"))?;
    create_dir(&args.out)?;

    if args.dump_stages {
        let stages = preprocess_stages(&img, &cfg)
            .map_err(|e| anyhow::Error::new(e).context("detect: pre-processing"))?;
        save_gray(&stages.gray_raw, &args.out.join("01_gray.png"))?;
        save_gray(&stages.gray_clahe, &args.out.join("02_clahe.png"))?;
        save_gray(&stages.bright, &args.out.join("03_bright.png"))?;
        save_mask(&stages.sei, &args.out.join("04_sei.png"))?;
        save_gray(&stages.dark, &args.out.join("05_dark.png"))?;
        save_mask(&stages.shi, &args.out.join("06_shi.png"))?;
    }

    let run = run_pipeline(&img, &cfg)
        .map_err(|e| anyhow::Error::new(e).context("detect: pipeline"))?;
    let (tw, th) = cfg.standard_size;
    let resized = retinoblob_core::raster::resize_to_standard(&img, tw, th)?;
    let annotated = render_annotations(&resized, &run.annotations);
    save_color(&annotated, &args.out.join("annotated.png"))?;
    write_text(&args.out.join("candidates.csv"), &blob_table_csv(&run.candidates))?;
    write_text(&args.out.join("annotations.csv"), &annotation_table_csv(&run.annotations))?;
    println!(
        "{}: {} blobs, {} candidates",
        args.image.display(),
        run.blobs.len(),
        run.candidates.len()
    );
    Ok(())
}

fn list_images(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| anyhow::Error::new(CoreError::Io { path: dir.to_path_buf(), source: e }))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png" | "ppm" | "pgm" | "pnm")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(scoring) = args.scoring {
        cfg.scoring = scoring;
    }
    let images = list_images(&args.img_dir)?;
    if images.is_empty() {
        anyhow::bail!(
            "no images found in {} (expected .png/.ppm/.pgm)",
            args.img_dir.display()
        );
    }

    // Pair every image with its same-stem mask up front so a missing mask
    // fails before any work happens.
    let mut pairs = Vec::new();
    for img_path in &images {
        let stem = img_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let mask_stem = stem.replace("img", "gt");
        let candidates = [
            args.gt_dir.join(format!("{stem}.png")),
            args.gt_dir.join(format!("{stem}.pgm")),
            args.gt_dir.join(format!("{mask_stem}.png")),
            args.gt_dir.join(format!("{mask_stem}.pgm")),
        ];
        let gt_path = candidates.iter().find(|p| p.exists()).cloned().ok_or_else(|| {
            anyhow::anyhow!(
                "no ground-truth mask for {} in {}",
                img_path.display(),
                args.gt_dir.display()
            )
        })?;
        pairs.push((img_path.clone(), gt_path));
    }

    let jobs = args.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| anyhow::anyhow!("cannot build thread pool: {e}"))?;

    struct ImageResult {
        name: String,
        metrics: Vec<retinoblob_core::eval::StageMetric>,
        annotated: Option<retinoblob_core::raster::ColorImage>,
    }

    let want_annotated = args.annotated_dir.is_some();
    let results: Vec<anyhow::Result<ImageResult>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(img_path, gt_path)| {
                let name = img_path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                let img = load_color(img_path)?;
                let gt = GroundTruth { mask: load_mask(gt_path)? };
                let (tw, th) = cfg.standard_size;
                if gt.mask.dimensions() != (tw, th) {
                    return Err(anyhow::Error::new(CoreError::DimensionMismatch {
                        expected_w: tw,
                        expected_h: th,
                        actual_w: gt.mask.width(),
                        actual_h: gt.mask.height(),
                    })
                    .context(format!("ground truth {}", gt_path.display())));
                }
                let run = run_pipeline(&img, &cfg)?;
                let metrics =
                    stage_recalls(&run.trace, &run.blobs, &gt, (tw, th), cfg.scoring)?;
                let annotated = want_annotated.then(|| {
                    let resized = retinoblob_core::raster::resize_to_standard(&img, tw, th)
                        .expect("resize validated");
                    render_annotations(&resized, &run.annotations)
                });
                Ok(ImageResult { name, metrics, annotated })
            })
            .collect()
    });

    let mut report = EvaluationReport::default();
    let annotated_dir = args.annotated_dir.as_deref();
    if let Some(dir) = annotated_dir {
        create_dir(dir)?;
    }
    for result in results {
        let r = result?;
        if let (Some(dir), Some(annotated)) = (annotated_dir, &r.annotated) {
            save_color(annotated, &dir.join(format!("{}_annotated.png", r.name)))?;
        }
        report.push_image(r.name, r.metrics);
    }

    write_report(&report, &args.out)?;
    println!("mean final recall: {:.2}%", report.mean_final_recall() * 100.0);
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut spec = cfg.synth;
    if let Some(n) = args.exudates {
        spec.exudates = n;
    }
    if let Some(n) = args.haemorrhages {
        spec.haemorrhages = n;
    }
    if let Some(s) = args.noise_sigma {
        spec.noise_sigma = s;
    }
    spec.validate()?;
    if args.count < 1 {
        anyhow::bail!("synth --count must be at least 1");
    }
    create_dir(&args.out)?;
    for i in 0..args.count {
        let (img, gt) = synthesize_fundus(args.seed.wrapping_add(i as u64), &spec);
        save_color(&img, &args.out.join(format!("img_{i:03}.png")))?;
        save_mask(&gt.mask, &args.out.join(format!("gt_{i:03}.png")))?;
    }
    println!("wrote {} image/mask pairs to {}", args.count, args.out.display());
    Ok(())
}
