use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use courtreg::court::common_difference;
use courtreg::heatmap::{DEFAULT_MIN_SUPPORT, DEFAULT_STRIDE};
use courtreg::io::{self, read_json, write_json};
use courtreg::overlay::{draw_template, LINE_COLOR, STROKE_PX};
use courtreg::pipeline::evaluate_manifest_file;
use courtreg::synth::{generate_dataset, CorruptionConfig, SynthOptions, TensorEncoding};
use courtreg::{
    build_layout, estimate_frame, perspective_offsets, CameraSide, CourtTemplate, EstimateConfig,
    Error, Homography, KeypointLayout, RansacConfig, SamplingSpec,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_FALLBACK: u8 = 3;

#[derive(Parser)]
#[command(name = "courtreg", version, about = "Court registration from keypoint heatmaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the keypoint layout and print the row gaps.
    Grid(GridArgs),
    /// Generate a synthetic dataset with ground-truth homographies.
    Synth(SynthArgs),
    /// Estimate the homography of a single heatmap tensor.
    Estimate(EstimateArgs),
    /// Evaluate every frame of a manifest against its ground truth.
    Eval(EvalArgs),
    /// Draw the court lines through a homography onto an image.
    Overlay(OverlayArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 1500.0)]
    width_cm: f64,
    #[arg(long, default_value_t = 2800.0)]
    length_cm: f64,
    #[arg(long, default_value_t = 7)]
    rows: usize,
    #[arg(long, default_value_t = 13)]
    cols: usize,
    #[arg(long, default_value_t = 175.0)]
    w0_cm: f64,
    /// Sideline the camera looks from.
    #[arg(long, value_enum, default_value_t = Side::YZero)]
    camera_side: Side,
    /// Where to write the layout JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    YZero,
    YMax,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    OneHot,
    SoftBlob,
    Labels,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of frames.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-class dropout probability.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Standard deviation of the per-class shift, input pixels.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// False blobs per frame.
    #[arg(long, default_value_t = 0)]
    blobs: usize,
    #[arg(long, value_enum, default_value_t = Encoding::OneHot)]
    encoding: Encoding,
    /// Gaussian width for `--encoding soft-blob`, heatmap pixels.
    #[arg(long, default_value_t = 2.0)]
    sigma_px: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct RansacArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 35.0)]
    threshold_px: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    min_support: usize,
}

impl RansacArgs {
    fn config(&self) -> EstimateConfig {
        EstimateConfig {
            ransac: RansacConfig {
                reproj_threshold_px: self.threshold_px,
                max_iterations: self.iterations,
                seed: self.seed,
                ..RansacConfig::default()
            },
            min_support: self.min_support,
            ..EstimateConfig::default()
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    heatmaps: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    fallback: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Input pixels per heatmap pixel.
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: usize,
    /// Exit with status 3 when the fallback is used.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    ransac: RansacArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    fallback: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    ransac: RansacArgs,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    image: PathBuf,
    /// Homography JSON, or an estimate result containing one.
    #[arg(long)]
    homography: PathBuf,
    /// Court template JSON, or a layout JSON containing one.
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e)
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn require_files(paths: &[&Path]) -> Result<(), Failure> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::Data(Error::Io {
                path: p.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            }));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HomographyDoc {
    Bare(Homography),
    Wrapped { homography: Homography },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TemplateDoc {
    Layout(Box<KeypointLayout>),
    Template(CourtTemplate),
}

fn grid(a: &GridArgs) -> Result<u8, Failure> {
    let spec = SamplingSpec {
        rows: a.rows,
        cols: a.cols,
        w0_cm: a.w0_cm,
        camera_side: match a.camera_side {
            Side::YZero => CameraSide::YZero,
            Side::YMax => CameraSide::YMax,
        },
    };
    spec.validate()?;
    let template = CourtTemplate::new(a.length_cm, a.width_cm)?;
    let offsets = perspective_offsets(a.width_cm, a.rows, a.w0_cm)?;
    let layout = build_layout(&template, &spec)?;

    let gaps: Vec<String> = offsets.windows(2).map(|w| format!("{:.3}", w[1] - w[0])).collect();
    let r = common_difference(a.width_cm, a.rows, a.w0_cm);
    println!("gaps_cm: {}", gaps.join(" "));
    println!("common_difference_cm: {r:.6}");
    if r.abs() < 1e-9 * a.width_cm {
        println!("note: w0 equals W/(N-1), the grid is uniform");
    }
    println!("classes: {}", layout.num_classes());
    if let Some(out) = &a.out {
        write_json(out, &layout)?;
    }
    Ok(0)
}

fn synth(a: &SynthArgs) -> Result<u8, Failure> {
    let opts = SynthOptions {
        corruption: CorruptionConfig {
            dropout_rate: a.dropout,
            jitter_sigma_px: a.jitter,
            false_blob_count: a.blobs,
            ..CorruptionConfig::default()
        },
        encoding: match a.encoding {
            Encoding::OneHot => TensorEncoding::OneHot,
            Encoding::SoftBlob => TensorEncoding::SoftBlob { sigma_px: a.sigma_px },
            Encoding::Labels => TensorEncoding::Labels,
        },
        ..SynthOptions::default()
    };
    opts.corruption.validate()?;
    let manifest = generate_dataset(a.n as usize, &opts, &a.out, a.seed, a.jobs)?;
    println!("wrote {} frames to {}", manifest.frames.len(), a.out.display());
    Ok(0)
}

fn estimate(a: &EstimateArgs) -> Result<u8, Failure> {
    require_files(&[&a.heatmaps, &a.layout, &a.fallback])?;
    let cfg = a.ransac.config();
    cfg.ransac.validate()?;
    if a.stride == 0 {
        return Err(Failure::Usage("--stride must be >= 1".into()));
    }
    let layout: KeypointLayout = read_json(&a.layout)?;
    let fallback: Homography = read_json(&a.fallback)?;
    let t = io::read_heatmaps(&a.heatmaps, layout.num_classes(), a.stride)?;
    let res = estimate_frame(&t, &layout, &cfg, &fallback)?;
    write_json(&a.out, &res)?;

    match res.fallback_reason {
        Some(reason) => println!(
            "fallback: {reason:?} ({} keypoints decoded)",
            res.decoded_count
        ),
        None => println!("inliers: {}/{}", res.inlier_count, res.decoded_count),
    }
    Ok(if a.strict && res.used_fallback { EXIT_FALLBACK } else { 0 })
}

fn eval(a: &EvalArgs) -> Result<u8, Failure> {
    require_files(&[&a.manifest, &a.layout, &a.fallback])?;
    let cfg = a.ransac.config();
    let layout: KeypointLayout = read_json(&a.layout)?;
    let fallback: Homography = read_json(&a.fallback)?;
    let report = evaluate_manifest_file(&a.manifest, &layout, &cfg, &fallback, a.jobs)?;
    write_json(&a.out, &report)?;

    println!("frames: {}", report.frames.len());
    println!("mean error: {:.2} cm", report.mean_error_cm);
    println!("below 100 cm: {:.1}%", report.pct_below_100cm);
    println!("fallbacks: {}", report.fallback_count);
    if report.failure_count > 0 {
        println!("failed frames: {}", report.failure_count);
    }
    Ok(0)
}

fn overlay(a: &OverlayArgs) -> Result<u8, Failure> {
    require_files(&[&a.image, &a.homography, &a.template])?;
    let h = match read_json::<HomographyDoc>(&a.homography)? {
        HomographyDoc::Bare(h) | HomographyDoc::Wrapped { homography: h } => h,
    };
    let template = match read_json::<TemplateDoc>(&a.template)? {
        TemplateDoc::Layout(l) => l.template.clone(),
        TemplateDoc::Template(t) => t,
    };
    template.validate()?;
    let mut img = image::open(&a.image)
        .map_err(|source| Error::Image {
            path: a.image.clone(),
            source,
        })?
        .to_rgb8();
    draw_template(&mut img, &h, &template, STROKE_PX, LINE_COLOR);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    img.save_with_format(&a.out, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: a.out.clone(),
            source,
        })?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let res = match &cli.command {
        Command::Grid(a) => grid(a),
        Command::Synth(a) => synth(a),
        Command::Estimate(a) => estimate(a),
        Command::Eval(a) => eval(a),
        Command::Overlay(a) => overlay(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
