use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obbkit::OrientedBox;

/// Oriented bounding box toolkit.
///
/// Boxes are written `cx,cy,w,h,theta` with theta in degrees, in flags and in
/// every file format. Exit status: 0 success, 1 usage error, 2 data error.
#[derive(Debug, Parser)]
#[command(name = "obbkit", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Skew, horizontal, hard-pixel and soft-pixel IoU of two boxes.
    Iou(IouArgs),
    /// Rotated non-maximum suppression over a detections file.
    Nms(NmsArgs),
    /// Generate synthetic ship scenes and their ground truth.
    Synth(SynthArgs),
    /// Simulate detector output from ground truth.
    Corrupt(CorruptArgs),
    /// Per-class AP and mAP of one or more detection files.
    Eval(EvalArgs),
    /// Fit one box onto another by gradient descent on the PIoU loss.
    Fit(FitArgs),
    /// Extract the orientation-normalized patch under a box.
    Patch(PatchArgs),
    /// Draw boxes as an SVG overlay.
    Render(RenderArgs),
}

pub fn parse_box(s: &str) -> Result<OrientedBox, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<_, _>>()?;
    let [cx, cy, w, h, deg] = vals[..] else {
        return Err(format!("expected cx,cy,w,h,theta_deg, got {} values", vals.len()));
    };
    OrientedBox::from_degrees(cx, cy, w, h, deg).map_err(|e| e.to_string())
}

fn parse_ratio(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected train:test, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("`{t}` is not a positive integer"));
    let (a, b) = (num(a)?, num(b)?);
    if a == 0 || b == 0 {
        return Err("ratio parts must be positive".into());
    }
    Ok((a, b))
}

#[derive(Debug, Args)]
pub struct IouArgs {
    #[arg(value_parser = parse_box, allow_hyphen_values = true)]
    pub a: OrientedBox,
    #[arg(value_parser = parse_box, allow_hyphen_values = true)]
    pub b: OrientedBox,
    /// Raster step in pixels; defaults to 2% of the smallest extent.
    #[arg(long)]
    pub step: Option<f64>,
    /// Soft kernel steepness.
    #[arg(long, default_value_t = 10.0)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct NmsArgs {
    /// Detections JSONL.
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long, default_value_t = obbkit::codec::DEFAULT_NMS_IOU)]
    pub iou: f64,
    /// Suppress across classes within an image.
    #[arg(long)]
    pub class_agnostic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Sparse,
    Harbor,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of scenes.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Ships per scene.
    #[arg(long, default_value_t = 12)]
    pub ships: usize,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Sparse)]
    pub layout: LayoutArg,
    /// Mean long:short ratio of the ships.
    #[arg(long, default_value_t = 6.0)]
    pub aspect: f64,
    /// Number of classes used, taken in table order.
    #[arg(long, default_value_t = 7)]
    pub classes: usize,
    /// Directory for one PPM per scene.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Directory for `train.txt` and `test.txt` image-id lists.
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
    /// Train:test ratio used with --split-dir.
    #[arg(long, value_parser = parse_ratio, default_value = "4:1")]
    pub split: (u32, u32),
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Ground-truth JSONL.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub fn_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub fp_rate: f64,
    /// Multiplier on the default jitter (2 px center, 0.05 rad angle, 5% size).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Image extent in which false positives are drawn.
    #[arg(long, default_value_t = 512.0)]
    pub width: f64,
    #[arg(long, default_value_t = 512.0)]
    pub height: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth JSONL.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections JSONL; repeat to compare runs.
    #[arg(long, required = true)]
    pub dets: Vec<PathBuf>,
    /// Row names for repeated --dets, in order; file stems by default.
    #[arg(long)]
    pub name: Vec<String>,
    #[arg(long, default_value_t = obbkit::eval::DEFAULT_MATCH_IOU)]
    pub iou: f64,
    /// 11-point interpolated AP instead of all-points.
    #[arg(long)]
    pub eleven_point: bool,
    /// Count detections on unknown images as false positives.
    #[arg(long)]
    pub lenient: bool,
    /// Comma-separated report classes; the seven ship classes by default,
    /// `auto` for every label present.
    #[arg(long)]
    pub classes: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Pixels,
    Deltas,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_box, allow_hyphen_values = true)]
    pub target: Option<OrientedBox>,
    /// Start box; the target shifted by (+8, +8) px, scaled 1.2 and turned
    /// 0.15 rad by default.
    #[arg(long, value_parser = parse_box, allow_hyphen_values = true)]
    pub init: Option<OrientedBox>,
    #[arg(long, default_value_t = 500)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0.95)]
    pub stop_iou: f64,
    /// Raster step of the loss grid in pixels.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    #[arg(long, default_value_t = 10.0)]
    pub k: f64,
    #[arg(long, value_enum, default_value_t = ParamArg::Deltas)]
    pub param: ParamArg,
}

#[derive(Debug, Args)]
pub struct PatchArgs {
    /// Source image, PPM/PGM or OBBR.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long = "box", value_parser = parse_box, allow_hyphen_values = true)]
    pub bbox: OrientedBox,
    #[arg(long, default_value_t = 600)]
    pub long: usize,
    #[arg(long, default_value_t = 100)]
    pub short: usize,
    /// Value for samples outside the image.
    #[arg(long, default_value_t = 0.0)]
    pub fill: f64,
    /// Write OBBR floats instead of PPM.
    #[arg(long)]
    pub obbr: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Ground-truth or detections JSONL.
    #[arg(long)]
    pub boxes: PathBuf,
    /// Only draw boxes of this image.
    #[arg(long)]
    pub image_id: Option<String>,
    #[arg(long, default_value_t = 512.0)]
    pub width: f64,
    #[arg(long, default_value_t = 512.0)]
    pub height: f64,
    #[arg(long, default_value_t = 2.0)]
    pub stroke: f64,
    #[arg(long)]
    pub no_labels: bool,
    /// Append detection scores to labels.
    #[arg(long)]
    pub scores: bool,
}
