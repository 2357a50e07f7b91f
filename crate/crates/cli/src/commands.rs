use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use obbkit::codec::rotated_nms;
use obbkit::eval::{
    evaluate, read_boxes, read_detections, read_ground_truth, render_ablation, render_table, write_detections,
    write_ground_truth, ApMode, DetectionRecord, EvalConfig, EvalReport, GroundTruthRecord,
};
use obbkit::fit::{demo_start, demo_target, fit_box, OptimizerConfig, Parameterization};
use obbkit::patch::{extract_patch, PatchSpec};
use obbkit::piou::{ln_piou_soft, piou_hard, RasterSpec, SoftKernelParams};
use obbkit::synth::{corrupt, gen_dataset, split, CorruptionConfig, Layout, SceneConfig};
use obbkit::{hbb_iou, skew_iou, ImageRaster};
use serde_json::json;

use crate::args::*;
use crate::svg::{render_svg, RenderStyle};

/// Bad flag combination detected after parsing; exits like a parse error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Output<'a> {
    path: Option<&'a Path>,
}

impl Output<'_> {
    fn write(&self, bytes: &[u8]) -> Result<()> {
        match self.path {
            Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_gt(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    read_ground_truth(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_dets(path: &Path) -> Result<Vec<DetectionRecord>> {
    read_detections(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let out = Output { path: cli.out.as_deref() };
    match cli.command {
        Command::Iou(a) => iou(a, cli.format, &out),
        Command::Nms(a) => nms(a, &out),
        Command::Synth(a) => synth(a, cli.seed, &out),
        Command::Corrupt(a) => corrupt_cmd(a, cli.seed, &out),
        Command::Eval(a) => eval(a, cli.format, &out),
        Command::Fit(a) => fit(a, cli.format, &out),
        Command::Patch(a) => patch(a, &out),
        Command::Render(a) => render(a, &out),
    }
}

fn iou(a: IouArgs, format: Format, out: &Output) -> Result<()> {
    let step = match a.step {
        Some(s) => s,
        None => 0.02 * a.a.short_side().min(a.b.short_side()),
    };
    let spec = RasterSpec::new(step).map_err(|e| usage(e.to_string()))?;
    let kp = SoftKernelParams::new(a.k).map_err(|e| usage(e.to_string()))?;
    let ln_soft = ln_piou_soft(&a.a, &a.b, spec, kp)?;
    let values = [
        ("skew_iou", skew_iou(&a.a, &a.b)),
        ("hbb_iou", hbb_iou(&a.a, &a.b)),
        ("piou_hard", piou_hard(&a.a, &a.b, spec)?),
        ("piou_soft", ln_soft.exp().max(f64::MIN_POSITIVE)),
        ("ln_piou_soft", ln_soft),
        ("step", step),
    ];
    let text = match format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                values.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            serde_json::to_string_pretty(&map)? + "\n"
        }
        Format::Text => values.iter().map(|(k, v)| format!("{k:<13}{v:.6}\n")).collect(),
    };
    out.write(text.as_bytes())
}

fn nms(a: NmsArgs, out: &Output) -> Result<()> {
    if !(0.0..=1.0).contains(&a.iou) {
        return Err(usage("--iou must lie in [0, 1]"));
    }
    let dets = load_dets(&a.dets)?;
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        let class = if a.class_agnostic { "" } else { d.class_label.as_str() };
        groups.entry((d.image_id.as_str(), class)).or_default().push(i);
    }
    let mut keep = Vec::new();
    for idx in groups.values() {
        let group: Vec<_> = idx.iter().map(|&i| (dets[i].bbox, dets[i].score)).collect();
        keep.extend(rotated_nms(&group, a.iou).into_iter().map(|k| idx[k]));
    }
    keep.sort_unstable();
    let kept: Vec<DetectionRecord> = keep.into_iter().map(|i| dets[i].clone()).collect();
    let mut buf = Vec::new();
    write_detections(&mut buf, &kept)?;
    out.write(&buf)
}

fn synth(a: SynthArgs, seed: u64, out: &Output) -> Result<()> {
    let cfg = SceneConfig {
        image_w: a.width,
        image_h: a.height,
        ship_count: a.ships,
        aspect_mean: a.aspect,
        layout: match a.layout {
            LayoutArg::Sparse => Layout::Sparse,
            LayoutArg::Harbor => Layout::HarborRows,
        },
        class_count: a.classes,
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let scenes = gen_dataset(&cfg, a.count)?;
    let gts: Vec<GroundTruthRecord> = scenes.iter().flat_map(|s| s.ground_truth.iter().cloned()).collect();
    if let Some(dir) = &a.images {
        fs::create_dir_all(dir)?;
        for s in &scenes {
            let path = dir.join(format!("{}.ppm", s.image_id));
            s.raster.write_ppm(BufWriter::new(File::create(&path)?))?;
        }
    }
    if let Some(dir) = &a.split_dir {
        fs::create_dir_all(dir)?;
        let ids: Vec<&str> = scenes.iter().map(|s| s.image_id.as_str()).collect();
        let (train, test) = split(&ids, a.split.0, a.split.1, seed)?;
        for (name, part) in [("train.txt", train), ("test.txt", test)] {
            let body: String = part.iter().map(|id| format!("{id}\n")).collect();
            fs::write(dir.join(name), body)?;
        }
    }
    let mut buf = Vec::new();
    write_ground_truth(&mut buf, &gts)?;
    out.write(&buf)
}

fn corrupt_cmd(a: CorruptArgs, seed: u64, out: &Output) -> Result<()> {
    let base = CorruptionConfig::default();
    let cfg = CorruptionConfig {
        center_std: base.center_std * a.noise,
        angle_std: base.angle_std * a.noise,
        size_std: base.size_std * a.noise,
        fn_rate: a.fn_rate,
        fp_rate: a.fp_rate,
        image_w: a.width,
        image_h: a.height,
        seed,
        ..base
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let gts = load_gt(&a.gt)?;
    let dets = corrupt(&gts, &cfg)?;
    let mut buf = Vec::new();
    write_detections(&mut buf, &dets)?;
    out.write(&buf)
}

fn eval(a: EvalArgs, format: Format, out: &Output) -> Result<()> {
    if !a.name.is_empty() && a.name.len() != a.dets.len() {
        return Err(usage("--name must be given once per --dets"));
    }
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(usage("--iou must lie in (0, 1]"));
    }
    let mut cfg = EvalConfig {
        iou_thresh: a.iou,
        ap_mode: if a.eleven_point { ApMode::ElevenPoint } else { ApMode::AllPoints },
        strict: !a.lenient,
        ..Default::default()
    };
    match a.classes.as_deref() {
        None => {}
        Some("auto") => cfg.classes.clear(),
        Some(list) => cfg.classes = list.split(',').map(|c| c.trim().to_owned()).collect(),
    }
    let gts = load_gt(&a.gt)?;
    let runs_in: Vec<(String, Vec<DetectionRecord>)> = a
        .dets
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let name = match a.name.get(i) {
                Some(n) => n.clone(),
                None => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            };
            Ok((name, load_dets(p)?))
        })
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.threads).build()?;
    let runs: Vec<(String, EvalReport)> = pool.install(|| {
        runs_in
            .iter()
            .map(|(name, dets)| Ok((name.clone(), evaluate(dets, &gts, &cfg)?)))
            .collect::<Result<_>>()
    })?;

    let text = match (format, runs.len()) {
        (Format::Json, 1) => runs[0].1.to_json() + "\n",
        (Format::Json, _) => {
            let items: Vec<_> = runs
                .iter()
                .map(|(n, r)| Ok(json!({ "name": n, "report": serde_json::to_value(r)? })))
                .collect::<Result<_>>()?;
            serde_json::to_string_pretty(&json!({ "runs": items }))? + "\n"
        }
        (Format::Text, 1) => render_table(&runs[0].1),
        (Format::Text, _) => {
            let mut s = render_ablation(&runs);
            for (name, r) in &runs {
                s.push_str(&format!("\n[{name}]\n{}", render_table(r)));
            }
            s
        }
    };
    out.write(text.as_bytes())
}

fn fit(a: FitArgs, format: Format, out: &Output) -> Result<()> {
    let target = a.target.unwrap_or_else(demo_target);
    let init = a.init.unwrap_or_else(|| demo_start(&target));
    let cfg = OptimizerConfig {
        base_lr: a.lr,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        warmup_steps: a.warmup,
        max_steps: a.max_steps,
        stop_iou: a.stop_iou,
        raster: RasterSpec::new(a.step).map_err(|e| usage(e.to_string()))?,
        parameterization: match a.param {
            ParamArg::Pixels => Parameterization::Pixels,
            ParamArg::Deltas => Parameterization::AnchorDeltas,
        },
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let kernel = SoftKernelParams::new(a.k).map_err(|e| usage(e.to_string()))?;
    let traj = fit_box(&init, &target, &cfg, kernel)?;
    let mut buf = Vec::new();
    match format {
        Format::Text => traj.write_csv(&mut buf)?,
        Format::Json => {
            let rows: Vec<_> = traj
                .steps
                .iter()
                .map(|s| {
                    let b = &s.bbox;
                    json!({
                        "step": s.step,
                        "box": [b.cx, b.cy, b.w, b.h, b.theta.to_degrees()],
                        "loss": s.loss,
                        "iou": s.iou,
                        "lr": s.lr,
                    })
                })
                .collect();
            buf = (serde_json::to_string_pretty(&rows)? + "\n").into_bytes();
        }
    }
    out.write(&buf)
}

fn read_image(path: &Path) -> Result<ImageRaster> {
    let mut data = Vec::new();
    open(path)?.read_to_end(&mut data)?;
    let img = if data.starts_with(obbkit::raster::OBBR_MAGIC) {
        ImageRaster::read_obbr(&data[..])
    } else {
        ImageRaster::read_ppm(&data[..])
    };
    img.with_context(|| format!("reading {}", path.display()))
}

fn patch(a: PatchArgs, out: &Output) -> Result<()> {
    let img = read_image(&a.image)?;
    let spec = PatchSpec { out_long: a.long, out_short: a.short, channels: 3, fill: a.fill };
    let p = extract_patch(&img, &a.bbox, &spec)?;
    let mut buf = Vec::new();
    if a.obbr {
        p.write_obbr(&mut buf)?;
    } else {
        p.write_ppm(&mut buf)?;
    }
    out.write(&buf)
}

fn render(a: RenderArgs, out: &Output) -> Result<()> {
    if !(a.width > 0.0 && a.height > 0.0 && a.stroke > 0.0) {
        return Err(usage("--width, --height and --stroke must be positive"));
    }
    let mut boxes = read_boxes(open(&a.boxes)?).with_context(|| format!("reading {}", a.boxes.display()))?;
    if let Some(id) = &a.image_id {
        boxes.retain(|(r, _)| &r.image_id == id);
    }
    let style = RenderStyle { stroke_width: a.stroke, labels: !a.no_labels, scores: a.scores, ..Default::default() };
    out.write(render_svg(&boxes, a.width, a.height, &style).as_bytes())
}
