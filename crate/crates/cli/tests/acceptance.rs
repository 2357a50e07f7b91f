//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use obbkit::codec::{decode, encode, rotated_nms};
use obbkit::eval::{
    average_precision, evaluate, render_table, ApMode, DetectionRecord, EvalConfig, SHIP_CLASSES,
};
use obbkit::fit::{demo_start, demo_target, fit_box, OptimizerConfig};
use obbkit::patch::{extract_patch, PatchSpec};
use obbkit::piou::{
    ln_piou_soft, piou_hard, piou_loss, piou_soft, piou_soft_grad, soft_loss_fixed_grid, LossConfig, PiouVariant,
    PositivePairSet, RasterSpec, SoftKernelParams,
};
use obbkit::synth::{corrupt, gen_dataset, split, CorruptionConfig, SceneConfig};
use obbkit::{skew_iou, ImageRaster, OrientedBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_box(r: &mut ChaCha8Rng, (cx, cy): (f64, f64), spread: f64, short: (f64, f64), aspect: (f64, f64)) -> OrientedBox {
    let h = r.random_range(short.0..=short.1);
    let w = h * r.random_range(aspect.0..=aspect.1);
    let (w, h) = if r.random::<bool>() { (w, h) } else { (h, w) };
    OrientedBox {
        cx: cx + r.random_range(-spread..=spread),
        cy: cy + r.random_range(-spread..=spread),
        w,
        h,
        theta: r.random_range(-PI..PI),
    }
}

fn oracle_agreement() -> Outcome {
    let mut r = rng(1);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    let n = 1000;
    for _ in 0..n {
        let a = random_box(&mut r, (0.0, 0.0), 0.0, (4.0, 30.0), (1.0, 8.0));
        let b = random_box(&mut r, (0.0, 0.0), a.short_side(), (4.0, 30.0), (1.0, 8.0));
        let step = 0.02 * a.short_side().min(b.short_side());
        let err = (piou_hard(&a, &b, RasterSpec { step }).unwrap() - skew_iou(&a, &b)).abs();
        worst = worst.max(err);
        within += (err <= 0.02) as usize;
    }
    let sq = OrientedBox::new(0.0, 0.0, 10.0, 10.0, 0.0).unwrap();
    let squares = skew_iou(&sq, &OrientedBox { theta: FRAC_PI_4, ..sq });
    let frac = within as f64 / n as f64;
    let pass = frac >= 0.99 && (squares - 1.0 / SQRT_2).abs() <= 1e-6;
    outcome(pass, format!("{:.1}% of pairs within 0.02 (max {worst:.4}); 45deg squares {squares:.10}", 100.0 * frac))
}

fn gradient_check() -> Outcome {
    let mut r = rng(2);
    let kp = SoftKernelParams::default();
    // two samples per kernel transition width
    let spec = RasterSpec { step: 2.0 / kp.k };
    let delta = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let target = random_box(&mut r, (0.0, 0.0), 0.0, (6.0, 12.0), (1.0, 8.0));
        let mut pred = random_box(&mut r, (0.0, 0.0), 0.3 * target.short_side(), (6.0, 12.0), (1.0, 8.0));
        pred.theta = target.theta + r.random_range(-0.3..0.3);
        let grad = piou_soft_grad(&pred, &target, spec, kp).unwrap();
        let p = pred.to_array();
        for c in 0..5 {
            let (mut hi, mut lo) = (p, p);
            hi[c] += delta;
            lo[c] -= delta;
            let f = |v: [f64; 5]| soft_loss_fixed_grid(&OrientedBox::from_array(v), &target, spec, kp).unwrap();
            let fd = (f(hi) - f(lo)) / (2.0 * delta);
            let rel = (grad[c] - fd).abs() / grad[c].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    outcome(worst <= 1e-3, format!("max relative error {worst:.2e} over 100 pairs x 5 components (grid step {} px)", spec.step))
}

fn positivity() -> Outcome {
    let mut r = rng(3);
    let kp = SoftKernelParams::default();
    let mut positive = 0;
    let mut disjoint = 0;
    let n = 10_000;
    for i in 0..n {
        let (spread, short) = if i % 100 == 0 { (1500.0, (10.0, 40.0)) } else { (60.0, (0.5, 30.0)) };
        let a = random_box(&mut r, (0.0, 0.0), spread, short, (1.0, 8.0));
        let b = random_box(&mut r, (0.0, 0.0), spread, short, (1.0, 8.0));
        let min_short = a.short_side().min(b.short_side());
        let step = if spread > 100.0 { 2.0 } else { (0.25 * min_short).min(1.0) };
        let spec = RasterSpec { step };
        disjoint += (skew_iou(&a, &b) == 0.0) as usize;
        let ln = ln_piou_soft(&a, &b, spec, kp).unwrap();
        let v = piou_soft(&a, &b, spec, kp).unwrap();
        positive += (ln.is_finite() && v > 0.0) as usize;
    }
    let a = OrientedBox::new(0.0, 0.0, 30.0, 5.0, 0.0).unwrap();
    let far = OrientedBox::new(400.0, 0.0, 30.0, 5.0, 1.0).unwrap();
    let pairs = PositivePairSet::new(vec![(a, far)]).unwrap();
    let hard = piou_loss(&pairs, &LossConfig::new(PiouVariant::Hard, RasterSpec { step: 1.0 })).unwrap();
    let pass = positive == n && hard.is_finite();
    outcome(
        pass,
        format!("{positive}/{n} positive ({disjoint} disjoint pairs); hard loss on disjoint pair {hard:.4}"),
    )
}

fn codec_and_nms() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let g = random_box(&mut r, (300.0, 300.0), 300.0, (2.0, 80.0), (1.0, 8.0));
        let a = random_box(&mut r, (300.0, 300.0), 300.0, (2.0, 80.0), (1.0, 8.0));
        let back = decode(&encode(&g, &a).unwrap(), &a).unwrap().to_array();
        let want = g.canonicalize().unwrap().to_array();
        for (x, y) in back.iter().zip(want) {
            worst = worst.max((x - y).abs());
        }
    }
    let mut equal = 0;
    for set in 0..100 {
        let centers: Vec<(f64, f64)> =
            (0..20).map(|_| (r.random_range(0.0..400.0), r.random_range(0.0..400.0))).collect();
        let dets: Vec<(OrientedBox, f64)> = (0..200)
            .map(|_| {
                let c = centers[r.random_range(0..centers.len())];
                (random_box(&mut r, c, 8.0, (6.0, 20.0), (1.0, 6.0)), r.random_range(0..50) as f64 / 50.0)
            })
            .collect();
        let thresh = [0.1, 0.3, 0.5, 0.7][set % 4];
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&i, &j| dets[j].1.partial_cmp(&dets[i].1).unwrap());
        let mut reference: Vec<usize> = Vec::new();
        for i in order {
            if reference.iter().all(|&k| skew_iou(&dets[k].0, &dets[i].0) <= thresh) {
                reference.push(i);
            }
        }
        equal += (rotated_nms(&dets, thresh) == reference) as usize;
    }
    outcome(
        worst <= 1e-9 && equal == 100,
        format!("round trip max field error {worst:.2e} on 10000 pairs; NMS equal to reference on {equal}/100 sets"),
    )
}

fn evaluation() -> Outcome {
    let ap = average_precision(&[true, false, true], 2, ApMode::AllPoints);
    let scenes = gen_dataset(&SceneConfig { seed: 5, ..Default::default() }, 10).unwrap();
    let gts: Vec<_> = scenes.into_iter().flat_map(|s| s.ground_truth).collect();
    let perfect: Vec<DetectionRecord> = gts.iter().map(|g| DetectionRecord::from_ground_truth(g, 0.9).unwrap()).collect();
    let cfg = EvalConfig::default();
    let full = evaluate(&perfect, &gts, &cfg).unwrap();
    let dropped: Vec<DetectionRecord> = perfect.iter().filter(|d| d.class_label != "Frigates").cloned().collect();
    let six = evaluate(&dropped, &gts, &cfg).unwrap().map;

    let table = render_table(&full);
    let header = table.lines().nth(1).unwrap_or("");
    let mut at = 0;
    let mut in_order = true;
    for name in SHIP_CLASSES {
        match header[at..].find(name) {
            Some(i) => at += i + name.len(),
            None => in_order = false,
        }
    }
    in_order &= header.trim_end().ends_with("mAP");
    let pass = (ap - 5.0 / 6.0).abs() <= 1e-9 && full.map == 1.0 && (six - 6.0 / 7.0).abs() <= 1e-9 && in_order;
    outcome(
        pass,
        format!(
            "AP(TP,FP,TP | 2 GT) = {ap:.9}; perfect mAP = {}; one class dropped = {six:.9}; table header {}",
            full.map,
            if in_order { "ok" } else { "wrong" }
        ),
    )
}

fn aspect_motivation() -> Outcome {
    let square = OrientedBox::new(0.0, 0.0, 30.0, 30.0, 0.0).unwrap();
    let ship = OrientedBox::new(0.0, 0.0, 60.0, 10.0, 0.0).unwrap();
    let mut cells = Vec::new();
    let mut pass = true;
    for delta in [0.05, 0.1, 0.2, 0.4, FRAC_PI_4] {
        let s = skew_iou(&square, &OrientedBox { theta: delta, ..square });
        let e = skew_iou(&ship, &OrientedBox { theta: delta, ..ship });
        pass &= e < s;
        cells.push(format!("{delta:.2}: {e:.3} < {s:.3}"));
    }
    outcome(pass, format!("6:1 vs 1:1 IoU at offset {}", cells.join(", ")))
}

fn fit_demo() -> Outcome {
    let start = Instant::now();
    let target = demo_target();
    let cfg = OptimizerConfig::default();
    let kp = SoftKernelParams::default();
    let demo = fit_box(&demo_start(&target), &target, &cfg, kp).unwrap();
    let reached = demo.steps_to(0.9);

    let mut r = rng(7);
    let mut improved = 0;
    let mut runs = 0;
    while runs < 50 {
        let init = OrientedBox {
            cx: target.cx + r.random_range(-12.0..12.0),
            cy: target.cy + r.random_range(-12.0..12.0),
            w: target.w * r.random_range(0.7..1.4),
            h: target.h * r.random_range(0.7..1.4),
            theta: target.theta + r.random_range(-0.4..0.4),
        };
        if skew_iou(&init, &target) < 0.2 {
            continue;
        }
        runs += 1;
        let t = fit_box(&init, &target, &cfg, kp).unwrap();
        improved += (t.last().loss < t.first().loss) as usize;
    }
    let elapsed = start.elapsed();
    let pass = reached.is_some_and(|s| s <= 500) && improved == 50 && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "IoU {:.3} -> 0.9 at step {}; {improved}/50 starts reduce loss",
            demo.first().iou,
            reached.map_or("never".into(), |s| s.to_string()),
        ),
    )
}

fn patch_extraction() -> Outcome {
    let mut r = rng(8);
    let (w, h) = (700, 160);
    let samples: Vec<f64> = (0..w * h * 3).map(|_| r.random::<f64>()).collect();
    let img = ImageRaster::new(w, h, 3, samples).unwrap();
    let spec = PatchSpec::default();

    let ident = OrientedBox::new(340.0, 80.0, 600.0, 100.0, 0.0).unwrap();
    let p = extract_patch(&img, &ident, &spec).unwrap();
    let mut exact = true;
    for y in 0..100 {
        for x in 0..600 {
            for c in 0..3 {
                exact &= p.get(x, y, c) == img.get(40 + x, 30 + y, c);
            }
        }
    }

    let mut worst: f64 = 0.0;
    let mut dims = true;
    for _ in 0..20 {
        let b = random_box(&mut r, (350.0, 80.0), 200.0, (3.0, 60.0), (1.0, 8.0));
        let a = extract_patch(&img, &b, &spec).unwrap();
        let f = extract_patch(&img, &OrientedBox { theta: b.theta + PI, ..b }, &spec).unwrap();
        dims &= (a.height(), a.width(), a.channels()) == (100, 600, 3);
        for y in 0..100 {
            for x in 0..600 {
                for c in 0..3 {
                    worst = worst.max((a.get(x, y, c) - f.get(599 - x, 99 - y, c)).abs());
                }
            }
        }
    }
    outcome(
        exact && worst <= 1e-9 && dims,
        format!("identity warp bit-exact: {exact}; theta+pi max deviation {worst:.1e}; all outputs 100x600x3: {dims}"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_obbkit")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn end_to_end() -> Outcome {
    let pipeline = |dir: &Path, threads: &str| {
        let gt = run_cli(dir, &["synth", "--count", "16", "--seed", "21", "--layout", "harbor"]);
        std::fs::write(dir.join("gt.jsonl"), &gt).unwrap();
        let dets = run_cli(dir, &["corrupt", "--gt", "gt.jsonl", "--seed", "22"]);
        std::fs::write(dir.join("dets.jsonl"), &dets).unwrap();
        let report = run_cli(dir, &["eval", "--gt", "gt.jsonl", "--dets", "dets.jsonl", "--threads", threads, "--format", "json"]);
        (gt, dets, report)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path(), "1");
    let second = pipeline(b.path(), "4");
    let identical = first == second;

    let clean = run_cli(a.path(), &["corrupt", "--gt", "gt.jsonl", "--fn-rate", "0", "--fp-rate", "0", "--noise", "0"]);
    std::fs::write(a.path().join("clean.jsonl"), clean).unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&run_cli(a.path(), &["eval", "--gt", "gt.jsonl", "--dets", "clean.jsonl", "--format", "json"]))
            .unwrap();
    let map = report["mAP"].as_f64().unwrap_or(f64::NAN);

    // the library path must agree with the files
    let scenes = gen_dataset(&SceneConfig { seed: 21, layout: obbkit::synth::Layout::HarborRows, ..Default::default() }, 16).unwrap();
    let gts: Vec<_> = scenes.into_iter().flat_map(|s| s.ground_truth).collect();
    let zero = evaluate(&corrupt(&gts, &CorruptionConfig::clean(0)).unwrap(), &gts, &EvalConfig::default()).unwrap().map;

    outcome(
        identical && map == 1.0 && zero == 1.0,
        format!("byte-identical across runs and 1 vs 4 threads: {identical}; zero-corruption mAP {map}"),
    )
}

fn split_fidelity() -> Outcome {
    let items: Vec<u32> = (0..2021).collect();
    let (train, test) = split(&items, 4, 1, 0).unwrap();
    outcome((train.len(), test.len()) == (1617, 404), format!("2021 items at 4:1 -> {}/{}", train.len(), test.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, u64, fn() -> Outcome); 10] = [
        ("C1", "oracle agreement", 30, oracle_agreement),
        ("C2", "gradient check", 60, gradient_check),
        ("C3", "positivity", 0, positivity),
        ("C4", "codec round trip and NMS", 0, codec_and_nms),
        ("C5", "evaluation correctness", 0, evaluation),
        ("C6", "aspect-ratio motivation", 0, aspect_motivation),
        ("C7", "fit demo", 120, fit_demo),
        ("C8", "patch extraction", 0, patch_extraction),
        ("C9", "end-to-end determinism", 0, end_to_end),
        ("C10", "split fidelity", 0, split_fidelity),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let mut o = check();
        let secs = start.elapsed().as_secs_f64();
        if limit > 0 && secs >= limit as f64 {
            o.pass = false;
            o.detail.push_str(&format!("; over the {limit} s budget"));
        }
        failed += !o.pass as usize;
        println!("[{}] {id} {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
