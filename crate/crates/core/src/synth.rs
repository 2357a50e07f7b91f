//! Deterministic synthetic ship scenes and a detector stand-in.
//!
//! All randomness comes from ChaCha8 streams keyed by an explicit 64-bit seed
//! and a stream number, so a scene depends only on `(seed, scene index)`.
//! Scene `i` draws geometry from stream `2i` and pixel noise from `2i + 1`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{DetectionRecord, GroundTruthRecord, SHIP_CLASSES};
use crate::geometry::{intersection_area, OrientedBox};
use crate::raster::ImageRaster;

pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

const CORRUPTION_STREAM: u64 = 0xC0;
const SPLIT_STREAM: u64 = 0x5B;

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Sparse,
    /// Parallel ships moored side by side.
    HarborRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub image_w: usize,
    pub image_h: usize,
    pub ship_count: usize,
    /// Mean long:short ratio.
    pub aspect_mean: f64,
    /// Relative standard deviation of the ratio.
    pub aspect_jitter: f64,
    /// Long-side range in pixels.
    pub length_range: (f64, f64),
    pub layout: Layout,
    pub class_count: usize,
    /// Standard deviation of the additive pixel noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_w: 512,
            image_h: 512,
            ship_count: 12,
            aspect_mean: 6.0,
            aspect_jitter: 0.1,
            length_range: (40.0, 120.0),
            layout: Layout::Sparse,
            class_count: SHIP_CLASSES.len(),
            noise_std: 0.02,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_owned()));
        if self.image_w == 0 || self.image_h == 0 || self.ship_count == 0 {
            return bad("image dimensions and ship count must be positive");
        }
        if !(self.aspect_mean > 1.0 && self.aspect_mean.is_finite()) {
            return bad("aspect_mean must be > 1");
        }
        if !(self.aspect_jitter >= 0.0 && self.noise_std >= 0.0) {
            return bad("jitter and noise must be >= 0");
        }
        let (lo, hi) = self.length_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("length_range must satisfy 0 < lo <= hi");
        }
        if self.class_count == 0 || self.class_count > SHIP_CLASSES.len() {
            return bad("class_count must be between 1 and 7");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_id: String,
    pub raster: ImageRaster,
    pub ground_truth: Vec<GroundTruthRecord>,
}

pub fn scene_id(index: u64) -> String {
    format!("scene_{index:05}")
}

fn inside_image(b: &OrientedBox, w: f64, h: f64) -> bool {
    b.corners().vertices().iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= h)
}

fn sample_ship(rng: &mut ChaCha8Rng, cfg: &SceneConfig, theta: f64) -> OrientedBox {
    let (lo, hi) = cfg.length_range;
    let long = lo + (hi - lo) * rng.random::<f64>();
    let aspect = (cfg.aspect_mean * (1.0 + cfg.aspect_jitter * normal(rng))).max(1.5);
    OrientedBox { cx: 0.0, cy: 0.0, w: long, h: long / aspect, theta }
}

fn collides(b: &OrientedBox, placed: &[OrientedBox]) -> bool {
    placed.iter().any(|p| intersection_area(b, p) > 0.0)
}

fn place_sparse(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Result<Vec<OrientedBox>> {
    let (iw, ih) = (cfg.image_w as f64, cfg.image_h as f64);
    let mut placed = Vec::with_capacity(cfg.ship_count);
    for index in 0..cfg.ship_count {
        let mut ok = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let theta = -FRAC_PI_2 + PI * rng.random::<f64>();
            let mut b = sample_ship(rng, cfg, theta);
            let hull = b.hbb();
            let (ex, ey) = (0.5 * hull.width(), 0.5 * hull.height());
            b.cx = ex + (iw - 2.0 * ex) * rng.random::<f64>();
            b.cy = ey + (ih - 2.0 * ey) * rng.random::<f64>();
            if inside_image(&b, iw, ih) && !collides(&b, &placed) {
                placed.push(b);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Placement { index, attempts: MAX_PLACEMENT_ATTEMPTS });
        }
    }
    Ok(placed)
}

fn place_harbor_rows(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Result<Vec<OrientedBox>> {
    let (iw, ih) = (cfg.image_w as f64, cfg.image_h as f64);
    let mut placed: Vec<OrientedBox> = Vec::with_capacity(cfg.ship_count);
    while placed.len() < cfg.ship_count {
        let remaining = cfg.ship_count - placed.len();
        let row_len = remaining.min(rng.random_range(3..=6));
        let mut row = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            // tilted rows, so horizontal hulls of neighbors overlap
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let theta = sign * (0.3 + 0.9 * rng.random::<f64>());
            let (s, c) = theta.sin_cos();
            let mut ships: Vec<OrientedBox> = (0..row_len).map(|_| sample_ship(rng, cfg, theta)).collect();
            let mut offsets = vec![0.0];
            for k in 1..row_len {
                let gap = (0.1 + 0.2 * rng.random::<f64>()) * ships[k - 1].h.min(ships[k].h);
                offsets.push(offsets[k - 1] + 0.5 * ships[k - 1].h + gap + 0.5 * ships[k].h);
            }
            let mid = 0.5 * offsets[row_len - 1];
            let ax = iw * rng.random::<f64>();
            let ay = ih * rng.random::<f64>();
            for (b, off) in ships.iter_mut().zip(&offsets) {
                let slide = 0.1 * b.w * (2.0 * rng.random::<f64>() - 1.0);
                b.cx = ax + (off - mid) * -s + slide * c;
                b.cy = ay + (off - mid) * c + slide * s;
            }
            if ships.iter().all(|b| inside_image(b, iw, ih) && !collides(b, &placed)) {
                row = Some(ships);
                break;
            }
        }
        match row {
            Some(ships) => placed.extend(ships),
            None => {
                return Err(Error::Placement { index: placed.len(), attempts: MAX_PLACEMENT_ATTEMPTS })
            }
        }
    }
    Ok(placed)
}

/// Gray level used to paint class `k`.
pub fn class_gray(k: usize) -> f64 {
    0.35 + 0.08 * k as f64
}

const SEA_GRAY: f64 = 0.15;

fn render(cfg: &SceneConfig, ships: &[(OrientedBox, usize)], noise: &mut ChaCha8Rng) -> Result<ImageRaster> {
    let (w, h) = (cfg.image_w, cfg.image_h);
    let mut level = vec![SEA_GRAY; w * h];
    for (b, class) in ships {
        let hull = b.hbb();
        let x0 = hull.xmin.floor().max(0.0) as usize;
        let y0 = hull.ymin.floor().max(0.0) as usize;
        let x1 = (hull.xmax.ceil() as usize).min(w);
        let y1 = (hull.ymax.ceil() as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                if b.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    level[y * w + x] = class_gray(*class);
                }
            }
        }
    }
    let mut samples = Vec::with_capacity(w * h * 3);
    for v in level {
        let g = (v + cfg.noise_std * normal(noise)).clamp(0.0, 1.0);
        samples.extend_from_slice(&[g, g, g]);
    }
    ImageRaster::new(w, h, 3, samples)
}

/// Scene number `index` of the dataset defined by `cfg`.
pub fn gen_scene_at(cfg: &SceneConfig, index: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut geo = stream_rng(cfg.seed, 2 * index);
    let mut noise = stream_rng(cfg.seed, 2 * index + 1);
    let boxes = match cfg.layout {
        Layout::Sparse => place_sparse(&mut geo, cfg)?,
        Layout::HarborRows => place_harbor_rows(&mut geo, cfg)?,
    };
    let ships: Vec<(OrientedBox, usize)> =
        boxes.into_iter().enumerate().map(|(i, b)| (b, i % cfg.class_count)).collect();
    let raster = render(cfg, &ships, &mut noise)?;
    let image_id = scene_id(index);
    let ground_truth = ships
        .iter()
        .map(|(b, k)| GroundTruthRecord::new(image_id.clone(), SHIP_CLASSES[*k], *b))
        .collect::<Result<_>>()?;
    Ok(Scene { image_id, raster, ground_truth })
}

pub fn gen_scene(cfg: &SceneConfig) -> Result<Scene> {
    gen_scene_at(cfg, 0)
}

/// `count` independent scenes, generated in parallel.
pub fn gen_dataset(cfg: &SceneConfig, count: usize) -> Result<Vec<Scene>> {
    (0..count as u64).into_par_iter().map(|i| gen_scene_at(cfg, i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    pub center_std: f64,
    pub angle_std: f64,
    /// Standard deviation of the log size factor.
    pub size_std: f64,
    pub fn_rate: f64,
    pub fp_rate: f64,
    /// Mean and deviation of true-positive scores, clamped to `[0, 1]`.
    pub tp_score: (f64, f64),
    pub fp_score: (f64, f64),
    /// Extent in which spurious boxes are dropped.
    pub image_w: f64,
    pub image_h: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            center_std: 2.0,
            angle_std: 0.05,
            size_std: 0.05,
            fn_rate: 0.1,
            fp_rate: 0.1,
            tp_score: (0.8, 0.1),
            fp_score: (0.3, 0.1),
            image_w: 512.0,
            image_h: 512.0,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    /// Exact copies of every ground truth.
    pub fn clean(seed: u64) -> Self {
        Self {
            center_std: 0.0,
            angle_std: 0.0,
            size_std: 0.0,
            fn_rate: 0.0,
            fp_rate: 0.0,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.fn_rate, self.fp_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidParameter("rates must lie in [0, 1]".into()));
        }
        let stds = [self.center_std, self.angle_std, self.size_std, self.tp_score.1, self.fp_score.1];
        if stds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("standard deviations must be finite and >= 0".into()));
        }
        if !(self.image_w > 0.0 && self.image_h > 0.0) {
            return Err(Error::InvalidParameter("image extent must be positive".into()));
        }
        Ok(())
    }
}

/// Simulated detector output for `gts`.
///
/// Each ground truth survives with probability `1 - fn_rate`, jittered in
/// center, angle and size and scored from the true-positive model. Then, per
/// ground truth, a spurious box on the same image is added with probability
/// `fp_rate`. Every record consumes a fixed number of draws.
pub fn corrupt(gts: &[GroundTruthRecord], cfg: &CorruptionConfig) -> Result<Vec<DetectionRecord>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, CORRUPTION_STREAM);
    let classes: Vec<&str> = gts
        .iter()
        .map(|g| g.class_label.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let score = |rng: &mut ChaCha8Rng, (mean, std): (f64, f64)| (mean + std * normal(rng)).clamp(0.0, 1.0);

    let mut out = Vec::with_capacity(gts.len());
    for g in gts {
        let drop = rng.random::<f64>() < cfg.fn_rate;
        let z: [f64; 5] = std::array::from_fn(|_| normal(&mut rng));
        let s = score(&mut rng, cfg.tp_score);
        if drop {
            continue;
        }
        let b = &g.bbox;
        let jittered = OrientedBox {
            cx: b.cx + cfg.center_std * z[0],
            cy: b.cy + cfg.center_std * z[1],
            w: b.w * (cfg.size_std * z[2]).exp(),
            h: b.h * (cfg.size_std * z[3]).exp(),
            theta: b.theta + cfg.angle_std * z[4],
        };
        out.push(DetectionRecord::new(g.image_id.clone(), g.class_label.clone(), jittered, s)?);
    }
    for g in gts {
        let spawn = rng.random::<f64>() < cfg.fp_rate;
        let class = classes[rng.random_range(0..classes.len())];
        let long = 30.0 + 90.0 * rng.random::<f64>();
        let aspect = (6.0 * (1.0 + 0.1 * normal(&mut rng))).max(1.5);
        let b = OrientedBox {
            cx: cfg.image_w * rng.random::<f64>(),
            cy: cfg.image_h * rng.random::<f64>(),
            w: long,
            h: long / aspect,
            theta: -FRAC_PI_2 + PI * rng.random::<f64>(),
        };
        let s = score(&mut rng, cfg.fp_score);
        if spawn {
            out.push(DetectionRecord::new(g.image_id.clone(), class, b, s)?);
        }
    }
    Ok(out)
}

/// Train size for `n` items at `train:test`, rounding halves up.
pub fn train_count(n: usize, ratio_train: u32, ratio_test: u32) -> usize {
    let total = (ratio_train + ratio_test) as u128;
    ((2 * n as u128 * ratio_train as u128 + total) / (2 * total)) as usize
}

/// Seeded shuffle followed by a `train:test` cut.
pub fn split<T: Clone>(items: &[T], ratio_train: u32, ratio_test: u32, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if ratio_train == 0 || ratio_test == 0 {
        return Err(Error::InvalidParameter("split ratios must be positive".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let cut = train_count(items.len(), ratio_train, ratio_test);
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}
