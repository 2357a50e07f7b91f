//! Rotated-box detection evaluation: greedy matching, average precision and
//! per-class reports.

mod records;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

pub use records::{
    read_boxes, read_detections, read_ground_truth, write_detections, write_ground_truth, DetectionRecord,
    GroundTruthRecord,
};
pub use report::{render_ablation, render_table};

use crate::error::{Error, Result};
use crate::geometry::{skew_iou, OrientedBox};

/// Ship classes, in report column order.
pub const SHIP_CLASSES: [&str; 7] = [
    "Aircraft Carriers",
    "Helicopter Destroyers",
    "Cruisers",
    "Dock Landing Ships",
    "Destroyers",
    "Frigates",
    "Cargo Ships",
];

/// Short column tags for [`SHIP_CLASSES`].
pub const SHIP_CLASS_TAGS: [&str; 7] = ["AC", "HD", "Cr", "DLS", "Ds", "Fr", "Cs"];

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApMode {
    /// Area under the monotone precision envelope.
    AllPoints,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// Average precision of detections already sorted by descending score.
///
/// With no ground truth the AP is 1 if there are also no detections and 0
/// otherwise.
pub fn average_precision(flags: &[bool], gt_count: usize, mode: ApMode) -> f64 {
    if gt_count == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(flags.len());
    for (n, &hit) in flags.iter().enumerate() {
        tp += hit as usize;
        points.push((tp as f64 / gt_count as f64, tp as f64 / (n + 1) as f64));
    }
    // envelope: best precision at this or any higher recall
    let mut best = 0.0f64;
    for p in points.iter_mut().rev() {
        best = best.max(p.1);
        p.1 = best;
    }
    match mode {
        ApMode::AllPoints => {
            let mut prev_recall = 0.0;
            let mut area = 0.0;
            for &(r, p) in &points {
                area += (r - prev_recall) * p;
                prev_recall = r;
            }
            area
        }
        ApMode::ElevenPoint => {
            let total: f64 = (0..=10)
                .map(|t| {
                    let level = t as f64 / 10.0;
                    points
                        .iter()
                        .find(|(r, _)| *r >= level - 1e-12)
                        .map_or(0.0, |&(_, p)| p)
                })
                .sum();
            total / 11.0
        }
    }
}

/// Per-detection true-positive flags, in input order.
///
/// Within every (image, class) group detections are visited by descending
/// score (input order on ties); each takes the unmatched ground truth of
/// highest IoU (lowest index on ties) if that IoU reaches `iou_thresh`.
pub fn match_detections<F>(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_thresh: f64,
    iou_fn: F,
) -> Vec<bool>
where
    F: Fn(&OrientedBox, &OrientedBox) -> f64,
{
    let mut groups: BTreeMap<(&str, &str), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry((&d.image_id, &d.class_label)).or_default().0.push(i);
    }
    for (j, g) in gts.iter().enumerate() {
        if let Some(e) = groups.get_mut(&(g.image_id.as_str(), g.class_label.as_str())) {
            e.1.push(j);
        }
    }
    let mut flags = vec![false; dets.len()];
    for (det_idx, gt_idx) in groups.values() {
        let boxes: Vec<OrientedBox> = gt_idx.iter().map(|&j| gts[j].bbox).collect();
        let scored: Vec<(usize, f64)> = det_idx.iter().map(|&i| (i, dets[i].score)).collect();
        for (i, hit) in greedy_match(&scored, |i| dets[i].bbox, &boxes, iou_thresh, &iou_fn) {
            flags[i] = hit;
        }
    }
    flags
}

/// Greedy matching of one (image, class) group. Returns `(det id, is_tp)` in
/// visiting order.
fn greedy_match<F>(
    scored: &[(usize, f64)],
    det_box: impl Fn(usize) -> OrientedBox,
    gts: &[OrientedBox],
    iou_thresh: f64,
    iou_fn: &F,
) -> Vec<(usize, bool)>
where
    F: Fn(&OrientedBox, &OrientedBox) -> f64,
{
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    order
        .into_iter()
        .map(|k| {
            let id = scored[k].0;
            let b = det_box(id);
            let best = gts
                .iter()
                .enumerate()
                .filter(|(g, _)| !taken[*g])
                .map(|(g, gt)| (g, iou_fn(&b, gt)))
                .fold(None::<(usize, f64)>, |acc, (g, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((g, v)),
                });
            match best {
                Some((g, v)) if v >= iou_thresh => {
                    taken[g] = true;
                    (id, true)
                }
                _ => (id, false),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    /// Report classes in column order. Empty means every label seen in the
    /// data, sorted.
    pub classes: Vec<String>,
    pub ap_mode: ApMode,
    /// Reject detections on images absent from the ground truth instead of
    /// counting them as false positives.
    pub strict: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: DEFAULT_MATCH_IOU,
            classes: SHIP_CLASSES.iter().map(|s| s.to_string()).collect(),
            ap_mode: ApMode::AllPoints,
            strict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub class: String,
    pub ap: f64,
    pub gt_count: usize,
    pub detections: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_thresh: f64,
    pub ap_mode: ApMode,
    pub classes: Vec<ClassResult>,
    #[serde(rename = "mAP")]
    pub map: f64,
}

impl EvalReport {
    pub fn ap(&self, class: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.class == class).map(|c| c.ap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates with skew IoU matching.
pub fn evaluate(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_with(dets, gts, cfg, skew_iou)
}

/// Per-image results: `(class index, score, is_tp)` in visiting order.
type ImageHits = Vec<(usize, f64, bool)>;

pub fn evaluate_with<F>(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    cfg: &EvalConfig,
    iou_fn: F,
) -> Result<EvalReport>
where
    F: Fn(&OrientedBox, &OrientedBox) -> f64 + Sync,
{
    for g in gts {
        g.validate()?;
    }
    for d in dets {
        d.validate()?;
    }
    let classes: Vec<String> = if cfg.classes.is_empty() {
        let seen: BTreeSet<&str> = gts
            .iter()
            .map(|g| g.class_label.as_str())
            .chain(dets.iter().map(|d| d.class_label.as_str()))
            .collect();
        seen.into_iter().map(str::to_owned).collect()
    } else {
        cfg.classes.clone()
    };
    let class_index: BTreeMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let lookup = |label: &str| {
        class_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("class `{label}` is not in the class list")))
    };

    // image -> class -> (gt boxes, detection (score, box))
    type Bucket = (Vec<OrientedBox>, Vec<(f64, OrientedBox)>);
    let mut images: BTreeMap<&str, BTreeMap<usize, Bucket>> = BTreeMap::new();
    let mut gt_counts = vec![0usize; classes.len()];
    for g in gts {
        let c = lookup(&g.class_label)?;
        gt_counts[c] += 1;
        images.entry(&g.image_id).or_default().entry(c).or_default().0.push(g.bbox);
    }
    let mut orphans: Vec<(usize, f64)> = Vec::new();
    for d in dets {
        let c = lookup(&d.class_label)?;
        match images.get_mut(d.image_id.as_str()) {
            Some(per_class) => per_class.entry(c).or_default().1.push((d.score, d.bbox)),
            None if cfg.strict => return Err(Error::UnknownImage(d.image_id.clone())),
            None => orphans.push((c, d.score)),
        }
    }

    let per_image: Vec<ImageHits> = images
        .par_iter()
        .map(|(_, per_class)| {
            let mut hits = Vec::new();
            for (&c, (gt_boxes, det_list)) in per_class {
                let scored: Vec<(usize, f64)> =
                    det_list.iter().enumerate().map(|(i, d)| (i, d.0)).collect();
                let matched = greedy_match(&scored, |i| det_list[i].1, gt_boxes, cfg.iou_thresh, &iou_fn);
                hits.extend(matched.into_iter().map(|(i, tp)| (c, det_list[i].0, tp)));
            }
            hits
        })
        .collect();

    let mut by_class: Vec<Vec<(f64, bool)>> = vec![Vec::new(); classes.len()];
    for (c, score, tp) in per_image.into_iter().flatten() {
        by_class[c].push((score, tp));
    }
    for (c, score) in orphans {
        by_class[c].push((score, false));
    }

    let results: Vec<ClassResult> = classes
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let list = &mut by_class[c];
            list.sort_by(|a, b| b.0.total_cmp(&a.0));
            let flags: Vec<bool> = list.iter().map(|x| x.1).collect();
            let tp = flags.iter().filter(|&&f| f).count();
            ClassResult {
                class: name.clone(),
                ap: average_precision(&flags, gt_counts[c], cfg.ap_mode),
                gt_count: gt_counts[c],
                detections: flags.len(),
                tp,
                fp: flags.len() - tp,
                fn_: gt_counts[c] - tp,
            }
        })
        .collect();
    let map = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.ap).sum::<f64>() / results.len() as f64
    };
    Ok(EvalReport { iou_thresh: cfg.iou_thresh, ap_mode: cfg.ap_mode, classes: results, map })
}
