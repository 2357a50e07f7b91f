use crate::error::{Error, Result};
use crate::geometry::OrientedBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    /// Assigned to the ground truth at this index.
    Positive(usize),
    Negative,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub labels: Vec<AnchorLabel>,
}

impl MatchResult {
    /// `(anchor index, ground-truth index)` for every positive anchor.
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().enumerate().filter_map(|(i, l)| match l {
            AnchorLabel::Positive(g) => Some((i, *g)),
            _ => None,
        })
    }

    pub fn count(&self, pred: impl Fn(&AnchorLabel) -> bool) -> usize {
        self.labels.iter().filter(|l| pred(l)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub pos_thresh: f64,
    pub neg_thresh: f64,
    /// Force each ground truth's best anchor positive regardless of IoU.
    pub force_best: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { pos_thresh: 0.5, neg_thresh: 0.4, force_best: true }
    }
}

/// Assigns anchors to ground truths.
///
/// An anchor whose best IoU is at least `pos_thresh` becomes positive for that
/// ground truth (lowest index on ties); below `neg_thresh` it is negative;
/// in between it is ignored. With `force_best`, every ground truth then claims
/// its best anchor (ties broken by center distance, then anchor index), later
/// ground truths overriding earlier ones on a shared anchor.
pub fn match_anchors<F>(
    anchors: &[OrientedBox],
    gts: &[OrientedBox],
    cfg: &MatchConfig,
    iou_fn: F,
) -> Result<MatchResult>
where
    F: Fn(&OrientedBox, &OrientedBox) -> f64,
{
    if !(cfg.pos_thresh >= cfg.neg_thresh) {
        return Err(Error::InvalidParameter(format!(
            "pos_thresh {} must be >= neg_thresh {}",
            cfg.pos_thresh, cfg.neg_thresh
        )));
    }
    let n_gt = gts.len();
    let ious: Vec<f64> = anchors
        .iter()
        .flat_map(|a| gts.iter().map(|g| iou_fn(a, g)).collect::<Vec<_>>())
        .collect();

    let mut labels: Vec<AnchorLabel> = (0..anchors.len())
        .map(|i| {
            let row = &ious[i * n_gt..(i + 1) * n_gt];
            let best = row
                .iter()
                .enumerate()
                .fold(None::<(usize, f64)>, |acc, (g, &v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((g, v)),
                });
            match best {
                Some((g, v)) if v >= cfg.pos_thresh => AnchorLabel::Positive(g),
                Some((_, v)) if v >= cfg.neg_thresh => AnchorLabel::Ignore,
                _ => AnchorLabel::Negative,
            }
        })
        .collect();

    if cfg.force_best && !anchors.is_empty() {
        for (g, gt) in gts.iter().enumerate() {
            let mut best = 0;
            for i in 1..anchors.len() {
                let (v, bv) = (ious[i * n_gt + g], ious[best * n_gt + g]);
                let closer = anchors[i].center().distance(gt.center())
                    < anchors[best].center().distance(gt.center());
                if v > bv || (v == bv && closer) {
                    best = i;
                }
            }
            labels[best] = AnchorLabel::Positive(g);
        }
    }
    Ok(MatchResult { labels })
}
