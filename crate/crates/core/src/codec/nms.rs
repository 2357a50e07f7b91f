use crate::geometry::{skew_iou, OrientedBox};

pub const DEFAULT_NMS_IOU: f64 = 0.3;

/// Greedy rotated NMS.
///
/// Visits detections by descending score (input order on ties) and drops any
/// whose skew IoU with an already kept box exceeds `iou_thresh`. Returns the
/// kept indices in visiting order. Scores are compared with `f64::total_cmp`.
pub fn rotated_nms(dets: &[(OrientedBox, f64)], iou_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].1.total_cmp(&dets[i].1).then(i.cmp(&j)));
    let hulls: Vec<_> = dets.iter().map(|(b, _)| b.hbb()).collect();

    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[rank + 1..] {
            if suppressed[j] {
                continue;
            }
            // disjoint hulls have zero overlap
            if iou_thresh >= 0.0 && !hulls[i].overlaps(&hulls[j]) {
                continue;
            }
            if skew_iou(&dets[i].0, &dets[j].0) > iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    keep
}
