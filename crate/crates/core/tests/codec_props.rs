mod common;

use obbkit::codec::{decode, encode, match_anchors, rotated_nms, AnchorLabel, BoxDelta, MatchConfig};
use obbkit::{skew_iou, OrientedBox};
use rand::Rng;

use common::{random_box, rng};

#[test]
fn decode_inverts_encode_on_10k_pairs() {
    let mut r = rng(20);
    for _ in 0..10_000 {
        let g = random_box(&mut r, (300.0, 300.0), 300.0, (2.0, 80.0), (1.0, 8.0));
        let a = random_box(&mut r, (300.0, 300.0), 300.0, (2.0, 80.0), (1.0, 8.0));
        let back = decode(&encode(&g, &a).unwrap(), &a).unwrap();
        let want = g.canonicalize().unwrap();
        for (x, y) in back.to_array().iter().zip(want.to_array()) {
            assert!((x - y).abs() <= 1e-9, "{g:?} via {a:?}: {back:?}");
        }
    }
}

#[test]
fn encode_inverts_decode_for_canonical_results() {
    let mut r = rng(21);
    let mut checked = 0;
    while checked < 2000 {
        let a = random_box(&mut r, (0.0, 0.0), 100.0, (4.0, 40.0), (1.0, 6.0));
        let d = BoxDelta {
            tx: r.random_range(-1.0..1.0),
            ty: r.random_range(-1.0..1.0),
            tw: r.random_range(-1.0..1.0),
            th: r.random_range(-1.0..1.0),
            ttheta: r.random_range(-1.5..1.5),
        };
        let raw_w = a.w * d.tw.exp();
        let raw_h = a.h * d.th.exp();
        let raw_theta = a.theta + d.ttheta;
        // decode only preserves d when its canonicalization is a no-op
        if raw_w <= raw_h || raw_theta.abs() >= std::f64::consts::FRAC_PI_2 {
            continue;
        }
        let again = encode(&decode(&d, &a).unwrap(), &a).unwrap();
        for (x, y) in again.to_array().iter().zip(d.to_array()) {
            assert!((x - y).abs() <= 1e-9);
        }
        checked += 1;
    }
}

fn reference_nms(dets: &[(OrientedBox, f64)], thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps input order among equal scores
    order.sort_by(|&i, &j| dets[j].1.partial_cmp(&dets[i].1).unwrap());
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep.iter().all(|&k| skew_iou(&dets[k].0, &dets[i].0) <= thresh) {
            keep.push(i);
        }
    }
    keep
}

fn clustered_detections(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<(OrientedBox, f64)> {
    let centers: Vec<(f64, f64)> =
        (0..20).map(|_| (r.random_range(0.0..400.0), r.random_range(0.0..400.0))).collect();
    (0..n)
        .map(|_| {
            let c = centers[r.random_range(0..centers.len())];
            let b = random_box(r, c, 8.0, (6.0, 20.0), (1.0, 6.0));
            // coarse scores so ties occur
            let score = (r.random_range(0..50) as f64) / 50.0;
            (b, score)
        })
        .collect()
}

#[test]
fn nms_equals_quadratic_reference() {
    let mut r = rng(22);
    for set in 0..100 {
        let dets = clustered_detections(&mut r, 200);
        let thresh = [0.1, 0.3, 0.5, 0.7][set % 4];
        let keep = rotated_nms(&dets, thresh);
        assert_eq!(keep, reference_nms(&dets, thresh), "set {set}");

        for w in keep.windows(2) {
            assert!(dets[w[0]].1 >= dets[w[1]].1);
        }
        for (i, a) in keep.iter().enumerate() {
            for b in &keep[i + 1..] {
                assert!(skew_iou(&dets[*a].0, &dets[*b].0) <= thresh);
            }
        }
        for j in (0..dets.len()).filter(|j| !keep.contains(j)) {
            assert!(keep.iter().any(|&k| skew_iou(&dets[k].0, &dets[j].0) > thresh));
        }
    }
}

/// Labels straight from the rules, one anchor at a time.
fn reference_labels(anchors: &[OrientedBox], gts: &[OrientedBox], cfg: &MatchConfig) -> Vec<AnchorLabel> {
    let mut labels: Vec<AnchorLabel> = anchors
        .iter()
        .map(|a| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                let v = skew_iou(a, gt);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= cfg.pos_thresh => AnchorLabel::Positive(g),
                Some((_, v)) if v >= cfg.neg_thresh => AnchorLabel::Ignore,
                _ => AnchorLabel::Negative,
            }
        })
        .collect();
    if cfg.force_best {
        for (g, gt) in gts.iter().enumerate() {
            let key = |i: usize| (skew_iou(&anchors[i], gt), -anchors[i].center().distance(gt.center()));
            let best = (0..anchors.len())
                .max_by(|&i, &j| key(i).partial_cmp(&key(j)).unwrap().then(j.cmp(&i)))
                .unwrap();
            labels[best] = AnchorLabel::Positive(g);
        }
    }
    labels
}

#[test]
fn matching_equals_rule_by_rule_reference() {
    let mut r = rng(23);
    for case in 0..200 {
        let anchors: Vec<OrientedBox> =
            (0..60).map(|_| random_box(&mut r, (100.0, 100.0), 80.0, (6.0, 20.0), (1.0, 6.0))).collect();
        let gts: Vec<OrientedBox> =
            (0..r.random_range(0..6)).map(|_| random_box(&mut r, (100.0, 100.0), 80.0, (6.0, 20.0), (1.0, 6.0))).collect();
        let cfg = MatchConfig { force_best: case % 3 != 0, ..Default::default() };
        let got = match_anchors(&anchors, &gts, &cfg, skew_iou).unwrap();
        assert_eq!(got.labels, reference_labels(&anchors, &gts, &cfg), "case {case}");
        assert_eq!(got, match_anchors(&anchors, &gts, &cfg, skew_iou).unwrap());
    }
}
