#![allow(dead_code)]

use std::f64::consts::PI;

use obbkit::OrientedBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box with short side in `short`, long:short ratio in `aspect`, any angle,
/// centered within `spread` of `(cx, cy)`.
pub fn random_box(
    rng: &mut ChaCha8Rng,
    (cx, cy): (f64, f64),
    spread: f64,
    short: (f64, f64),
    aspect: (f64, f64),
) -> OrientedBox {
    let h = rng.random_range(short.0..=short.1);
    let w = h * rng.random_range(aspect.0..=aspect.1);
    let (w, h) = if rng.random::<bool>() { (w, h) } else { (h, w) };
    OrientedBox {
        cx: cx + rng.random_range(-spread..=spread),
        cy: cy + rng.random_range(-spread..=spread),
        w,
        h,
        theta: rng.random_range(-PI..PI),
    }
}

/// Pair whose centers are close enough to overlap most of the time.
pub fn overlapping_pair(rng: &mut ChaCha8Rng) -> (OrientedBox, OrientedBox) {
    let a = random_box(rng, (0.0, 0.0), 0.0, (5.0, 40.0), (1.0, 8.0));
    let reach = 0.5 * a.short_side();
    let b = random_box(rng, (a.cx, a.cy), reach, (5.0, 40.0), (1.0, 8.0));
    (a, b)
}

pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let idx = ((values.len() - 1) as f64 * q).round() as usize;
    values[idx]
}
