//! Pixel-level IoU.
//!
//! Both variants sample a regular grid at cell centers. The hard variant
//! counts samples inside the boxes; the soft variant weights every sample by a
//! product of two sigmoids in the box frame, so it never reaches zero. Soft
//! quantities are accumulated in log space: `ln_piou_soft` stays finite even
//! when the linear ratio is below the smallest positive `f64`.
//!
//! All sums run row-major over the grid, so results are bit-identical between
//! runs regardless of how pairs are scheduled.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, OrientedBox};

/// Upper bound on grid samples for a single evaluation.
pub const MAX_SAMPLES: usize = 400_000_000;

/// Default lower bound applied to hard PIoU before taking its logarithm.
pub const DEFAULT_HARD_FLOOR: f64 = 1e-9;

/// Margin (fraction of the target hull size, per side) of the gradient grid.
pub const GRADIENT_GRID_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSpec {
    /// Pixels per sample.
    pub step: f64,
}

impl RasterSpec {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("raster step must be > 0, got {step}")));
        }
        Ok(Self { step })
    }
}

/// Sigmoid steepness of the soft membership, per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftKernelParams {
    pub k: f64,
}

impl Default for SoftKernelParams {
    fn default() -> Self {
        Self { k: 10.0 }
    }
}

impl SoftKernelParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel steepness must be > 0, got {k}")));
        }
        Ok(Self { k })
    }
}

/// Regular grid of cell-center samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl SampleGrid {
    /// Grid over `bounds`, sampled at `(i + 0.5) * step` offsets.
    pub fn over(bounds: Aabb, step: f64) -> Result<Self> {
        RasterSpec::new(step)?;
        let nx = (bounds.width() / step).ceil().max(1.0);
        let ny = (bounds.height() / step).ceil().max(1.0);
        if !(nx * ny <= MAX_SAMPLES as f64) {
            return Err(Error::InvalidParameter(format!(
                "raster of {nx}x{ny} samples exceeds the {MAX_SAMPLES} sample limit"
            )));
        }
        Ok(Self {
            x0: bounds.xmin,
            y0: bounds.ymin,
            step,
            nx: nx as usize,
            ny: ny as usize,
        })
    }

    /// Union of both hulls, expanded by one step on every side.
    pub fn covering(a: &OrientedBox, b: &OrientedBox, spec: RasterSpec) -> Result<Self> {
        let s = spec.step;
        let hull = a.hbb().union(&b.hbb());
        Self::over(
            Aabb {
                xmin: hull.xmin - s,
                ymin: hull.ymin - s,
                xmax: hull.xmax + s,
                ymax: hull.ymax + s,
            },
            s,
        )
    }

    /// Grid fixed by the target alone, so it does not move with the prediction.
    pub fn around_target(target: &OrientedBox, spec: RasterSpec) -> Result<Self> {
        let hull = target.hbb();
        let mx = GRADIENT_GRID_MARGIN * hull.width() + spec.step;
        let my = GRADIENT_GRID_MARGIN * hull.height() + spec.step;
        Self::over(
            Aabb {
                xmin: hull.xmin - mx,
                ymin: hull.ymin - my,
                xmax: hull.xmax + mx,
                ymax: hull.ymax + my,
            },
            spec.step,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.step
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.step
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            xmin: self.x0,
            ymin: self.y0,
            xmax: self.x0 + self.nx as f64 * self.step,
            ymax: self.y0 + self.ny as f64 * self.step,
        }
    }

    /// Inclusive column range that can contain members of `b` on row `y`,
    /// padded by one column on each side.
    fn column_span(&self, b: &OrientedBox, y: f64) -> Option<(usize, usize)> {
        let (s, c) = b.theta.sin_cos();
        let dy = y - b.cy;
        // u = c*(x - cx) + s*dy, v = -s*(x - cx) + c*dy
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (slope, offset, half) in [(c, s * dy, 0.5 * b.w), (-s, c * dy, 0.5 * b.h)] {
            if slope.abs() < 1e-15 {
                if offset.abs() > half + 1e-9 {
                    return None;
                }
                continue;
            }
            let t1 = (-half - offset) / slope;
            let t2 = (half - offset) / slope;
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
        lo += b.cx;
        hi += b.cx;
        if lo > hi + self.step {
            return None;
        }
        let first = ((lo - self.x0) / self.step - 0.5).floor() - 1.0;
        let last = ((hi - self.x0) / self.step - 0.5).ceil() + 1.0;
        if last < 0.0 || first > (self.nx - 1) as f64 {
            return None;
        }
        Some((first.max(0.0) as usize, last.min((self.nx - 1) as f64) as usize))
    }
}

/// Membership counts of a hard raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardCounts {
    pub intersection: u64,
    pub union: u64,
}

/// Counts samples inside both boxes and inside either box.
pub fn hard_counts(a: &OrientedBox, b: &OrientedBox, grid: &SampleGrid) -> HardCounts {
    let mut counts = HardCounts { intersection: 0, union: 0 };
    for j in 0..grid.ny {
        let y = grid.y(j);
        let span = match (grid.column_span(a, y), grid.column_span(b, y)) {
            (None, None) => continue,
            (Some(s), None) | (None, Some(s)) => s,
            (Some(p), Some(q)) => (p.0.min(q.0), p.1.max(q.1)),
        };
        for i in span.0..=span.1 {
            let x = grid.x(i);
            let in_a = a.contains(x, y);
            let in_b = b.contains(x, y);
            counts.intersection += (in_a && in_b) as u64;
            counts.union += (in_a || in_b) as u64;
        }
    }
    counts
}

/// Hard PIoU on the covering grid of the two boxes.
pub fn piou_hard(a: &OrientedBox, b: &OrientedBox, spec: RasterSpec) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let grid = SampleGrid::covering(a, b, spec)?;
    piou_hard_on_grid(a, b, &grid)
}

pub fn piou_hard_on_grid(a: &OrientedBox, b: &OrientedBox, grid: &SampleGrid) -> Result<f64> {
    let counts = hard_counts(a, b, grid);
    if counts.union == 0 {
        return Err(Error::DegenerateRaster { step: grid.step });
    }
    Ok(counts.intersection as f64 / counts.union as f64)
}

/// `ln(sigmoid(z))` without overflow or underflow to `-inf` for moderate `z`.
#[inline]
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Running log-sum-exp with deterministic accumulation order.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    /// Adds `exp(v)`; returns the factor by which earlier terms were rescaled.
    #[inline]
    fn push(&mut self, v: f64) -> (f64, f64) {
        if v > self.max {
            let rescale = if self.max == f64::NEG_INFINITY { 0.0 } else { (self.max - v).exp() };
            self.scaled = self.scaled * rescale + 1.0;
            self.max = v;
            (rescale, 1.0)
        } else {
            let weight = (v - self.max).exp();
            self.scaled += weight;
            (1.0, weight)
        }
    }

    fn ln(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// Per-sample soft membership of one box, in log form.
#[derive(Debug, Clone, Copy)]
struct SoftSample {
    ln_m: f64,
    inside: bool,
}

#[inline]
fn soft_sample(b: &OrientedBox, sin: f64, cos: f64, k: f64, x: f64, y: f64) -> SoftSample {
    let dx = x - b.cx;
    let dy = y - b.cy;
    let u = dx * cos + dy * sin;
    let v = -dx * sin + dy * cos;
    SoftSample {
        ln_m: log_sigmoid(k * (0.5 * b.w - u.abs())) + log_sigmoid(k * (0.5 * b.h - v.abs())),
        inside: u.abs() <= 0.5 * b.w && v.abs() <= 0.5 * b.h,
    }
}

/// Natural log of the soft PIoU on the covering grid.
pub fn ln_piou_soft(
    a: &OrientedBox,
    b: &OrientedBox,
    spec: RasterSpec,
    kp: SoftKernelParams,
) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let grid = SampleGrid::covering(a, b, spec)?;
    ln_piou_soft_on_grid(a, b, &grid, kp)
}

/// Soft PIoU on the covering grid, always in `(0, 1]`.
///
/// Ratios below the `f64` range are reported as `f64::MIN_POSITIVE`; use
/// [`ln_piou_soft`] when the exact magnitude matters.
pub fn piou_soft(
    a: &OrientedBox,
    b: &OrientedBox,
    spec: RasterSpec,
    kp: SoftKernelParams,
) -> Result<f64> {
    Ok(ln_piou_soft(a, b, spec, kp)?.exp().clamp(f64::MIN_POSITIVE, 1.0))
}

pub fn ln_piou_soft_on_grid(
    a: &OrientedBox,
    b: &OrientedBox,
    grid: &SampleGrid,
    kp: SoftKernelParams,
) -> Result<f64> {
    SoftKernelParams::new(kp.k)?;
    let (sa, ca) = a.theta.sin_cos();
    let (sb, cb) = b.theta.sin_cos();
    let mut inter = LogSum::new();
    let mut union = 0.0;
    let mut any_inside = false;
    for j in 0..grid.ny {
        let y = grid.y(j);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let pa = soft_sample(a, sa, ca, kp.k, x, y);
            let pb = soft_sample(b, sb, cb, kp.k, x, y);
            any_inside |= pa.inside || pb.inside;
            inter.push(pa.ln_m + pb.ln_m);
            let ma = pa.ln_m.exp();
            let mb = pb.ln_m.exp();
            union += ma + mb - ma * mb;
        }
    }
    if !any_inside {
        return Err(Error::DegenerateRaster { step: grid.step });
    }
    Ok((inter.ln() - union.ln()).min(0.0))
}

/// `ln(sigmoid(z))` together with `sigmoid(-z)`, sharing one exponential.
#[inline]
fn log_sigmoid_with_complement(z: f64) -> (f64, f64) {
    if z >= 0.0 {
        let e = (-z).exp();
        (-e.ln_1p(), e / (1.0 + e))
    } else {
        let e = z.exp();
        (z - e.ln_1p(), 1.0 / (1.0 + e))
    }
}

/// Soft memberships of a target box sampled once on a fixed grid.
///
/// Gradient evaluations against the same target reuse these values, so only
/// the prediction's kernel is recomputed per call.
#[derive(Debug, Clone)]
pub struct TargetField {
    target: OrientedBox,
    grid: SampleGrid,
    kernel: SoftKernelParams,
    ln_m: Vec<f64>,
    any_inside: Vec<bool>,
}

impl TargetField {
    pub fn new(target: &OrientedBox, grid: SampleGrid, kernel: SoftKernelParams) -> Result<Self> {
        target.validate()?;
        SoftKernelParams::new(kernel.k)?;
        let (s, c) = target.theta.sin_cos();
        let mut ln_m = Vec::with_capacity(grid.len());
        let mut any_inside = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                let t = soft_sample(target, s, c, kernel.k, grid.x(i), y);
                ln_m.push(t.ln_m);
                any_inside.push(t.inside);
            }
        }
        Ok(Self { target: *target, grid, kernel, ln_m, any_inside })
    }

    /// Field on the target hull plus a 50% margin per side.
    pub fn around_target(target: &OrientedBox, spec: RasterSpec, kernel: SoftKernelParams) -> Result<Self> {
        Self::new(target, SampleGrid::around_target(target, spec)?, kernel)
    }

    pub fn target(&self) -> &OrientedBox {
        &self.target
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn kernel(&self) -> SoftKernelParams {
        self.kernel
    }
}

/// `-ln(piou_soft)` and its gradient with respect to the prediction's
/// `(cx, cy, w, h, theta)`, evaluated on a caller-supplied grid.
pub fn soft_loss_and_grad_on_grid(
    pred: &OrientedBox,
    target: &OrientedBox,
    grid: &SampleGrid,
    kp: SoftKernelParams,
) -> Result<(f64, [f64; 5])> {
    soft_loss_and_grad(pred, &TargetField::new(target, *grid, kp)?)
}

/// `-ln(piou_soft)` and its gradient against a precomputed target field.
pub fn soft_loss_and_grad(pred: &OrientedBox, field: &TargetField) -> Result<(f64, [f64; 5])> {
    pred.validate()?;
    let grid = &field.grid;
    let k = field.kernel.k;
    let (sp, cp) = pred.theta.sin_cos();

    let mut inter = LogSum::new();
    // Intersection-weighted sum of d ln m_pred, scaled like `inter`.
    let mut inter_grad = [0.0; 5];
    let mut union = 0.0;
    let mut union_grad = [0.0; 5];
    let mut any_inside = false;

    for j in 0..grid.ny {
        let y = grid.y(j);
        let dy = y - pred.cy;
        let row = j * grid.nx;
        for i in 0..grid.nx {
            let dx = grid.x(i) - pred.cx;
            let u = dx * cp + dy * sp;
            let v = -dx * sp + dy * cp;
            let (ln_u, gu) = log_sigmoid_with_complement(k * (0.5 * pred.w - u.abs()));
            let (ln_v, gv) = log_sigmoid_with_complement(k * (0.5 * pred.h - v.abs()));
            let ln_p = ln_u + ln_v;
            let ln_t = field.ln_m[row + i];
            any_inside |= field.any_inside[row + i] || (u.abs() <= 0.5 * pred.w && v.abs() <= 0.5 * pred.h);

            // d ln m_pred with respect to (cx, cy, w, h, theta)
            let su = u.signum();
            let sv = v.signum();
            let dln = [
                k * (gu * su * cp - gv * sv * sp),
                k * (gu * su * sp + gv * sv * cp),
                0.5 * k * gu,
                0.5 * k * gv,
                k * (-gu * su * v + gv * sv * u),
            ];

            let (rescale, weight) = inter.push(ln_p + ln_t);
            for (acc, d) in inter_grad.iter_mut().zip(dln) {
                *acc = *acc * rescale + weight * d;
            }

            let mp = ln_p.exp();
            let mt = ln_t.exp();
            union += mp + mt - mp * mt;
            let coef = (1.0 - mt) * mp;
            for (acc, d) in union_grad.iter_mut().zip(dln) {
                *acc += coef * d;
            }
        }
    }
    if !any_inside {
        return Err(Error::DegenerateRaster { step: grid.step });
    }
    let loss = (union.ln() - inter.ln()).max(0.0);
    let mut grad = [0.0; 5];
    for c in 0..5 {
        grad[c] = -inter_grad[c] / inter.scaled + union_grad[c] / union;
    }
    Ok((loss, grad))
}

/// Analytic gradient of `-ln(piou_soft)` with respect to `pred`.
///
/// The grid is built from the target hull plus a 50% margin and held fixed;
/// the prediction must stay inside it for the objective to be meaningful.
pub fn piou_soft_grad(
    pred: &OrientedBox,
    target: &OrientedBox,
    spec: RasterSpec,
    kp: SoftKernelParams,
) -> Result<[f64; 5]> {
    Ok(soft_loss_and_grad(pred, &TargetField::around_target(target, spec, kp)?)?.1)
}

/// `-ln(piou_soft)` on the same fixed grid that [`piou_soft_grad`] uses.
pub fn soft_loss_fixed_grid(
    pred: &OrientedBox,
    target: &OrientedBox,
    spec: RasterSpec,
    kp: SoftKernelParams,
) -> Result<f64> {
    pred.validate()?;
    target.validate()?;
    let grid = SampleGrid::around_target(target, spec)?;
    Ok(-ln_piou_soft_on_grid(pred, target, &grid, kp)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiouVariant {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub variant: PiouVariant,
    pub raster: RasterSpec,
    pub kernel: SoftKernelParams,
    /// Hard PIoU is clamped to at least this value before the logarithm.
    pub hard_floor: f64,
}

impl LossConfig {
    pub fn new(variant: PiouVariant, raster: RasterSpec) -> Self {
        Self {
            variant,
            raster,
            kernel: SoftKernelParams::default(),
            hard_floor: DEFAULT_HARD_FLOOR,
        }
    }
}

/// Predicted/target pairs over which the loss is averaged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositivePairSet {
    pairs: Vec<(OrientedBox, OrientedBox)>,
}

impl PositivePairSet {
    pub fn new(pairs: Vec<(OrientedBox, OrientedBox)>) -> Result<Self> {
        for (p, t) in &pairs {
            p.validate()?;
            t.validate()?;
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(OrientedBox, OrientedBox)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Mean of `-ln(p)` over already computed PIoU values, flooring each at `floor`.
pub fn mean_neg_ln(values: &[f64], floor: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let total: f64 = values.iter().map(|&p| -(p.max(floor)).ln()).sum();
    Ok((total / values.len() as f64).max(0.0))
}

/// Mean negative log PIoU over the positive set.
pub fn piou_loss(pairs: &PositivePairSet, cfg: &LossConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let terms: Vec<f64> = pairs
        .pairs()
        .par_iter()
        .map(|(p, t)| match cfg.variant {
            PiouVariant::Hard => {
                piou_hard(p, t, cfg.raster).map(|v| -(v.max(cfg.hard_floor)).ln())
            }
            PiouVariant::Soft => ln_piou_soft(p, t, cfg.raster, cfg.kernel).map(|v| -v),
        })
        .collect::<Result<_>>()?;
    let total: f64 = terms.iter().sum();
    Ok((total / terms.len() as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    use super::*;

    fn b(cx: f64, cy: f64, w: f64, h: f64, t: f64) -> OrientedBox {
        OrientedBox::new(cx, cy, w, h, t).unwrap()
    }

    fn spec(step: f64) -> RasterSpec {
        RasterSpec::new(step).unwrap()
    }

    #[test]
    fn hard_identity_is_exactly_one() {
        let a = b(3.3, -1.2, 7.0, 2.5, 0.4);
        assert_eq!(piou_hard(&a, &a, spec(0.05)).unwrap(), 1.0);
    }

    #[test]
    fn hard_disjoint_is_zero() {
        let a = b(0., 0., 1., 1., 0.);
        let c = b(10., 0., 1., 1., 0.);
        assert_eq!(piou_hard(&a, &c, spec(0.1)).unwrap(), 0.0);
    }

    #[test]
    fn hard_tracks_polygon_iou_for_rotated_squares() {
        let a = b(0., 0., 2., 2., 0.);
        let c = b(0., 0., 2., 2., FRAC_PI_4);
        let v = piou_hard(&a, &c, spec(0.01)).unwrap();
        assert!((v - 1.0 / SQRT_2).abs() <= 0.01, "{v}");
    }

    #[test]
    fn hard_is_symmetric_on_shared_grid() {
        let a = b(1., 2., 9., 3., 0.3);
        let c = b(2., 1., 4., 6., -1.1);
        let grid = SampleGrid::covering(&a, &c, spec(0.07)).unwrap();
        assert_eq!(hard_counts(&a, &c, &grid), hard_counts(&c, &a, &grid));
    }

    #[test]
    fn span_pruning_matches_full_scan() {
        let a = b(0.3, 0.1, 11.0, 2.0, 0.77);
        let c = b(1.0, -0.5, 3.0, 3.0, FRAC_PI_4);
        let grid = SampleGrid::covering(&a, &c, spec(0.05)).unwrap();
        let mut full = HardCounts { intersection: 0, union: 0 };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = (grid.x(i), grid.y(j));
                let (ia, ic) = (a.contains(x, y), c.contains(x, y));
                full.intersection += (ia && ic) as u64;
                full.union += (ia || ic) as u64;
            }
        }
        assert_eq!(hard_counts(&a, &c, &grid), full);
    }

    #[test]
    fn degenerate_raster_is_an_error() {
        // one huge cell whose center misses both tiny boxes
        let a = b(0.1, 0.1, 0.05, 0.05, 0.);
        let c = b(0.12, 0.1, 0.05, 0.05, 0.);
        let grid = SampleGrid::over(
            Aabb { xmin: -10., ymin: -10., xmax: 10.3, ymax: 10.3 },
            100.0,
        )
        .unwrap();
        assert!(matches!(piou_hard_on_grid(&a, &c, &grid), Err(Error::DegenerateRaster { .. })));
        assert!(ln_piou_soft_on_grid(&a, &c, &grid, SoftKernelParams::default()).is_err());
        assert!(RasterSpec::new(0.0).is_err());
        assert!(SoftKernelParams::new(-1.0).is_err());
    }

    #[test]
    fn soft_identity_is_slightly_below_one() {
        // 1 - v is roughly 2 * perimeter / (k * area)
        let a = b(0., 0., 60., 20., 0.2);
        let v = piou_soft(&a, &a, spec(0.05), SoftKernelParams::default()).unwrap();
        assert!(v > 0.95 && v <= 1.0, "{v}");
        assert!(v < 1.0);
    }

    #[test]
    fn soft_far_disjoint_is_tiny_but_positive() {
        let a = b(0., 0., 1., 1., 0.);
        let c = b(10., 0., 1., 1., 0.);
        let v = piou_soft(&a, &c, spec(0.1), SoftKernelParams::default()).unwrap();
        assert!(v > 0.0 && v <= 1e-6, "{v}");
        let far = b(5000., 0., 1., 1., 0.);
        let ln = ln_piou_soft(&a, &far, spec(0.5), SoftKernelParams::default()).unwrap();
        assert!(ln.is_finite() && ln < -1000.0, "{ln}");
        assert!(piou_soft(&a, &far, spec(0.5), SoftKernelParams::default()).unwrap() > 0.0);
    }

    #[test]
    fn loss_value_examples() {
        assert_eq!(mean_neg_ln(&[1.0], DEFAULT_HARD_FLOOR).unwrap(), 0.0);
        assert!((mean_neg_ln(&[(-1.0f64).exp()], DEFAULT_HARD_FLOOR).unwrap() - 1.0).abs() < 1e-15);
        assert!((mean_neg_ln(&[1.0, (-2.0f64).exp()], DEFAULT_HARD_FLOOR).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(mean_neg_ln(&[], DEFAULT_HARD_FLOOR), Err(Error::EmptyPairSet)));
    }

    #[test]
    fn loss_over_pairs() {
        let a = b(0., 0., 4., 2., 0.1);
        let cfg = LossConfig::new(PiouVariant::Hard, spec(0.05));
        let same = PositivePairSet::new(vec![(a, a)]).unwrap();
        assert_eq!(piou_loss(&same, &cfg).unwrap(), 0.0);
        assert!(matches!(piou_loss(&PositivePairSet::default(), &cfg), Err(Error::EmptyPairSet)));

        // disjoint pair hits the clamp and stays finite
        let far = b(50., 0., 4., 2., 0.1);
        let disjoint = PositivePairSet::new(vec![(a, far)]).unwrap();
        let hard = piou_loss(&disjoint, &cfg).unwrap();
        assert!((hard - (-(1e-9f64).ln())).abs() < 1e-12);
        let soft = piou_loss(&disjoint, &LossConfig::new(PiouVariant::Soft, spec(0.05))).unwrap();
        assert!(soft.is_finite() && soft > hard);
    }

    #[test]
    fn gradient_at_coincidence_is_small() {
        let kp = SoftKernelParams::default();
        for t in [b(10., 5., 48., 10., 0.3), b(0., 0., 12., 12., -0.8), b(3., 3., 90., 15., 1.2)] {
            let g = piou_soft_grad(&t, &t, spec(0.25), kp).unwrap();
            for c in g {
                assert!(c.abs() <= 1e-3 * kp.k, "{g:?}");
            }
        }
    }

    #[test]
    fn displaced_prediction_pushes_back() {
        let kp = SoftKernelParams::default();
        let t = b(0., 0., 30., 5., 0.);
        let p = b(1., 0., 30., 5., 0.);
        let g = piou_soft_grad(&p, &t, spec(0.25), kp).unwrap();
        assert!(g[0] > 0.0);
        let l0 = soft_loss_fixed_grid(&p, &t, spec(0.25), kp).unwrap();
        let l1 = soft_loss_fixed_grid(&b(0.9, 0., 30., 5., 0.), &t, spec(0.25), kp).unwrap();
        assert!(l1 < l0);
    }

    #[test]
    fn gradient_loss_matches_fixed_grid_loss() {
        let kp = SoftKernelParams::default();
        let t = b(0., 0., 30., 5., 0.2);
        let p = b(1.5, -0.7, 27., 6., 0.35);
        let grid = SampleGrid::around_target(&t, spec(0.3)).unwrap();
        let (loss, _) = soft_loss_and_grad_on_grid(&p, &t, &grid, kp).unwrap();
        let direct = soft_loss_fixed_grid(&p, &t, spec(0.3), kp).unwrap();
        assert!((loss - direct).abs() < 1e-12);
    }
}
