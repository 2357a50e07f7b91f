//! Momentum SGD fitting of one oriented box to another under the soft PIoU
//! loss.
//!
//! The optimizer can work on raw pixel parameters `(cx, cy, w, h, theta)` or
//! on codec residuals relative to the initial box, the way a detector head
//! regresses against its anchor. Both use the same analytic loss gradient.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{skew_iou, OrientedBox};
use crate::piou::{soft_loss_and_grad, RasterSpec, SoftKernelParams, TargetField};

/// Smallest extent a fitted box may shrink to, in pixels.
pub const MIN_EXTENT: f64 = 1.0;

/// Soft PIoU the start box must exceed on the target's grid.
pub const MIN_START_PIOU: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// `(cx, cy, w, h, theta)` directly.
    Pixels,
    /// `(tx, ty, tw, th, ttheta)` residuals against the initial box.
    AnchorDeltas,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub max_steps: usize,
    /// Per-component multiplier on the learning rate.
    pub param_scale: [f64; 5],
    /// Fitting stops once the exact IoU with the target reaches this.
    pub stop_iou: f64,
    pub raster: RasterSpec,
    pub parameterization: Parameterization,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.0,
            warmup_steps: 5,
            max_steps: 500,
            param_scale: [1.0, 1.0, 1.0, 1.0, 0.1],
            stop_iou: 0.95,
            raster: RasterSpec { step: 0.5 },
            parameterization: Parameterization::AnchorDeltas,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be >= 0, got {}", self.weight_decay));
        }
        if self.param_scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("param_scale entries must be finite and >= 0".into());
        }
        RasterSpec::new(self.raster.step)?;
        Ok(())
    }
}

/// Learning rate for `step`, ramping linearly up to `base_lr`.
pub fn warmup_lr(step: usize, cfg: &OptimizerConfig) -> f64 {
    if step < cfg.warmup_steps {
        cfg.base_lr * (step + 1) as f64 / cfg.warmup_steps as f64
    } else {
        cfg.base_lr
    }
}

/// One classical momentum update.
///
/// `extent_floor` bounds indices 2 and 3 from below after the update; pass
/// [`MIN_EXTENT`] for pixel parameters.
pub fn sgd_step(
    params: [f64; 5],
    grads: [f64; 5],
    velocity: [f64; 5],
    lr: f64,
    cfg: &OptimizerConfig,
    extent_floor: [f64; 2],
) -> Result<([f64; 5], [f64; 5])> {
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence { step: 0 });
    }
    let mut p = params;
    let mut v = velocity;
    for i in 0..5 {
        v[i] = cfg.momentum * velocity[i] + grads[i] + cfg.weight_decay * params[i];
        p[i] = params[i] - lr * cfg.param_scale[i] * v[i];
    }
    p[2] = p[2].max(extent_floor[0]);
    p[3] = p[3].max(extent_floor[1]);
    if p.iter().chain(&v).any(|x| !x.is_finite()) {
        return Err(Error::Divergence { step: 0 });
    }
    Ok((p, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStep {
    pub step: usize,
    pub bbox: OrientedBox,
    pub loss: f64,
    pub iou: f64,
    /// Rate applied to produce the next entry; 0 for the final entry.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrajectory {
    pub steps: Vec<FitStep>,
}

impl FitTrajectory {
    pub fn first(&self) -> &FitStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &FitStep {
        self.steps.last().expect("trajectory holds the initial state")
    }

    /// First step whose IoU reaches `iou`.
    pub fn steps_to(&self, iou: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.iou >= iou).map(|s| s.step)
    }

    /// One row per step; `theta` in degrees like every other file format.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,cx,cy,w,h,theta,loss,iou,lr")?;
        for s in &self.steps {
            let b = &s.bbox;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.step, b.cx, b.cy, b.w, b.h, b.theta.to_degrees(), s.loss, s.iou, s.lr
            )?;
        }
        Ok(())
    }
}

/// Maps optimizer parameters to a box and pulls box gradients back.
struct Chart {
    kind: Parameterization,
    anchor: OrientedBox,
}

impl Chart {
    fn params(&self) -> [f64; 5] {
        match self.kind {
            Parameterization::Pixels => self.anchor.to_array(),
            Parameterization::AnchorDeltas => [0.0; 5],
        }
    }

    fn extent_floor(&self) -> [f64; 2] {
        match self.kind {
            Parameterization::Pixels => [MIN_EXTENT; 2],
            Parameterization::AnchorDeltas => [(MIN_EXTENT / self.anchor.w).ln(), (MIN_EXTENT / self.anchor.h).ln()],
        }
    }

    /// Box for `p`, without canonicalization so the map stays smooth.
    fn to_box(&self, p: [f64; 5]) -> OrientedBox {
        match self.kind {
            Parameterization::Pixels => OrientedBox::from_array(p),
            Parameterization::AnchorDeltas => {
                let a = &self.anchor;
                let (s, c) = a.theta.sin_cos();
                let du = p[0] * a.w;
                let dv = p[1] * a.h;
                OrientedBox {
                    cx: a.cx + du * c - dv * s,
                    cy: a.cy + du * s + dv * c,
                    w: a.w * p[2].exp(),
                    h: a.h * p[3].exp(),
                    theta: a.theta + p[4],
                }
            }
        }
    }

    fn pull_back(&self, b: &OrientedBox, g: [f64; 5]) -> [f64; 5] {
        match self.kind {
            Parameterization::Pixels => g,
            Parameterization::AnchorDeltas => {
                let a = &self.anchor;
                let (s, c) = a.theta.sin_cos();
                [
                    a.w * (c * g[0] + s * g[1]),
                    a.h * (-s * g[0] + c * g[1]),
                    b.w * g[2],
                    b.h * g[3],
                    g[4],
                ]
            }
        }
    }
}

/// Gradient-descent fit of `init` onto `target`.
///
/// The soft PIoU grid is fixed around the target for the whole run. The
/// trajectory starts with the initial state and ends at `max_steps` or at the
/// first box whose exact IoU reaches `stop_iou`.
pub fn fit_box(
    init: &OrientedBox,
    target: &OrientedBox,
    cfg: &OptimizerConfig,
    kernel: SoftKernelParams,
) -> Result<FitTrajectory> {
    init.validate()?;
    target.validate()?;
    cfg.validate()?;
    let field = TargetField::around_target(target, cfg.raster, kernel)?;
    let chart = Chart { kind: cfg.parameterization, anchor: *init };
    let floor = chart.extent_floor();
    let mut params = chart.params();
    let mut velocity = [0.0; 5];
    let mut steps = Vec::new();

    for step in 0..=cfg.max_steps {
        let bbox = chart.to_box(params);
        let (loss, grad) = soft_loss_and_grad(&bbox, &field)?;
        if step == 0 && loss > -MIN_START_PIOU.ln() {
            return Err(Error::InvalidParameter(format!(
                "start box barely touches the target (soft PIoU {:.3e})",
                (-loss).exp()
            )));
        }
        let iou = skew_iou(&bbox, target);
        let done = step == cfg.max_steps || iou >= cfg.stop_iou;
        let lr = if done { 0.0 } else { warmup_lr(step, cfg) };
        steps.push(FitStep { step, bbox, loss, iou, lr });
        if done {
            break;
        }
        let g = chart.pull_back(&bbox, grad);
        (params, velocity) = sgd_step(params, g, velocity, lr, cfg, floor).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence { step },
            e => e,
        })?;
    }
    Ok(FitTrajectory { steps })
}

/// The perturbation used by the fit demo: `(+8, +8)` px, extents x1.2 and
/// `+0.15` rad.
pub fn demo_start(target: &OrientedBox) -> OrientedBox {
    OrientedBox {
        cx: target.cx + 8.0,
        cy: target.cy + 8.0,
        w: target.w * 1.2,
        h: target.h * 1.2,
        theta: target.theta + 0.15,
    }
}

/// Target used by the fit demo: a 6:1 ship box.
pub fn demo_target() -> OrientedBox {
    OrientedBox { cx: 100.0, cy: 80.0, w: 120.0, h: 20.0, theta: 0.3 }
}
