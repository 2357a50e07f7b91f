use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, OrientedBox};

/// Largest accepted `|tw|`, `|th|` when decoding.
pub const MAX_LOG_EXTENT: f64 = 20.0;

/// Regression residual of a box relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDelta {
    /// Center offset along the anchor's `w` axis, in anchor widths.
    pub tx: f64,
    /// Center offset along the anchor's `h` axis, in anchor heights.
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    /// Angle residual in `(-pi/2, pi/2]`.
    pub ttheta: f64,
}

impl BoxDelta {
    pub fn to_array(&self) -> [f64; 5] {
        [self.tx, self.ty, self.tw, self.th, self.ttheta]
    }

    pub fn from_array(d: [f64; 5]) -> Self {
        Self { tx: d[0], ty: d[1], tw: d[2], th: d[3], ttheta: d[4] }
    }
}

pub fn encode(gt: &OrientedBox, anchor: &OrientedBox) -> Result<BoxDelta> {
    gt.validate()?;
    anchor.validate()?;
    let (s, c) = anchor.theta.sin_cos();
    let dx = gt.cx - anchor.cx;
    let dy = gt.cy - anchor.cy;
    Ok(BoxDelta {
        tx: (dx * c + dy * s) / anchor.w,
        ty: (-dx * s + dy * c) / anchor.h,
        tw: (gt.w / anchor.w).ln(),
        th: (gt.h / anchor.h).ln(),
        ttheta: wrap_angle(gt.theta - anchor.theta, PI),
    })
}

/// Inverse of [`encode`]; the result is canonicalized.
pub fn decode(delta: &BoxDelta, anchor: &OrientedBox) -> Result<OrientedBox> {
    anchor.validate()?;
    if delta.to_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite delta {delta:?}")));
    }
    for t in [delta.tw, delta.th] {
        if t.abs() > MAX_LOG_EXTENT {
            return Err(Error::DecodeOverflow(t));
        }
    }
    let (s, c) = anchor.theta.sin_cos();
    let du = delta.tx * anchor.w;
    let dv = delta.ty * anchor.h;
    OrientedBox {
        cx: anchor.cx + du * c - dv * s,
        cy: anchor.cy + du * s + dv * c,
        w: anchor.w * delta.tw.exp(),
        h: anchor.h * delta.th.exp(),
        theta: anchor.theta + delta.ttheta,
    }
    .canonicalize()
}
