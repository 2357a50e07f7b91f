//! Orientation-normalized crops of oriented boxes.
//!
//! The box's long side maps to the patch columns and its short side to the
//! rows, so a ship always lies horizontally in the output regardless of how
//! its box is parameterized.

use crate::error::{Error, Result};
use crate::geometry::OrientedBox;
use crate::raster::ImageRaster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    /// Output columns, sampled along the box's long side.
    pub out_long: usize,
    /// Output rows, sampled along the box's short side.
    pub out_short: usize,
    pub channels: usize,
    /// Value read for source points outside the image.
    pub fill: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self { out_long: 600, out_short: 100, channels: 3, fill: 0.0 }
    }
}

/// Bilinear read at continuous index coordinates, `fill` outside the image.
#[inline]
fn bilinear(img: &ImageRaster, fx: f64, fy: f64, c: usize, fill: f64) -> f64 {
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (w, h) = (img.width() as f64, img.height() as f64);
    let at = |x: f64, y: f64| {
        if x < 0.0 || y < 0.0 || x >= w || y >= h {
            fill
        } else {
            img.get(x as usize, y as usize, c)
        }
    };
    (1.0 - tx) * (1.0 - ty) * at(x0, y0)
        + tx * (1.0 - ty) * at(x0 + 1.0, y0)
        + (1.0 - tx) * ty * at(x0, y0 + 1.0)
        + tx * ty * at(x0 + 1.0, y0 + 1.0)
}

/// Samples `bbox` into an `out_short x out_long x channels` raster.
///
/// Output pixel `(r, c)` reads the source at the point `(c + 0.5) / out_long`
/// of the way along the long side and `(r + 0.5) / out_short` along the short
/// side. Source pixel `(i, j)` is centered at `(i + 0.5, j + 0.5)`. A
/// single-channel source is replicated when three channels are requested.
pub fn extract_patch(image: &ImageRaster, bbox: &OrientedBox, spec: &PatchSpec) -> Result<ImageRaster> {
    bbox.validate()?;
    if spec.out_long == 0 || spec.out_short == 0 || spec.channels == 0 {
        return Err(Error::InvalidParameter(format!("empty patch spec {spec:?}")));
    }
    if !spec.fill.is_finite() {
        return Err(Error::InvalidParameter("fill must be finite".into()));
    }
    let source_channel = |c: usize| -> Result<usize> {
        match (image.channels(), spec.channels) {
            (a, b) if a == b => Ok(c),
            (1, 3) => Ok(0),
            (from, to) => Err(Error::Channel { from, to }),
        }
    };
    source_channel(0)?;

    let (s, c) = bbox.theta.sin_cos();
    // an h-long box is the same set as (h, w, theta + pi/2)
    let (long, short, long_dir, short_dir) = if bbox.w >= bbox.h {
        (bbox.w, bbox.h, (c, s), (-s, c))
    } else {
        (bbox.h, bbox.w, (-s, c), (-c, -s))
    };
    let step_l = long / spec.out_long as f64;
    let step_s = short / spec.out_short as f64;

    let mut out = vec![0.0; spec.out_long * spec.out_short * spec.channels];
    for r in 0..spec.out_short {
        let b = (r as f64 + 0.5) * step_s - 0.5 * short;
        for col in 0..spec.out_long {
            let a = (col as f64 + 0.5) * step_l - 0.5 * long;
            let x = bbox.cx + a * long_dir.0 + b * short_dir.0;
            let y = bbox.cy + a * long_dir.1 + b * short_dir.1;
            for ch in 0..spec.channels {
                out[(r * spec.out_long + col) * spec.channels + ch] =
                    bilinear(image, x - 0.5, y - 0.5, source_channel(ch)?, spec.fill);
            }
        }
    }
    ImageRaster::new(spec.out_long, spec.out_short, spec.channels, out)
}
