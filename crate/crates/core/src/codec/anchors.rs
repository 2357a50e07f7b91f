use crate::error::{Error, Result};
use crate::geometry::OrientedBox;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSpec {
    /// Pixels per grid cell.
    pub stride: f64,
    /// Square-root of the anchor area, in pixels.
    pub scales: Vec<f64>,
    /// `w / h` ratios.
    pub ratios: Vec<f64>,
    /// Anchor angles in radians. Empty means horizontal anchors only.
    pub angles: Vec<f64>,
}

impl AnchorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.stride.is_finite() && self.stride >= 1.0) {
            return Err(Error::InvalidSpec(format!("stride must be >= 1, got {}", self.stride)));
        }
        if self.scales.is_empty() || self.ratios.is_empty() {
            return Err(Error::InvalidSpec("scales and ratios must be nonempty".into()));
        }
        if self.scales.iter().chain(&self.ratios).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSpec("scales and ratios must be positive".into()));
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSpec("angles must be finite".into()));
        }
        Ok(())
    }

    pub fn anchors_per_cell(&self) -> usize {
        self.scales.len() * self.ratios.len() * self.angles.len().max(1)
    }
}

/// Dense anchors for an image, ordered by cell (row-major), then scale,
/// ratio and angle.
///
/// Ratios are area preserving: `w = s * sqrt(r)`, `h = s / sqrt(r)`.
pub fn gen_anchors(image_w: f64, image_h: f64, spec: &AnchorSpec) -> Result<Vec<OrientedBox>> {
    spec.validate()?;
    if !(image_w >= spec.stride && image_h >= spec.stride) {
        return Err(Error::InvalidSpec(format!(
            "image {image_w}x{image_h} is smaller than stride {}",
            spec.stride
        )));
    }
    let nx = (image_w / spec.stride).floor() as usize;
    let ny = (image_h / spec.stride).floor() as usize;
    let angles: &[f64] = if spec.angles.is_empty() { &[0.0] } else { &spec.angles };
    let mut out = Vec::with_capacity(nx * ny * spec.anchors_per_cell());
    for j in 0..ny {
        let cy = (j as f64 + 0.5) * spec.stride;
        for i in 0..nx {
            let cx = (i as f64 + 0.5) * spec.stride;
            for &s in &spec.scales {
                for &r in &spec.ratios {
                    let root = r.sqrt();
                    for &theta in angles {
                        out.push(OrientedBox { cx, cy, w: s * root, h: s / root, theta });
                    }
                }
            }
        }
    }
    Ok(out)
}
