//! Labeled boxes and their JSON Lines encoding.
//!
//! One object per line: `{"image_id": .., "class": .., "box": [cx, cy, w, h,
//! theta_deg]}`, with an extra `"score"` for detections. Angles are degrees on
//! disk and radians in memory.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::OrientedBox;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub class_label: String,
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_label: String,
    pub bbox: OrientedBox,
    pub score: f64,
}

fn check_ids(image_id: &str, class_label: &str) -> Result<()> {
    if image_id.is_empty() || class_label.is_empty() {
        return Err(Error::InvalidParameter("image_id and class must be nonempty".into()));
    }
    Ok(())
}

impl GroundTruthRecord {
    pub fn new(image_id: impl Into<String>, class_label: impl Into<String>, bbox: OrientedBox) -> Result<Self> {
        let r = Self { image_id: image_id.into(), class_label: class_label.into(), bbox };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        check_ids(&self.image_id, &self.class_label)?;
        self.bbox.validate()
    }
}

impl DetectionRecord {
    pub fn new(
        image_id: impl Into<String>,
        class_label: impl Into<String>,
        bbox: OrientedBox,
        score: f64,
    ) -> Result<Self> {
        let r = Self { image_id: image_id.into(), class_label: class_label.into(), bbox, score };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        check_ids(&self.image_id, &self.class_label)?;
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidParameter(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }

    pub fn from_ground_truth(gt: &GroundTruthRecord, score: f64) -> Result<Self> {
        Self::new(gt.image_id.clone(), gt.class_label.clone(), gt.bbox, score)
    }
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    image_id: String,
    class: String,
    #[serde(rename = "box")]
    bbox: [f64; 5],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

fn to_wire(image_id: &str, class: &str, b: &OrientedBox, score: Option<f64>) -> WireRecord {
    WireRecord {
        image_id: image_id.to_owned(),
        class: class.to_owned(),
        bbox: [b.cx, b.cy, b.w, b.h, b.theta.to_degrees()],
        score,
    }
}

fn from_wire(w: &WireRecord) -> Result<OrientedBox> {
    let [cx, cy, bw, bh, deg] = w.bbox;
    OrientedBox::from_degrees(cx, cy, bw, bh, deg)
}

fn parse_lines<R: BufRead, T>(input: R, mut convert: impl FnMut(WireRecord) -> Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| Error::Parse { line: n + 1, message };
        let wire: WireRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        out.push(convert(wire).map_err(|e| at(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_ground_truth<R: BufRead>(input: R) -> Result<Vec<GroundTruthRecord>> {
    parse_lines(input, |w| GroundTruthRecord::new(w.image_id.clone(), w.class.clone(), from_wire(&w)?))
}

/// Detections; a line without `"score"` counts as certain (score 1), so a
/// ground-truth file can be scored against itself.
pub fn read_detections<R: BufRead>(input: R) -> Result<Vec<DetectionRecord>> {
    parse_lines(input, |w| {
        DetectionRecord::new(w.image_id.clone(), w.class.clone(), from_wire(&w)?, w.score.unwrap_or(1.0))
    })
}

/// Records of either kind, with the score when present.
pub fn read_boxes<R: BufRead>(input: R) -> Result<Vec<(GroundTruthRecord, Option<f64>)>> {
    parse_lines(input, |w| {
        let gt = GroundTruthRecord::new(w.image_id.clone(), w.class.clone(), from_wire(&w)?)?;
        Ok((gt, w.score))
    })
}

pub fn write_ground_truth<W: Write>(mut out: W, records: &[GroundTruthRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(&to_wire(&r.image_id, &r.class_label, &r.bbox, None))
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_detections<W: Write>(mut out: W, records: &[DetectionRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(&to_wire(&r.image_id, &r.class_label, &r.bbox, Some(r.score)))
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
