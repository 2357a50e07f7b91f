//! Oriented bounding box toolkit: rotated geometry, pixel IoU and its loss,
//! anchor codec and rotated NMS, patch extraction, rotated mAP evaluation,
//! synthetic ship scenes and gradient-based box fitting.

pub mod codec;
pub mod error;
pub mod eval;
pub mod fit;
pub mod geometry;
pub mod patch;
pub mod piou;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{hbb_iou, intersect_convex, skew_iou, ConvexPolygon, OrientedBox, Point};
pub use raster::ImageRaster;
