//! Anchor layout, five-parameter box deltas, anchor/ground-truth assignment
//! and rotated non-maximum suppression.

mod anchors;
mod delta;
mod matching;
mod nms;

pub use anchors::{gen_anchors, AnchorSpec};
pub use delta::{decode, encode, BoxDelta, MAX_LOG_EXTENT};
pub use matching::{match_anchors, AnchorLabel, MatchConfig, MatchResult};
pub use nms::{rotated_nms, DEFAULT_NMS_IOU};
