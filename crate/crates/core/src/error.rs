use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("degenerate raster: no sample point falls inside either box (step {step})")]
    DegenerateRaster { step: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("positive pair set is empty")]
    EmptyPairSet,

    #[error("invalid anchor spec: {0}")]
    InvalidSpec(String),

    #[error("delta extent {0} exceeds the decode overflow guard")]
    DecodeOverflow(f64),

    #[error("cannot adapt {from} channels to {to}")]
    Channel { from: usize, to: usize },

    #[error("could not place ship {index} after {attempts} attempts")]
    Placement { index: usize, attempts: usize },

    #[error("optimizer diverged at step {step}: non-finite gradient")]
    Divergence { step: usize },

    #[error("detection references unknown image `{0}`")]
    UnknownImage(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("image format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
