//! Dense `f64` images and their on-disk encodings.
//!
//! Two formats are supported:
//!
//! * binary PPM/PGM (`P6` for 3 channels, `P5` for 1), maxval 255, with
//!   samples mapped linearly between `[0, 1]` and `[0, 255]`;
//! * `OBBR`, a planar little-endian float dump: the ASCII magic `OBBR`, then
//!   `width`, `height`, `channels` as `u32` LE, then `channels * height * width`
//!   `f32` LE samples, channel-major, each plane row-major.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const OBBR_MAGIC: &[u8; 4] = b"OBBR";

/// Row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Format(format!("empty image {width}x{height}x{channels}")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::Format(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite sample".into()));
        }
        Ok(Self { width, height, channels, samples })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.samples[i] = v;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Quarter turn clockwise as seen on screen (y down).
    ///
    /// The continuous point `(x, y)` moves to `(height - y, x)`.
    pub fn rotate90_cw(&self) -> Self {
        let (w, h, ch) = (self.height, self.width, self.channels);
        let mut out = vec![0.0; self.samples.len()];
        for row in 0..h {
            for col in 0..w {
                for c in 0..ch {
                    out[(row * w + col) * ch + c] = self.get(row, self.height - 1 - col, c);
                }
            }
        }
        Self { width: w, height: h, channels: ch, samples: out }
    }

    /// Writes `P6` (3 channels) or `P5` (1 channel).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> Result<()> {
        let magic = match self.channels {
            3 => "P6",
            1 => "P5",
            n => return Err(Error::Format(format!("PPM needs 1 or 3 channels, got {n}"))),
        };
        write!(out, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .samples
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(mut input: R) -> Result<Self> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PPM header".into()));
            }
            tokens.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let channels = match tokens[0].as_str() {
            "P6" => 3,
            "P5" => 1,
            m => return Err(Error::Format(format!("unsupported PPM magic {m}"))),
        };
        let num = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Format(format!("bad PPM header field `{s}`")))
        };
        let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported maxval {maxval}")));
        }
        let n = width * height * channels;
        let body = data.get(pos..pos + n).ok_or_else(|| Error::Format("truncated PPM raster".into()))?;
        let samples = body.iter().map(|&b| b as f64 / maxval as f64).collect();
        Self::new(width, height, channels, samples)
    }

    pub fn write_obbr<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(OBBR_MAGIC)?;
        for d in [self.width, self.height, self.channels] {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.samples.len() * 4);
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    buf.extend_from_slice(&(self.get(x, y, c) as f32).to_le_bytes());
                }
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_obbr<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..4] != OBBR_MAGIC {
            return Err(Error::Format("missing OBBR magic".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let (width, height, channels) = (dim(4), dim(8), dim(12));
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Format("OBBR dimensions overflow".into()))?;
        let mut body = vec![0u8; n * 4];
        input.read_exact(&mut body)?;
        let mut samples = vec![0.0; n];
        let plane = width * height;
        for (k, chunk) in body.chunks_exact(4).enumerate() {
            let (c, p) = (k / plane, k % plane);
            samples[p * channels + c] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
        Self::new(width, height, channels, samples)
    }
}
