//! Dense displacement fields and their binary file format.
//!
//! Layout (little-endian): magic `PEH1`, width and height as `u32`, then
//! `height * width` pairs of `f32` `(dx, dy)` in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Pose;

pub const FLOW_MAGIC: &[u8; 4] = b"PEH1";

/// Per-pixel displacement from frame `t - 1` to frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "flow field must be non-empty, got {width}x{height}"
            )));
        }
        if vectors.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} flow field needs {} vectors, got {}",
                width * height,
                vectors.len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow field".into()));
        }
        Ok(FlowField { width, height, vectors })
    }

    pub fn uniform(width: usize, height: usize, dx: f32, dy: f32) -> Result<Self> {
        FlowField::new(width, height, vec![[dx, dy]; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        FlowField::uniform(width, height, 0.0, 0.0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn get(&self, u: usize, v: usize) -> (f64, f64) {
        let [dx, dy] = self.vectors[v * self.width + u];
        (dx as f64, dy as f64)
    }

    pub fn set(&mut self, u: usize, v: usize, d: [f32; 2]) {
        assert!(d[0].is_finite() && d[1].is_finite());
        self.vectors[v * self.width + u] = d;
    }

    /// Bilinear sample at a sub-pixel position; positions outside the grid
    /// are clamped onto the nearest edge.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let x = if x.is_finite() {
            x.clamp(0.0, (self.width - 1) as f64)
        } else {
            0.0
        };
        let y = if y.is_finite() {
            y.clamp(0.0, (self.height - 1) as f64)
        } else {
            0.0
        };
        let u0 = x.floor() as usize;
        let v0 = y.floor() as usize;
        let u1 = (u0 + 1).min(self.width - 1);
        let v1 = (v0 + 1).min(self.height - 1);
        let fx = x - u0 as f64;
        let fy = y - v0 as f64;
        let lerp = |a: (f64, f64), b: (f64, f64), t: f64| (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        let top = lerp(self.get(u0, v0), self.get(u1, v0), fx);
        let bottom = lerp(self.get(u0, v1), self.get(u1, v1), fx);
        lerp(top, bottom, fy)
    }

    pub fn encode<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FLOW_MAGIC)?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.vectors.len() * 8);
        for [dx, dy] in &self.vectors {
            buf.extend_from_slice(&dx.to_le_bytes());
            buf.extend_from_slice(&dy.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn decode<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header)
            .map_err(|e| Error::Schema(format!("truncated flow header: {e}")))?;
        if &header[..4] != FLOW_MAGIC {
            return Err(Error::Schema(format!("bad flow magic {:?}", &header[..4])));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != width * height * 8 {
            return Err(Error::Schema(format!(
                "{width}x{height} flow body needs {} bytes, found {}",
                width * height * 8,
                body.len()
            )));
        }
        let vectors = body
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                ]
            })
            .collect();
        FlowField::new(width, height, vectors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.encode(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::file(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        FlowField::decode(bytes.as_slice()).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// File name holding the transition `frame - 1 -> frame`.
pub fn flow_file_name(frame: u64) -> String {
    format!("flow_{frame:06}.bin")
}

/// Directory of per-transition flow files.
#[derive(Debug, Clone)]
pub struct FlowDir {
    dir: PathBuf,
}

impl FlowDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FlowDir { dir: dir.into() }
    }

    pub fn path(&self, frame: u64) -> PathBuf {
        self.dir.join(flow_file_name(frame))
    }

    /// Field for the transition into `frame`, `None` when no file exists.
    pub fn field(&self, frame: u64) -> Result<Option<FlowField>> {
        let path = self.path(frame);
        if !path.exists() {
            return Ok(None);
        }
        FlowField::load(&path).map(Some)
    }

    pub fn store(&self, frame: u64, field: &FlowField) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::file(&self.dir, e))?;
        field.save(&self.path(frame))
    }
}

/// How an unmatched track is carried into the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowProvider {
    /// Dense field supplied with the frame (from flow files).
    #[default]
    Dense,
    /// Uniform displacement extrapolated from the track's last two poses.
    ConstantVelocity,
    /// No motion.
    Identity,
}

/// Mean displacement of the keypoints present in both poses.
pub fn mean_displacement(from: &Pose, to: &Pose) -> (f64, f64) {
    let mut sum = (0.0, 0.0);
    let mut n = 0usize;
    for (a, b) in from.keypoints.iter().zip(&to.keypoints) {
        if let (Some(a), Some(b)) = (a, b) {
            sum.0 += b.x - a.x;
            sum.1 += b.y - a.y;
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sum.0 / n as f64, sum.1 / n as f64)
    }
}
