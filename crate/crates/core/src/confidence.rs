//! Heatmap rendering and decoding, the reference training objectives of the
//! keypoint network, and keypoint confidence fusion / filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Pose;

/// Probabilities in the focal loss are clamped to `[EPS, 1 - EPS]`.
pub const FOCAL_EPS: f64 = 1e-7;

/// Dense `width x height` response map stored row-major (`values[v * width + u]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("heatmap must be non-empty, got {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} heatmap needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("heatmap".into()));
        }
        Ok(Heatmap { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Heatmap::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.values[v * self.width + u] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub sigma: f64,
    pub amplitude: f64,
}

impl GaussianSpec {
    pub fn new(sigma: f64) -> Self {
        GaussianSpec { sigma, amplitude: 1.0 }
    }
}

/// Untruncated 2-D Gaussian centred at `center`, sampled at integer pixels.
pub fn render_gaussian(center: (f64, f64), spec: GaussianSpec, width: usize, height: usize) -> Result<Heatmap> {
    if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
        return Err(Error::Config(format!(
            "gaussian sigma must be positive, got {}",
            spec.sigma
        )));
    }
    let denom = 2.0 * spec.sigma * spec.sigma;
    let mut values = Vec::with_capacity(width * height);
    for v in 0..height {
        let dy = v as f64 - center.1;
        for u in 0..width {
            let dx = u as f64 - center.0;
            values.push(spec.amplitude * (-(dx * dx + dy * dy) / denom).exp());
        }
    }
    Heatmap::new(width, height, values)
}

/// Location of the strongest response and that response clamped to `[0, 1]`.
///
/// Ties go to the smallest row-major index.
pub fn decode_heatmap(map: &Heatmap) -> ((f64, f64), f64) {
    let mut best = 0;
    for (i, &v) in map.values.iter().enumerate() {
        if v > map.values[best] {
            best = i;
        }
    }
    let u = best % map.width;
    let v = best / map.width;
    ((u as f64, v as f64), map.values[best].clamp(0.0, 1.0))
}

/// Mean squared error between predicted and target heatmap stacks, normalised
/// by `K * W * H`.
pub fn heatmap_mse_loss(predicted: &[Heatmap], target: &[Heatmap]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predicted heatmaps vs {} targets",
            predicted.len(),
            target.len()
        )));
    }
    let Some(first) = predicted.first() else {
        return Err(Error::Shape("empty heatmap stack".into()));
    };
    let (w, h) = (first.width, first.height);
    let mut sum = 0.0;
    for (k, (m, g)) in predicted.iter().zip(target).enumerate() {
        if (m.width, m.height) != (w, h) || (g.width, g.height) != (w, h) {
            return Err(Error::Shape(format!("heatmap {k} does not match {w}x{h}")));
        }
        sum += m
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(sum / (predicted.len() * w * h) as f64)
}

/// Alpha-balanced focal loss of a binary availability prediction.
pub fn focal_loss(p: f64, label: i64, cfg: &LossConfig) -> Result<f64> {
    let p = p.clamp(FOCAL_EPS, 1.0 - FOCAL_EPS);
    match label {
        1 => Ok(-cfg.alpha * (1.0 - p).powf(cfg.gamma) * p.ln()),
        0 => Ok(-(1.0 - cfg.alpha) * p.powf(cfg.gamma) * (1.0 - p).ln()),
        other => Err(Error::Label(other)),
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Probability { name, value })
    }
}

/// Keypoint confidence `p_avl * p_loc`.
pub fn fuse_confidence(p_avl: f64, p_loc: f64) -> Result<f64> {
    Ok(check_probability("p_avl", p_avl)? * check_probability("p_loc", p_loc)?)
}

/// Which probability gates keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// `p_conf = p_avl * p_loc`.
    #[default]
    Fused,
    /// `p_conf = p_loc`; availability is ignored.
    LocationOnly,
}

/// Recomputes `p_conf` on every keypoint according to `mode`.
pub fn apply_confidence(pose: &Pose, mode: ConfidenceMode) -> Result<Pose> {
    let mut out = pose.clone();
    for kp in out.keypoints.iter_mut().flatten() {
        kp.p_conf = match mode {
            ConfidenceMode::Fused => fuse_confidence(kp.p_avl, kp.p_loc)?,
            ConfidenceMode::LocationOnly => check_probability("p_loc", kp.p_loc)?,
        };
    }
    out.recompute_score();
    Ok(out)
}

/// Drops keypoints with `p_conf <= threshold` and refreshes the score.
pub fn filter_keypoints(pose: &Pose, threshold: f64) -> Pose {
    let mut out = pose.clone();
    for slot in out.keypoints.iter_mut() {
        if slot.is_some_and(|k| k.p_conf <= threshold) {
            *slot = None;
        }
    }
    out.recompute_score();
    out
}
