//! Geometric primitives shared by every stage: keypoints, poses, boxes, the
//! skeleton layout, and the OKS / IoU similarities.

use crate::error::{Error, Result};

/// Scale used for zero-area boxes.
pub const MIN_OBJECT_SCALE: f64 = 1.0;

/// Default margin added around the minimum bounding rectangle of a pose.
pub const DEFAULT_BOX_MARGIN: f64 = 0.10;

/// Joint layout of a skeleton.
///
/// `falloff[i]` is the per-joint constant `k_i` of the OKS kernel
/// `exp(-d^2 / (2 s^2 k_i^2))`. It follows the COCO convention `k_i = 2 sigma_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    pub joint_names: Vec<String>,
    pub falloff: Vec<f64>,
    /// Joints spanning the head segment, used as the PCKh reference length.
    pub head_pair: (usize, usize),
    /// Limb connections, only used for drawing.
    pub edges: Vec<(usize, usize)>,
}

const POSETRACK_JOINTS: [(&str, f64); 15] = [
    ("right_ankle", 0.089),
    ("right_knee", 0.087),
    ("right_hip", 0.107),
    ("left_hip", 0.107),
    ("left_knee", 0.087),
    ("left_ankle", 0.089),
    ("right_wrist", 0.062),
    ("right_elbow", 0.072),
    ("right_shoulder", 0.079),
    ("left_shoulder", 0.079),
    ("left_elbow", 0.072),
    ("left_wrist", 0.062),
    // head joints reuse the COCO ear sigma
    ("head_bottom", 0.035),
    ("nose", 0.026),
    ("head_top", 0.035),
];

const POSETRACK_EDGES: [(usize, usize); 14] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (2, 8),
    (3, 9),
    (12, 13),
    (13, 14),
];

impl SkeletonSpec {
    pub fn new(
        joint_names: Vec<String>,
        falloff: Vec<f64>,
        head_pair: (usize, usize),
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let spec = SkeletonSpec {
            joint_names,
            falloff,
            head_pair,
            edges,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 15-joint PoseTrack layout with COCO-derived falloff constants.
    pub fn posetrack() -> Self {
        SkeletonSpec {
            joint_names: POSETRACK_JOINTS.iter().map(|(n, _)| n.to_string()).collect(),
            falloff: POSETRACK_JOINTS.iter().map(|(_, s)| 2.0 * s).collect(),
            head_pair: (12, 14),
            edges: POSETRACK_EDGES.to_vec(),
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.joint_names.len();
        if k == 0 {
            return Err(Error::Config("skeleton needs at least one joint".into()));
        }
        if self.falloff.len() != k {
            return Err(Error::Config(format!(
                "skeleton has {k} joints but {} falloff constants",
                self.falloff.len()
            )));
        }
        if let Some(bad) = self.falloff.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("falloff constant {bad} must be positive")));
        }
        let (a, b) = self.head_pair;
        if a == b || a >= k || b >= k {
            return Err(Error::Config(format!(
                "head pair ({a}, {b}) must name two distinct joints below {k}"
            )));
        }
        if let Some(&(a, b)) = self.edges.iter().find(|(a, b)| *a >= k || *b >= k) {
            return Err(Error::Config(format!("edge ({a}, {b}) out of range")));
        }
        Ok(())
    }

    /// Fails unless `pose` has exactly one slot per joint.
    pub fn check(&self, pose: &Pose) -> Result<()> {
        if pose.keypoints.len() != self.joint_count() {
            return Err(Error::SkeletonMismatch {
                expected: self.joint_count(),
                found: pose.keypoints.len(),
            });
        }
        Ok(())
    }
}

impl Default for SkeletonSpec {
    fn default() -> Self {
        Self::posetrack()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub p_loc: f64,
    pub p_avl: f64,
    pub p_conf: f64,
}

impl Keypoint {
    /// Keypoint with its confidence fused as `p_avl * p_loc`.
    pub fn new(x: f64, y: f64, p_loc: f64, p_avl: f64) -> Self {
        Keypoint {
            x,
            y,
            p_loc,
            p_avl,
            p_conf: p_avl * p_loc,
        }
    }

    pub fn distance_sq(&self, other: &Keypoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        debug_assert!(x_max >= x_min && y_max >= y_min);
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub keypoints: Vec<Option<Keypoint>>,
    pub bbox: BBox,
    /// Mean `p_conf` over present keypoints.
    pub score: f64,
}

impl Pose {
    pub fn new(keypoints: Vec<Option<Keypoint>>, bbox: BBox) -> Self {
        let score = mean_confidence(&keypoints);
        Pose { keypoints, bbox, score }
    }

    /// Pose whose box is the expanded minimum bounding rectangle of its keypoints.
    pub fn from_keypoints(keypoints: Vec<Option<Keypoint>>, margin: f64) -> Result<Self> {
        let bbox = bbox_from_keypoints(keypoints.iter().flatten(), margin)?;
        Ok(Pose::new(keypoints, bbox))
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, &Keypoint)> {
        self.keypoints
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.as_ref().map(|k| (i, k)))
    }

    pub fn present_count(&self) -> usize {
        self.keypoints.iter().flatten().count()
    }

    pub fn recompute_score(&mut self) {
        self.score = mean_confidence(&self.keypoints);
    }

    /// Mean keypoint position, `None` when no keypoint is present.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let n = self.present_count();
        if n == 0 {
            return None;
        }
        let (sx, sy) = self
            .keypoints
            .iter()
            .flatten()
            .fold((0.0, 0.0), |(sx, sy), k| (sx + k.x, sy + k.y));
        Some((sx / n as f64, sy / n as f64))
    }
}

fn mean_confidence(keypoints: &[Option<Keypoint>]) -> f64 {
    let (sum, n) = keypoints
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), k| (s + k.p_conf, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// `sqrt(area)` of the pose box, floored at [`MIN_OBJECT_SCALE`] for empty boxes.
pub fn object_scale(pose: &Pose) -> f64 {
    let area = pose.bbox.area();
    if area > 0.0 {
        area.sqrt()
    } else {
        MIN_OBJECT_SCALE
    }
}

/// Squared scale of a pose pair: the geometric mean of both squared scales.
pub fn pair_scale_sq(p: &Pose, q: &Pose) -> f64 {
    object_scale(p) * object_scale(q)
}

/// Mean OKS kernel over the joints present in both poses with `p_conf > threshold`.
///
/// Returns 0 when no joint qualifies.
pub fn oks(p: &Pose, q: &Pose, spec: &SkeletonSpec, visibility_threshold: f64) -> Result<f64> {
    spec.check(p)?;
    spec.check(q)?;
    Ok(keypoint_similarity(p, q, spec, visibility_threshold))
}

/// Shared kernel of [`oks`] and the overlap metric used by box revision.
/// Callers must have checked the skeleton.
pub(crate) fn keypoint_similarity(p: &Pose, q: &Pose, spec: &SkeletonSpec, threshold: f64) -> f64 {
    let s2 = pair_scale_sq(p, q);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (a, b)) in p.keypoints.iter().zip(&q.keypoints).enumerate() {
        let (Some(a), Some(b)) = (a, b) else { continue };
        if a.p_conf > threshold && b.p_conf > threshold {
            let k = spec.falloff[i];
            sum += (-a.distance_sq(b) / (2.0 * s2 * k * k)).exp();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Minimum bounding rectangle of the points, grown on each side by
/// `margin` times the extent along that axis.
pub fn bbox_from_keypoints<'a, I>(keypoints: I, margin: f64) -> Result<BBox>
where
    I: IntoIterator<Item = &'a Keypoint>,
{
    let mut it = keypoints.into_iter();
    let first = it.next().ok_or(Error::NoKeypoints)?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for k in it {
        x0 = x0.min(k.x);
        y0 = y0.min(k.y);
        x1 = x1.max(k.x);
        y1 = y1.max(k.y);
    }
    let mx = margin * (x1 - x0);
    let my = margin * (y1 - y0);
    Ok(BBox::new(x0 - mx, y0 - my, x1 + mx, y1 + my))
}
