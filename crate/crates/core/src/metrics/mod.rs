//! Keypoint-level evaluation of tracked poses: CLEAR-MOT accuracy and mean
//! average precision, with PCKh-style matching.

mod ap;
mod mota;
mod report;

pub use ap::{map_eval, ApReport, JointAp};
pub use mota::{mota, mota_value, JointCounts, MotaReport};
pub use report::EvalReport;

use crate::association::hungarian_assign;
use crate::skeleton::Pose;
use crate::tracker::TrackedFrame;

/// Default acceptance radius as a fraction of the head segment length.
pub const DEFAULT_TAU_FACTOR: f64 = 0.5;

/// One annotated person; only visible joints are present in `pose`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtPerson {
    pub track_id: u64,
    pub pose: Pose,
    pub head_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtFrame {
    pub frame: u64,
    pub people: Vec<GtPerson>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSequence {
    pub frames: Vec<GtFrame>,
}

impl GroundTruthSequence {
    pub fn visible_joints(&self) -> usize {
        self.frames
            .iter()
            .flat_map(|f| &f.people)
            .map(|p| p.pose.present_count())
            .sum()
    }
}

/// Matching of one joint class within one frame. Indices refer to the
/// prediction poses and ground-truth people of that frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointMatching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_ground_truth: Vec<usize>,
}

pub(crate) struct Point {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

pub(crate) struct GtPoint {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

pub(crate) fn distance(p: &Point, g: &GtPoint) -> f64 {
    (p.x - g.x).hypot(p.y - g.y)
}

pub(crate) fn prediction_points(poses: &[(u64, &Pose)], joint: usize) -> Vec<Point> {
    poses
        .iter()
        .enumerate()
        .filter_map(|(index, (_, pose))| pose.keypoints[joint].map(|k| Point { index, x: k.x, y: k.y }))
        .collect()
}

pub(crate) fn gt_points(gt: &GtFrame, joint: usize, tau_factor: f64) -> Vec<GtPoint> {
    gt.people
        .iter()
        .enumerate()
        .filter_map(|(index, person)| {
            person.pose.keypoints[joint].map(|k| GtPoint {
                index,
                x: k.x,
                y: k.y,
                radius: tau_factor * person.head_size,
            })
        })
        .collect()
}

/// Maximum-cardinality, minimum-total-distance matching among pairs within
/// the acceptance radius. Returns `(prediction, ground truth)` positions
/// into the given slices.
pub(crate) fn match_points(preds: &[Point], gts: &[GtPoint]) -> Vec<(usize, usize)> {
    if preds.is_empty() || gts.is_empty() {
        return Vec::new();
    }
    let dist: Vec<Vec<Option<f64>>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    let d = distance(p, g);
                    (d <= g.radius).then_some(d)
                })
                .collect()
        })
        .collect();
    // Any acceptable pair outweighs every possible distance saving, so the
    // optimum first maximises the number of pairs, then minimises distance.
    let big = 1.0 + dist.iter().flatten().flatten().sum::<f64>();
    let weights: Vec<Vec<f64>> = dist
        .iter()
        .map(|row| row.iter().map(|d| d.map_or(0.0, |d| big - d)).collect())
        .collect();
    hungarian_assign(&weights)
        .into_iter()
        .filter(|&(p, g)| dist[p][g].is_some())
        .collect()
}

pub(crate) fn frame_poses(frame: Option<&TrackedFrame>) -> Vec<(u64, &Pose)> {
    frame
        .map(|f| f.poses.iter().map(|p| (p.track_id, &p.pose)).collect())
        .unwrap_or_default()
}

/// Per joint class, pairs predictions with visible ground truth within
/// `tau_factor` head lengths.
pub fn match_joints(predictions: &TrackedFrame, gt: &GtFrame, tau_factor: f64) -> Vec<JointMatching> {
    let poses = frame_poses(Some(predictions));
    let joints = gt
        .people
        .first()
        .map(|p| p.pose.keypoints.len())
        .or_else(|| predictions.poses.first().map(|p| p.pose.keypoints.len()))
        .unwrap_or(0);
    (0..joints)
        .map(|j| {
            let preds = prediction_points(&poses, j);
            let gts = gt_points(gt, j, tau_factor);
            let pairs = match_points(&preds, &gts);
            let mut p_used = vec![false; preds.len()];
            let mut g_used = vec![false; gts.len()];
            for &(p, g) in &pairs {
                p_used[p] = true;
                g_used[g] = true;
            }
            JointMatching {
                pairs: pairs.iter().map(|&(p, g)| (preds[p].index, gts[g].index)).collect(),
                unmatched_predictions: preds
                    .iter()
                    .zip(&p_used)
                    .filter(|(_, &u)| !u)
                    .map(|(p, _)| p.index)
                    .collect(),
                unmatched_ground_truth: gts
                    .iter()
                    .zip(&g_used)
                    .filter(|(_, &u)| !u)
                    .map(|(g, _)| g.index)
                    .collect(),
            }
        })
        .collect()
}
