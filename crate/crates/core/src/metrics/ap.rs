use serde::Serialize;

use super::mota::validate_inputs;
use super::{distance, frame_poses, gt_points, prediction_points, GroundTruthSequence};
use crate::error::Result;
use crate::skeleton::SkeletonSpec;
use crate::tracker::TrackedFrame;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointAp {
    pub joint: String,
    /// `None` when the joint class has no visible ground truth.
    pub ap: Option<f64>,
    pub gt: u64,
    pub predictions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApReport {
    pub joints: Vec<JointAp>,
    /// Mean over joints that have ground truth; 0 when none do.
    pub map: f64,
}

/// Area under the interpolated precision-recall curve for a ranked list of
/// hit/miss outcomes against `n_gt` positives.
pub(crate) fn average_precision(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // running maximum from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let area: f64 = hits.iter().zip(&precision).filter(|(h, _)| **h).map(|(_, p)| *p).sum();
    area / n_gt as f64
}

struct Ranked {
    score: f64,
    frame_pos: usize,
    x: f64,
    y: f64,
}

/// Per-joint average precision with predictions ranked by pose score.
pub fn map_eval(
    predictions: &[TrackedFrame],
    gt: &GroundTruthSequence,
    spec: &SkeletonSpec,
    tau_factor: f64,
) -> Result<ApReport> {
    let by_frame = validate_inputs(predictions, gt, spec)?;
    let mut joints = Vec::with_capacity(spec.joint_count());
    for (j, name) in spec.joint_names.iter().enumerate() {
        let mut ranked = Vec::new();
        let mut gts = Vec::with_capacity(gt.frames.len());
        for (frame_pos, gf) in gt.frames.iter().enumerate() {
            let poses = frame_poses(by_frame.get(&gf.frame).copied());
            for p in prediction_points(&poses, j) {
                ranked.push(Ranked {
                    score: poses[p.index].1.score,
                    frame_pos,
                    x: p.x,
                    y: p.y,
                });
            }
            gts.push(gt_points(gf, j, tau_factor));
        }
        // stable: equal scores keep frame then pose order
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score));

        let n_gt: usize = gts.iter().map(Vec::len).sum();
        let mut claimed: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
        let hits: Vec<bool> = ranked
            .iter()
            .map(|r| {
                let point = super::Point {
                    index: 0,
                    x: r.x,
                    y: r.y,
                };
                let best = gts[r.frame_pos]
                    .iter()
                    .enumerate()
                    .filter(|(gi, _)| !claimed[r.frame_pos][*gi])
                    .map(|(gi, g)| (distance(&point, g), gi, g.radius))
                    .filter(|(d, _, radius)| d <= radius)
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match best {
                    Some((_, gi, _)) => {
                        claimed[r.frame_pos][gi] = true;
                        true
                    }
                    None => false,
                }
            })
            .collect();
        joints.push(JointAp {
            joint: name.clone(),
            ap: (n_gt > 0).then(|| average_precision(&hits, n_gt)),
            gt: n_gt as u64,
            predictions: ranked.len() as u64,
        });
    }
    let defined: Vec<f64> = joints.iter().filter_map(|j| j.ap).collect();
    let map = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(ApReport { joints, map })
}
