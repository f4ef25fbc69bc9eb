use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{distance, frame_poses, gt_points, match_points, prediction_points, GroundTruthSequence, Point};
use crate::error::{Error, Result};
use crate::skeleton::SkeletonSpec;
use crate::tracker::TrackedFrame;

/// `1 - (fp + fn + idsw) / gt`, or `None` without ground truth.
pub fn mota_value(fp: u64, fn_: u64, idsw: u64, gt: u64) -> Option<f64> {
    (gt > 0).then(|| 1.0 - (fp + fn_ + idsw) as f64 / gt as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct JointCounts {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
    pub gt: u64,
    /// `None` when there is no ground truth for this row.
    pub mota: Option<f64>,
}

impl JointCounts {
    fn add(&mut self, other: &JointCounts) {
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.idsw += other.idsw;
        self.gt += other.gt;
    }

    fn finish(mut self) -> Self {
        self.mota = mota_value(self.fp, self.fn_, self.idsw, self.gt);
        self
    }

    pub fn errors(&self) -> u64 {
        self.fp + self.fn_ + self.idsw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointMota {
    pub joint: String,
    #[serde(flatten)]
    pub counts: JointCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMota {
    pub frame: u64,
    #[serde(flatten)]
    pub counts: JointCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotaReport {
    pub joints: Vec<JointMota>,
    pub total: JointCounts,
    #[serde(skip)]
    pub frames: Vec<FrameMota>,
}

impl MotaReport {
    pub fn has_ground_truth(&self) -> bool {
        self.total.gt > 0
    }
}

pub(crate) fn validate_inputs<'a>(
    predictions: &'a [TrackedFrame],
    gt: &GroundTruthSequence,
    spec: &SkeletonSpec,
) -> Result<BTreeMap<u64, &'a TrackedFrame>> {
    let mut seen = BTreeSet::new();
    for f in &gt.frames {
        if !seen.insert(f.frame) {
            return Err(Error::Schema(format!("duplicate ground-truth frame {}", f.frame)));
        }
        let mut ids = BTreeSet::new();
        for p in &f.people {
            spec.check(&p.pose)?;
            if !ids.insert(p.track_id) {
                return Err(Error::Schema(format!(
                    "duplicate ground-truth track {} in frame {}",
                    p.track_id, f.frame
                )));
            }
            if !(p.head_size > 0.0 && p.head_size.is_finite()) {
                return Err(Error::Schema(format!(
                    "head size {} of track {} in frame {} must be positive",
                    p.head_size, p.track_id, f.frame
                )));
            }
        }
    }
    let mut by_frame = BTreeMap::new();
    for f in predictions {
        for p in &f.poses {
            spec.check(&p.pose)?;
        }
        if by_frame.insert(f.frame, f).is_some() {
            return Err(Error::Schema(format!("duplicate prediction frame {}", f.frame)));
        }
    }
    Ok(by_frame)
}

/// CLEAR-MOT accuracy per joint class. Ground-truth frames drive the
/// evaluation; predictions on other frames are ignored.
pub fn mota(
    predictions: &[TrackedFrame],
    gt: &GroundTruthSequence,
    spec: &SkeletonSpec,
    tau_factor: f64,
) -> Result<MotaReport> {
    let by_frame = validate_inputs(predictions, gt, spec)?;
    let k = spec.joint_count();
    let mut joints = vec![JointCounts::default(); k];
    let mut frames = Vec::with_capacity(gt.frames.len());
    // gt track id -> predicted track id, per joint class
    let mut mapping: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); k];

    for gf in &gt.frames {
        let poses = frame_poses(by_frame.get(&gf.frame).copied());
        let mut frame_counts = JointCounts::default();
        for j in 0..k {
            let preds = prediction_points(&poses, j);
            let gts = gt_points(gf, j, tau_factor);
            let mut p_used = vec![false; preds.len()];
            let mut g_used = vec![false; gts.len()];
            let mut c = JointCounts {
                gt: gts.len() as u64,
                ..Default::default()
            };

            // Carry over correspondences that still match.
            for (gi, g) in gts.iter().enumerate() {
                let gid = gf.people[g.index].track_id;
                let Some(&pid) = mapping[j].get(&gid) else { continue };
                let hit = preds
                    .iter()
                    .enumerate()
                    .find(|(pi, p)| !p_used[*pi] && poses[p.index].0 == pid && distance(p, g) <= g.radius);
                if let Some((pi, _)) = hit {
                    p_used[pi] = true;
                    g_used[gi] = true;
                }
            }

            let free_p: Vec<usize> = (0..preds.len()).filter(|&i| !p_used[i]).collect();
            let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !g_used[i]).collect();
            let sub_p: Vec<Point> = free_p
                .iter()
                .map(|&i| Point {
                    index: preds[i].index,
                    x: preds[i].x,
                    y: preds[i].y,
                })
                .collect();
            let sub_g: Vec<_> = free_g
                .iter()
                .map(|&i| super::GtPoint {
                    index: gts[i].index,
                    x: gts[i].x,
                    y: gts[i].y,
                    radius: gts[i].radius,
                })
                .collect();
            for (a, b) in match_points(&sub_p, &sub_g) {
                p_used[free_p[a]] = true;
                g_used[free_g[b]] = true;
                let gid = gf.people[sub_g[b].index].track_id;
                let pid = poses[sub_p[a].index].0;
                if let Some(prev) = mapping[j].insert(gid, pid) {
                    if prev != pid {
                        c.idsw += 1;
                    }
                }
            }

            c.fp = p_used.iter().filter(|u| !**u).count() as u64;
            c.fn_ = g_used.iter().filter(|u| !**u).count() as u64;
            joints[j].add(&c);
            frame_counts.add(&c);
        }
        frames.push(FrameMota {
            frame: gf.frame,
            counts: frame_counts.finish(),
        });
    }

    let mut total = JointCounts::default();
    for c in &joints {
        total.add(c);
    }
    Ok(MotaReport {
        joints: joints
            .into_iter()
            .zip(&spec.joint_names)
            .map(|(c, name)| JointMota {
                joint: name.clone(),
                counts: c.finish(),
            })
            .collect(),
        total: total.finish(),
        frames,
    })
}
