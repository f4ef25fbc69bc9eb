//! Box revision: carries unmatched tracks into the current frame with optical
//! flow, proposes boxes for them, and filters the proposals against the
//! detector output. Also hosts the OKS-based NMS used on raw detections.

mod flow;

use std::cmp::Ordering;

pub use flow::{flow_file_name, mean_displacement, FlowDir, FlowField, FlowProvider, FLOW_MAGIC};

use crate::error::{Error, Result};
use crate::skeleton::{bbox_from_keypoints, iou, keypoint_similarity, oks, Pose, SkeletonSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevisionConfig {
    /// Minimum mean keypoint confidence of a revived box (strict).
    pub score_threshold: f64,
    /// Overlap above which a revived box duplicates another person (strict).
    pub overlap_threshold: f64,
    /// Box IoU at or below which two poses never overlap.
    pub iou_gate: f64,
    /// Keypoint confidence threshold inside the overlap metric.
    pub conf_threshold: f64,
    pub nms_oks_threshold: f64,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            score_threshold: 0.35,
            overlap_threshold: 0.5,
            iou_gate: 0.1,
            conf_threshold: 0.35,
            nms_oks_threshold: 0.6,
        }
    }
}

impl RevisionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("score_threshold", self.score_threshold),
            ("overlap_threshold", self.overlap_threshold),
            ("iou_gate", self.iou_gate),
            ("conf_threshold", self.conf_threshold),
            ("nms_oks_threshold", self.nms_oks_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A revived box proposed for an unmatched track.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub track: u64,
    /// Warped pose; its `bbox` is the proposed box.
    pub pose: Pose,
}

/// Moves every keypoint by the flow sampled at its position. The box moves by
/// the mean keypoint displacement; probabilities are unchanged.
pub fn warp_pose(pose: &Pose, flow: &FlowField) -> Pose {
    let mut out = pose.clone();
    let mut shift = (0.0, 0.0);
    let mut n = 0usize;
    for kp in out.keypoints.iter_mut().flatten() {
        let (dx, dy) = flow.sample(kp.x, kp.y);
        kp.x += dx;
        kp.y += dy;
        shift.0 += dx;
        shift.1 += dy;
        n += 1;
    }
    if n > 0 {
        out.bbox = pose.bbox.translate(shift.0 / n as f64, shift.1 / n as f64);
    }
    out
}

pub fn translate_pose(pose: &Pose, dx: f64, dy: f64) -> Pose {
    let mut out = pose.clone();
    for kp in out.keypoints.iter_mut().flatten() {
        kp.x += dx;
        kp.y += dy;
    }
    out.bbox = pose.bbox.translate(dx, dy);
    out
}

/// Minimum bounding rectangle (plus margin) of a warped pose. Poses with
/// fewer than two keypoints cannot be revived and yield `None`.
pub fn propose_box(warped: &Pose, margin: f64) -> Option<(crate::skeleton::BBox, Pose)> {
    if warped.present_count() < 2 {
        return None;
    }
    let bbox = bbox_from_keypoints(warped.keypoints.iter().flatten(), margin).ok()?;
    let mut pose = warped.clone();
    pose.bbox = bbox;
    Some((bbox, pose))
}

/// Keeps candidates whose mean keypoint confidence exceeds the threshold.
pub fn score_filter(candidates: Vec<Candidate>, cfg: &RevisionConfig) -> Vec<Candidate> {
    candidates
        .into_iter()
        .filter(|c| c.pose.score > cfg.score_threshold)
        .collect()
}

/// Overlap of two poses measured on the keypoints both are confident about,
/// gated to 0 unless their boxes overlap with IoU above `cfg.iou_gate`.
pub fn overlap_similarity(p: &Pose, q: &Pose, spec: &SkeletonSpec, cfg: &RevisionConfig) -> Result<f64> {
    spec.check(p)?;
    spec.check(q)?;
    if iou(&p.bbox, &q.bbox) <= cfg.iou_gate {
        return Ok(0.0);
    }
    Ok(keypoint_similarity(p, q, spec, cfg.conf_threshold))
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Drops candidates that duplicate a current detection or a higher-scoring
/// accepted candidate. Output is in descending score order.
pub fn suppress_candidates(
    mut candidates: Vec<Candidate>,
    detections: &[Pose],
    spec: &SkeletonSpec,
    cfg: &RevisionConfig,
) -> Result<Vec<Candidate>> {
    candidates.sort_by(|a, b| by_score_desc(a.pose.score, b.pose.score).then(a.track.cmp(&b.track)));
    let mut kept: Vec<Candidate> = Vec::new();
    'next: for c in candidates {
        for d in detections {
            if overlap_similarity(&c.pose, d, spec, cfg)? > cfg.overlap_threshold {
                continue 'next;
            }
        }
        for k in &kept {
            if overlap_similarity(&c.pose, &k.pose, spec, cfg)? > cfg.overlap_threshold {
                continue 'next;
            }
        }
        kept.push(c);
    }
    Ok(kept)
}

/// Greedy NMS: walk items by descending score, dropping any whose
/// similarity to an already kept item exceeds `threshold`. Returns kept
/// indices in ascending order.
pub fn greedy_nms<F>(scores: &[f64], threshold: f64, mut similarity: F) -> Result<Vec<usize>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| by_score_desc(scores[a], scores[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    'next: for i in order {
        for &k in &kept {
            if similarity(i, k)? > threshold {
                continue 'next;
            }
        }
        kept.push(i);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// OKS-metric NMS over detections, indices of survivors in input order.
pub fn oks_nms(poses: &[Pose], spec: &SkeletonSpec, threshold: f64) -> Result<Vec<usize>> {
    let scores: Vec<f64> = poses.iter().map(|p| p.score).collect();
    greedy_nms(&scores, threshold, |a, b| oks(&poses[a], &poses[b], spec, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{BBox, Keypoint};
    use proptest::prelude::*;

    fn figure(cx: f64, cy: f64, conf: f64) -> Pose {
        let kps = (0..15)
            .map(|i| {
                let x = cx + ((i % 3) as f64 - 1.0) * 10.0;
                let y = cy + (i / 3) as f64 * 15.0;
                Some(Keypoint::new(x, y, conf, 1.0))
            })
            .collect();
        Pose::from_keypoints(kps, 0.1).unwrap()
    }

    fn candidate(track: u64, pose: Pose) -> Candidate {
        Candidate { track, pose }
    }

    #[test]
    fn warp_identity_and_uniform() {
        let p = figure(50.0, 20.0, 0.9);
        assert_eq!(warp_pose(&p, &FlowField::zeros(200, 200).unwrap()), p);

        let w = warp_pose(&p, &FlowField::uniform(200, 200, 3.0, -2.0).unwrap());
        for (a, b) in p.keypoints.iter().flatten().zip(w.keypoints.iter().flatten()) {
            assert_eq!((b.x - a.x, b.y - a.y), (3.0, -2.0));
            assert_eq!(b.p_conf, a.p_conf);
        }
        assert_eq!(w.bbox, p.bbox.translate(3.0, -2.0));
    }

    #[test]
    fn warp_interpolates() {
        let mut f = FlowField::zeros(2, 1).unwrap();
        f.set(1, 0, [2.0, 0.0]);
        let kps = vec![Some(Keypoint::new(0.5, 0.0, 1.0, 1.0))];
        let p = Pose::new(kps, BBox::new(0.5, 0.0, 0.5, 0.0));
        let w = warp_pose(&p, &f);
        assert_eq!(w.keypoints[0].unwrap().x, 1.5);
        assert_eq!(w.keypoints[0].unwrap().y, 0.0);
    }

    #[test]
    fn propose_box_rules() {
        let two = Pose::new(
            vec![
                Some(Keypoint::new(0.0, 0.0, 1.0, 1.0)),
                Some(Keypoint::new(10.0, 20.0, 1.0, 1.0)),
                None,
            ],
            BBox::default(),
        );
        let (b, pose) = propose_box(&two, 0.0).unwrap();
        assert_eq!(b, BBox::new(0.0, 0.0, 10.0, 20.0));
        assert_eq!(pose.bbox, b);
        assert_eq!(propose_box(&two, 0.1).unwrap().0, BBox::new(-1.0, -2.0, 11.0, 22.0));
        let one = Pose::new(
            vec![Some(Keypoint::new(0.0, 0.0, 1.0, 1.0)), None, None],
            BBox::default(),
        );
        assert!(propose_box(&one, 0.1).is_none());
    }

    #[test]
    fn score_filter_is_strict() {
        let cfg = RevisionConfig::default();
        let cands = vec![
            candidate(1, figure(0.0, 0.0, 0.9)),
            candidate(2, figure(0.0, 0.0, 0.1)),
            candidate(3, figure(0.0, 0.0, 0.34)),
            candidate(4, figure(0.0, 0.0, 0.36)),
            candidate(5, figure(0.0, 0.0, 0.35)),
        ];
        let kept: Vec<u64> = score_filter(cands, &cfg).iter().map(|c| c.track).collect();
        assert_eq!(kept, vec![1, 4]);
    }

    #[test]
    fn overlap_cases() {
        let spec = SkeletonSpec::posetrack();
        let cfg = RevisionConfig::default();
        let p = figure(50.0, 50.0, 0.9);
        assert_eq!(overlap_similarity(&p, &p, &spec, &cfg).unwrap(), 1.0);

        // boxes barely touching: IoU ~ 0.05
        let mut q = p.clone();
        let w = p.bbox.width();
        q = translate_pose(&q, w * 0.9, 0.0);
        let v = iou(&p.bbox, &q.bbox);
        assert!(v > 0.0 && v <= 0.1);
        assert_eq!(overlap_similarity(&p, &q, &spec, &cfg).unwrap(), 0.0);

        let weak = figure(50.0, 50.0, 0.2);
        assert!(iou(&p.bbox, &weak.bbox) > 0.1);
        assert_eq!(overlap_similarity(&p, &weak, &spec, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn suppression_cases() {
        let spec = SkeletonSpec::posetrack();
        let cfg = RevisionConfig::default();
        let det = figure(50.0, 50.0, 0.9);

        let kept =
            suppress_candidates(vec![candidate(1, det.clone())], std::slice::from_ref(&det), &spec, &cfg).unwrap();
        assert!(kept.is_empty());

        let far = figure(300.0, 300.0, 0.9);
        let kept = suppress_candidates(vec![candidate(1, far)], std::slice::from_ref(&det), &spec, &cfg).unwrap();
        assert_eq!(kept.len(), 1);

        let a = candidate(4, figure(150.0, 50.0, 0.7));
        let b = candidate(2, translate_pose(&figure(150.0, 50.0, 0.8), 1.0, 1.0));
        let kept = suppress_candidates(vec![a, b], &[det], &spec, &cfg).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].track, 2);
    }

    #[test]
    fn nms_cases() {
        let spec = SkeletonSpec::posetrack();
        let p = figure(50.0, 50.0, 0.9);
        assert_eq!(oks_nms(&[p.clone(), p.clone()], &spec, 0.6).unwrap(), vec![0]);
        let q = figure(400.0, 400.0, 0.8);
        assert_eq!(oks_nms(&[p, q], &spec, 0.6).unwrap(), vec![0, 1]);

        // a > b > c; sim(a,b) = 0.7, sim(a,c) = sim(b,c) = 0.2
        let sim = [[1.0, 0.7, 0.2], [0.7, 1.0, 0.2], [0.2, 0.2, 1.0]];
        let kept = greedy_nms(&[0.9, 0.8, 0.7], 0.6, |i, j| Ok(sim[i][j])).unwrap();
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn defaults() {
        let cfg = RevisionConfig::default();
        assert_eq!(cfg.iou_gate, 0.1);
        assert_eq!(cfg.conf_threshold, 0.35);
        assert_eq!(cfg.nms_oks_threshold, 0.6);
        cfg.validate().unwrap();
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            0.0..200.0f64,
            0.0..200.0f64,
            proptest::collection::vec((-20.0..20.0f64, -30.0..30.0f64, 0.0..=1.0f64), 15),
        )
            .prop_map(|(cx, cy, offs)| {
                let kps = offs
                    .into_iter()
                    .map(|(dx, dy, c)| Some(Keypoint::new(cx + dx, cy + dy, c, 1.0)))
                    .collect();
                Pose::from_keypoints(kps, 0.1).unwrap()
            })
    }

    proptest! {
        #[test]
        fn overlap_symmetric_bounded(p in arb_pose(), q in arb_pose()) {
            let spec = SkeletonSpec::posetrack();
            let cfg = RevisionConfig::default();
            let a = overlap_similarity(&p, &q, &spec, &cfg).unwrap();
            let b = overlap_similarity(&q, &p, &spec, &cfg).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            if iou(&p.bbox, &q.bbox) <= 0.1 {
                prop_assert_eq!(a, 0.0);
            }
        }

        #[test]
        fn suppression_output_is_duplicate_free(cands in proptest::collection::vec(arb_pose(), 0..6),
                                                dets in proptest::collection::vec(arb_pose(), 0..4)) {
            let spec = SkeletonSpec::posetrack();
            let cfg = RevisionConfig::default();
            let cands: Vec<_> = cands.into_iter().enumerate().map(|(i, p)| candidate(i as u64, p)).collect();
            let kept = suppress_candidates(cands, &dets, &spec, &cfg).unwrap();
            for (i, c) in kept.iter().enumerate() {
                for d in &dets {
                    prop_assert!(overlap_similarity(&c.pose, d, &spec, &cfg).unwrap() <= cfg.overlap_threshold);
                }
                for o in &kept[i + 1..] {
                    prop_assert!(overlap_similarity(&c.pose, &o.pose, &spec, &cfg).unwrap() <= cfg.overlap_threshold);
                }
            }
        }

        #[test]
        fn nms_monotone(poses in proptest::collection::vec(arb_pose(), 1..7), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
            let spec = SkeletonSpec::posetrack();
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let n_lo = oks_nms(&poses, &spec, lo).unwrap().len();
            let n_hi = oks_nms(&poses, &spec, hi).unwrap().len();
            prop_assert!(n_lo <= n_hi);
            prop_assert!(n_hi <= poses.len());
        }

        #[test]
        fn exact_translation_flow(p in arb_pose(), dx in -5.0f32..5.0, dy in -5.0f32..5.0) {
            let flow = FlowField::uniform(256, 256, dx, dy).unwrap();
            let warped = warp_pose(&p, &flow);
            let truth = translate_pose(&p, dx as f64, dy as f64);
            for (a, b) in warped.keypoints.iter().flatten().zip(truth.keypoints.iter().flatten()) {
                prop_assert!(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() < 0.51);
            }
        }
    }
}
