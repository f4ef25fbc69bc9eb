//! PoseTrack-style annotation documents.
//!
//! Keypoints are stored as `K` triplets `(x, y, c)` where `c` is the location
//! probability; `c <= 0` marks a missing joint. The optional `availability`
//! list carries the per-joint availability probability and defaults to 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroundTruthSequence, GtFrame, GtPerson};
use crate::skeleton::{BBox, Keypoint, Pose, SkeletonSpec};
use crate::tracker::{FrameObservations, TrackedFrame, TrackedPose};

use super::features::FeatureTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    /// Frame id.
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub image_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
    /// `[x, y, width, height]`.
    pub bbox: [f64; 4],
    pub keypoints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<Vec<f64>>,
    pub score: f64,
    /// Head segment length for evaluation; derived from the head joints when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub name: String,
    pub keypoints: Vec<String>,
    pub skeleton: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub falloff: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_pair: Option<[usize; 2]>,
}

impl Category {
    pub fn from_skeleton(spec: &SkeletonSpec) -> Self {
        let default = SkeletonSpec::posetrack();
        let is_default = spec == &default;
        Category {
            name: "person".into(),
            keypoints: spec.joint_names.clone(),
            skeleton: spec.edges.iter().map(|&(a, b)| [a, b]).collect(),
            falloff: (!is_default).then(|| spec.falloff.clone()),
            head_pair: (!is_default).then_some([spec.head_pair.0, spec.head_pair.1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationDocument {
    pub images: Vec<ImageEntry>,
    pub annotations: Vec<Annotation>,
    pub categories: Vec<Category>,
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl AnnotationDocument {
    pub fn new(images: Vec<ImageEntry>, spec: &SkeletonSpec) -> Self {
        AnnotationDocument {
            images,
            annotations: Vec::new(),
            categories: vec![Category::from_skeleton(spec)],
        }
    }

    /// Image entries `000000.jpg ...` for frames `0..frames`.
    pub fn sequence_images(frames: u64, width: u32, height: u32) -> Vec<ImageEntry> {
        (0..frames)
            .map(|id| ImageEntry {
                id,
                file_name: format!("{id:06}.jpg"),
                width,
                height,
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AnnotationDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Pretty JSON, fields in declaration order, shortest round-trip floats,
    /// trailing newline.
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn joint_count(&self) -> usize {
        self.categories.first().map_or(0, |c| c.keypoints.len())
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |m: String| Err(Error::Schema(m));
        if self.categories.len() != 1 {
            return schema(format!(
                "expected exactly one category, found {}",
                self.categories.len()
            ));
        }
        self.skeleton()?;
        let k = self.joint_count();
        let mut ids = BTreeSet::new();
        for (i, img) in self.images.iter().enumerate() {
            if !ids.insert(img.id) {
                return schema(format!("images[{i}]: duplicate id {}", img.id));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            let at = |m: String| Error::Schema(format!("annotations[{i}]: {m}"));
            if !ids.contains(&a.image_id) {
                return Err(at(format!("image_id {} not among images", a.image_id)));
            }
            if a.keypoints.len() != 3 * k {
                return Err(at(format!(
                    "keypoints has {} values, expected {}",
                    a.keypoints.len(),
                    3 * k
                )));
            }
            if !finite(&a.keypoints) || !finite(&a.bbox) || !a.score.is_finite() {
                return Err(Error::NonFinite(format!("annotations[{i}]")));
            }
            if a.bbox[2] < 0.0 || a.bbox[3] < 0.0 {
                return Err(at("bbox width and height must be non-negative".into()));
            }
            if let Some(c) = a.keypoints.chunks(3).map(|t| t[2]).find(|c| *c > 1.0) {
                return Err(at(format!("keypoint confidence {c} above 1")));
            }
            if let Some(av) = &a.availability {
                if av.len() != k {
                    return Err(at(format!("availability has {} values, expected {k}", av.len())));
                }
                if !finite(av) {
                    return Err(Error::NonFinite(format!("annotations[{i}].availability")));
                }
                if let Some(v) = av.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(at(format!("availability {v} outside [0, 1]")));
                }
            }
            if let Some(h) = a.head_size {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(at(format!("head_size {h} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Skeleton described by the category; falloff and head pair default to
    /// the PoseTrack layout for 15-joint skeletons.
    pub fn skeleton(&self) -> Result<SkeletonSpec> {
        let cat = self
            .categories
            .first()
            .ok_or_else(|| Error::Schema("no category".into()))?;
        let default = SkeletonSpec::posetrack();
        let k = cat.keypoints.len();
        let falloff = match &cat.falloff {
            Some(f) => f.clone(),
            None if k == default.joint_count() => default.falloff.clone(),
            None => return Err(Error::Schema(format!("category with {k} joints needs falloff"))),
        };
        let head_pair = match cat.head_pair {
            Some([a, b]) => (a, b),
            None if k == default.joint_count() => default.head_pair,
            None => return Err(Error::Schema(format!("category with {k} joints needs head_pair"))),
        };
        let edges = cat.skeleton.iter().map(|&[a, b]| (a, b)).collect();
        SkeletonSpec::new(cat.keypoints.clone(), falloff, head_pair, edges)
            .map_err(|e| Error::Schema(format!("categories[0]: {e}")))
    }

    fn annotation_pose(&self, a: &Annotation) -> Pose {
        let keypoints = a
            .keypoints
            .chunks(3)
            .enumerate()
            .map(|(j, t)| {
                let avl = a.availability.as_ref().map_or(1.0, |v| v[j]);
                (t[2] > 0.0).then(|| Keypoint::new(t[0], t[1], t[2], avl))
            })
            .collect();
        let [x, y, w, h] = a.bbox;
        let mut pose = Pose::new(keypoints, BBox::new(x, y, x + w, y + h));
        pose.score = a.score;
        pose
    }

    fn by_frame(&self) -> BTreeMap<u64, Vec<&Annotation>> {
        let mut map: BTreeMap<u64, Vec<&Annotation>> = self.images.iter().map(|i| (i.id, Vec::new())).collect();
        for a in &self.annotations {
            map.entry(a.image_id).or_default().push(a);
        }
        map
    }

    /// Per-frame detections in file order, with features attached by
    /// `(frame, index within frame)` when a table is given.
    pub fn observations(&self, features: Option<&FeatureTable>) -> Result<Vec<FrameObservations>> {
        if let Some(table) = features {
            let frames = self.by_frame();
            for r in table.records() {
                let n = frames.get(&r.frame).map_or(0, Vec::len);
                if r.detection >= n {
                    return Err(Error::Schema(format!(
                        "feature record ({}, {}) has no matching annotation",
                        r.frame, r.detection
                    )));
                }
            }
        }
        Ok(self
            .by_frame()
            .into_iter()
            .map(|(frame, anns)| {
                let mut obs = FrameObservations::new(frame, anns.iter().map(|a| self.annotation_pose(a)).collect());
                if let Some(table) = features {
                    obs.features = (0..anns.len()).map(|i| table.get(frame, i).cloned()).collect();
                }
                obs
            })
            .collect())
    }

    pub fn tracked_frames(&self) -> Result<Vec<TrackedFrame>> {
        self.by_frame()
            .into_iter()
            .map(|(frame, anns)| {
                let mut poses = anns
                    .iter()
                    .map(|a| {
                        let track_id = a
                            .track_id
                            .ok_or_else(|| Error::Schema(format!("annotation in frame {frame} lacks track_id")))?;
                        Ok(TrackedPose {
                            track_id,
                            pose: self.annotation_pose(a),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                poses.sort_by_key(|p| p.track_id);
                Ok(TrackedFrame { frame, poses })
            })
            .collect()
    }

    pub fn ground_truth(&self) -> Result<GroundTruthSequence> {
        let spec = self.skeleton()?;
        let (ha, hb) = spec.head_pair;
        let frames = self
            .by_frame()
            .into_iter()
            .map(|(frame, anns)| {
                let people = anns
                    .iter()
                    .map(|a| {
                        let track_id = a
                            .track_id
                            .ok_or_else(|| Error::Schema(format!("annotation in frame {frame} lacks track_id")))?;
                        let pose = self.annotation_pose(a);
                        let head_size = match (a.head_size, pose.keypoints[ha], pose.keypoints[hb]) {
                            (Some(h), _, _) => h,
                            (None, Some(p), Some(q)) => p.distance_sq(&q).sqrt(),
                            _ => {
                                return Err(Error::Schema(format!(
                                    "track {track_id} in frame {frame}: no head_size and head joints missing"
                                )))
                            }
                        };
                        if head_size.is_nan() || head_size <= 0.0 {
                            return Err(Error::Schema(format!(
                                "track {track_id} in frame {frame}: zero head size"
                            )));
                        }
                        Ok(GtPerson {
                            track_id,
                            pose,
                            head_size,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GtFrame { frame, people })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundTruthSequence { frames })
    }

    pub fn push_pose(&mut self, frame: u64, track_id: Option<u64>, pose: &Pose, head_size: Option<f64>) {
        let mut keypoints = Vec::with_capacity(3 * pose.keypoints.len());
        let mut availability = Vec::with_capacity(pose.keypoints.len());
        for k in &pose.keypoints {
            match k {
                Some(k) => {
                    keypoints.extend([k.x, k.y, k.p_loc]);
                    availability.push(k.p_avl);
                }
                None => {
                    keypoints.extend([0.0, 0.0, 0.0]);
                    availability.push(0.0);
                }
            }
        }
        let all_available = pose.keypoints.iter().flatten().all(|k| k.p_avl == 1.0);
        let b = &pose.bbox;
        self.annotations.push(Annotation {
            image_id: frame,
            track_id,
            bbox: [b.x_min, b.y_min, b.width(), b.height()],
            keypoints,
            availability: (!all_available).then_some(availability),
            score: pose.score,
            head_size,
        });
    }

    pub fn from_tracked(images: Vec<ImageEntry>, spec: &SkeletonSpec, frames: &[TrackedFrame]) -> Self {
        let mut doc = Self::new(images, spec);
        for f in frames {
            for p in &f.poses {
                doc.push_pose(f.frame, Some(p.track_id), &p.pose, None);
            }
        }
        doc
    }

    pub fn from_ground_truth(images: Vec<ImageEntry>, spec: &SkeletonSpec, gt: &GroundTruthSequence) -> Self {
        let mut doc = Self::new(images, spec);
        for f in &gt.frames {
            for p in &f.people {
                doc.push_pose(f.frame, Some(p.track_id), &p.pose, Some(p.head_size));
            }
        }
        doc
    }

    pub fn from_observations(images: Vec<ImageEntry>, spec: &SkeletonSpec, obs: &[FrameObservations]) -> Self {
        let mut doc = Self::new(images, spec);
        for o in obs {
            for d in &o.detections {
                doc.push_pose(o.frame, None, d, None);
            }
        }
        doc
    }
}
