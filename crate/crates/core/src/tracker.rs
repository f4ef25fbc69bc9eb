//! Online tracker. Each frame runs, in order: confidence fusion and keypoint
//! filtering, OKS-NMS, OKS/Hungarian association against active tracks, box
//! revision of unmatched tracks, gallery retrieval for unmatched detections,
//! and fresh id allocation.

use std::collections::{BTreeMap, VecDeque};

use log::debug;

use crate::association::{associate, build_similarity, DEFAULT_MATCH_THRESHOLD};
use crate::confidence::{apply_confidence, filter_keypoints, ConfidenceMode};
use crate::error::{Error, Result};
use crate::reid::{FeatureVector, Gallery, ReidConfig};
use crate::revision::{
    mean_displacement, oks_nms, propose_box, score_filter, suppress_candidates, translate_pose, warp_pose, Candidate,
    FlowField, FlowProvider, RevisionConfig,
};
use crate::skeleton::{Pose, SkeletonSpec, DEFAULT_BOX_MARGIN};

/// Poses kept per track; two are enough for constant-velocity extrapolation.
pub const HISTORY_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Keypoints with `p_conf` at or below this are dropped. Also used as the
    /// keypoint threshold inside association and the overlap metric.
    pub conf_threshold: f64,
    pub confidence_mode: ConfidenceMode,
    pub match_threshold: f64,
    pub nms_oks_threshold: f64,
    pub revival_margin: f64,
    pub enable_revision: bool,
    pub enable_reid: bool,
    pub flow_provider: FlowProvider,
    /// `conf_threshold` and `nms_oks_threshold` in here are overridden by the
    /// top-level fields.
    pub revision: RevisionConfig,
    pub reid: ReidConfig,
    pub feature_dim: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            conf_threshold: 0.35,
            confidence_mode: ConfidenceMode::Fused,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            nms_oks_threshold: 0.6,
            revival_margin: DEFAULT_BOX_MARGIN,
            enable_revision: true,
            enable_reid: true,
            flow_provider: FlowProvider::Dense,
            revision: RevisionConfig::default(),
            reid: ReidConfig::default(),
            feature_dim: 512,
        }
    }
}

impl TrackerConfig {
    /// Baseline pipeline: no revision, no retrieval.
    pub fn baseline() -> Self {
        TrackerConfig {
            enable_revision: false,
            enable_reid: false,
            ..Default::default()
        }
    }

    pub fn revision_config(&self) -> RevisionConfig {
        RevisionConfig {
            conf_threshold: self.conf_threshold,
            nms_oks_threshold: self.nms_oks_threshold,
            ..self.revision
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("conf_threshold", self.conf_threshold),
            ("match_threshold", self.match_threshold),
            ("nms_oks_threshold", self.nms_oks_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(self.revival_margin >= 0.0 && self.revival_margin.is_finite()) {
            return Err(Error::Config(format!(
                "revival_margin = {} must be non-negative",
                self.revival_margin
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        self.revision_config().validate()?;
        self.reid.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub pose: Pose,
    /// Most recent poses, oldest first; the last one is `pose`.
    pub history: VecDeque<Pose>,
    pub state: TrackState,
    pub lost_since: Option<u64>,
    pub feature: Option<FeatureVector>,
    /// Last frame in which the track produced a pose.
    pub last_frame: u64,
    /// Current pose came from box revision rather than a detection.
    pub revived: bool,
}

impl Track {
    fn new(id: u64, pose: Pose, feature: Option<FeatureVector>, frame: u64) -> Self {
        Track {
            id,
            history: VecDeque::from([pose.clone()]),
            pose,
            state: TrackState::Active,
            lost_since: None,
            feature,
            last_frame: frame,
            revived: false,
        }
    }

    fn advance(&mut self, pose: Pose, frame: u64) {
        if self.history.len() == HISTORY_DEPTH {
            self.history.pop_front();
        }
        self.history.push_back(pose.clone());
        self.pose = pose;
        self.last_frame = frame;
    }
}

/// Detections, optional appearance features and optional flow for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    pub frame: u64,
    pub detections: Vec<Pose>,
    /// Either empty or one slot per detection.
    pub features: Vec<Option<FeatureVector>>,
    /// Dense flow for the transition from the previous frame.
    pub flow: Option<FlowField>,
}

impl FrameObservations {
    pub fn new(frame: u64, detections: Vec<Pose>) -> Self {
        FrameObservations {
            frame,
            detections,
            features: Vec::new(),
            flow: None,
        }
    }

    fn feature(&self, i: usize) -> Option<&FeatureVector> {
        self.features.get(i).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPose {
    pub track_id: u64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub frame: u64,
    /// Sorted by track id, at most one pose per id.
    pub poses: Vec<TrackedPose>,
}

/// How a pose of the output came about, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Matched,
    Revived,
    Retrieved,
    New,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    spec: SkeletonSpec,
    cfg: TrackerConfig,
    tracks: BTreeMap<u64, Track>,
    gallery: Gallery,
    next_id: u64,
    last_frame: Option<u64>,
    origins: BTreeMap<u64, Origin>,
}

impl Tracker {
    pub fn new(spec: SkeletonSpec, cfg: TrackerConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        Ok(Tracker {
            gallery: Gallery::new(cfg.feature_dim),
            spec,
            cfg,
            tracks: BTreeMap::new(),
            next_id: 1,
            last_frame: None,
            origins: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }

    /// Origin of each pose emitted by the last `step`.
    pub fn last_origins(&self) -> &BTreeMap<u64, Origin> {
        &self.origins
    }

    fn allocate(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Confidence fusion, keypoint filtering and OKS-NMS. Returns the
    /// surviving detections paired with their original index.
    fn prepare(&self, obs: &FrameObservations) -> Result<Vec<(usize, Pose)>> {
        let mut filtered = Vec::with_capacity(obs.detections.len());
        for (i, det) in obs.detections.iter().enumerate() {
            self.spec.check(det)?;
            let pose = filter_keypoints(
                &apply_confidence(det, self.cfg.confidence_mode)?,
                self.cfg.conf_threshold,
            );
            if pose.present_count() > 0 {
                filtered.push((i, pose));
            }
        }
        let poses: Vec<Pose> = filtered.iter().map(|(_, p)| p.clone()).collect();
        let keep = oks_nms(&poses, &self.spec, self.cfg.nms_oks_threshold)?;
        let mut keep = keep.into_iter().peekable();
        Ok(filtered
            .into_iter()
            .enumerate()
            .filter_map(|(j, item)| {
                if keep.peek() == Some(&j) {
                    keep.next();
                    Some(item)
                } else {
                    None
                }
            })
            .collect())
    }

    /// Moves a track's pose into the current frame.
    fn carry_forward(&self, track: &Track, flow: Option<&FlowField>) -> Pose {
        match (self.cfg.flow_provider, flow) {
            (FlowProvider::Dense, Some(field)) => warp_pose(&track.pose, field),
            (FlowProvider::Dense, None) => {
                debug!("no flow for track {}, carrying pose unchanged", track.id);
                track.pose.clone()
            }
            (FlowProvider::ConstantVelocity, _) => {
                let (dx, dy) = match (track.history.len(), track.history.back()) {
                    (n, Some(last)) if n >= 2 => mean_displacement(&track.history[n - 2], last),
                    _ => (0.0, 0.0),
                };
                translate_pose(&track.pose, dx, dy)
            }
            (FlowProvider::Identity, _) => track.pose.clone(),
        }
    }

    /// Processes one frame and returns every pose emitted for it.
    pub fn step(&mut self, obs: &FrameObservations) -> Result<TrackedFrame> {
        let frame = obs.frame;
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(Error::FrameOrder { previous, got: frame });
            }
        }
        if !obs.features.is_empty() && obs.features.len() != obs.detections.len() {
            return Err(Error::Shape(format!(
                "frame {frame}: {} features for {} detections",
                obs.features.len(),
                obs.detections.len()
            )));
        }
        if let Some(f) = obs.features.iter().flatten().find(|f| f.dim() != self.cfg.feature_dim) {
            return Err(Error::Dimension {
                expected: self.cfg.feature_dim,
                found: f.dim(),
            });
        }

        let prepared = self.prepare(obs)?;
        let (source, detections): (Vec<usize>, Vec<Pose>) = prepared.into_iter().unzip();
        let features: Vec<Option<FeatureVector>> = source.iter().map(|&i| obs.feature(i).cloned()).collect();
        let mut origins = BTreeMap::new();

        // association against tracks that were active in the previous frame
        let active: Vec<u64> = self
            .tracks
            .values()
            .filter(|t| t.state == TrackState::Active)
            .map(|t| t.id)
            .collect();
        let matrix = build_similarity(
            active.iter().map(|id| (*id, &self.tracks[id].pose)),
            &detections,
            &self.spec,
            self.cfg.conf_threshold,
        )?;
        let assignment = associate(&matrix, self.cfg.match_threshold);
        for m in &assignment.matches {
            let track = self.tracks.get_mut(&m.track).expect("active track");
            track.advance(detections[m.detection].clone(), frame);
            track.revived = false;
            if let Some(f) = &features[m.detection] {
                track.feature = Some(f.clone());
            }
            origins.insert(m.track, Origin::Matched);
        }

        // box revision; a track revived in the previous frame is not revived again
        let mut newly_lost = Vec::new();
        let mut revived = Vec::new();
        if self.cfg.enable_revision {
            let rev_cfg = self.cfg.revision_config();
            let mut candidates = Vec::new();
            for id in &assignment.unmatched_tracks {
                let track = &self.tracks[id];
                if track.revived {
                    continue;
                }
                let warped = self.carry_forward(track, obs.flow.as_ref());
                if let Some((_, pose)) = propose_box(&warped, self.cfg.revival_margin) {
                    candidates.push(Candidate { track: *id, pose });
                }
            }
            let candidates = score_filter(candidates, &rev_cfg);
            for c in suppress_candidates(candidates, &detections, &self.spec, &rev_cfg)? {
                let track = self.tracks.get_mut(&c.track).expect("active track");
                track.advance(c.pose, frame);
                track.revived = true;
                origins.insert(c.track, Origin::Revived);
                revived.push(c.track);
            }
        }
        for id in &assignment.unmatched_tracks {
            if !revived.contains(id) {
                newly_lost.push(*id);
            }
        }

        // identity retrieval, then fresh ids
        for &j in &assignment.unmatched_detections {
            let pose = detections[j].clone();
            let feature = features[j].clone();
            let hit = match (&feature, self.cfg.enable_reid) {
                (Some(f), true) => self.gallery.retrieve(f, &self.cfg.reid)?,
                _ => None,
            };
            match hit.and_then(|id| self.tracks.get_mut(&id)) {
                Some(track) => {
                    track.history.clear();
                    track.advance(pose, frame);
                    track.state = TrackState::Active;
                    track.lost_since = None;
                    track.revived = false;
                    if feature.is_some() {
                        track.feature = feature;
                    }
                    origins.insert(track.id, Origin::Retrieved);
                }
                None => {
                    let id = self.allocate();
                    self.tracks.insert(id, Track::new(id, pose, feature, frame));
                    origins.insert(id, Origin::New);
                }
            }
        }

        for id in newly_lost {
            let track = self.tracks.get_mut(&id).expect("active track");
            track.state = TrackState::Lost;
            track.lost_since = Some(frame);
            track.revived = false;
            if self.cfg.enable_reid {
                if let Some(f) = &track.feature {
                    self.gallery.insert(id, f.clone(), track.last_frame)?;
                }
            }
        }
        self.gallery.prune(frame, &self.cfg.reid);
        let gallery = &self.gallery;
        self.tracks
            .retain(|id, t| t.state == TrackState::Active || gallery.contains(*id));

        self.last_frame = Some(frame);
        self.origins = origins;
        let poses = self
            .tracks
            .values()
            .filter(|t| t.state == TrackState::Active)
            .map(|t| TrackedPose {
                track_id: t.id,
                pose: t.pose.clone(),
            })
            .collect();
        Ok(TrackedFrame { frame, poses })
    }
}

/// Tracks a whole sequence with a fresh tracker.
pub fn run<'a, I>(frames: I, spec: &SkeletonSpec, cfg: &TrackerConfig) -> Result<Vec<TrackedFrame>>
where
    I: IntoIterator<Item = &'a FrameObservations>,
{
    let mut tracker = Tracker::new(spec.clone(), cfg.clone())?;
    frames.into_iter().map(|obs| tracker.step(obs)).collect()
}
