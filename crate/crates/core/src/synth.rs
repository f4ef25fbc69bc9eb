//! Deterministic synthetic scenarios: ground-truth trajectories of stick
//! figures, corrupted detections, exact dense flow and appearance features.
//!
//! Random numbers come from ChaCha8 seeded with `ScenarioConfig::seed`;
//! features are drawn first, then for every frame, agent and joint in order
//! two normal noise samples followed by two uniforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroundTruthSequence, GtFrame, GtPerson};
use crate::reid::FeatureVector;
use crate::revision::FlowField;
use crate::skeleton::{bbox_from_keypoints, Keypoint, Pose, SkeletonSpec, DEFAULT_BOX_MARGIN};
use crate::tracker::{FrameObservations, TrackedFrame, TrackedPose};

/// Joint offsets of a figure at scale 1, relative to the hip centre, in the
/// order of [`SkeletonSpec::posetrack`]. Roughly 90 px tall.
pub const TEMPLATE: [(f64, f64); 15] = [
    (-8.0, 40.0),
    (-8.0, 20.0),
    (-8.0, 0.0),
    (8.0, 0.0),
    (8.0, 20.0),
    (8.0, 40.0),
    (-22.0, -5.0),
    (-20.0, -18.0),
    (-12.0, -30.0),
    (12.0, -30.0),
    (20.0, -18.0),
    (22.0, -5.0),
    (0.0, -34.0),
    (0.0, -40.0),
    (0.0, -48.0),
];

pub const VISIBLE_P_LOC: (f64, f64) = (0.75, 1.0);
pub const VISIBLE_P_AVL: (f64, f64) = (0.9, 1.0);
pub const OCCLUDED_P_AVL: (f64, f64) = (0.0, 0.2);
pub const OCCLUDED_P_LOC: (f64, f64) = (0.8, 1.0);

/// Extra pixels painted around each figure in the flow field so bilinear
/// samples at its keypoints never touch the background.
const FLOW_PAD: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionPath {
    #[default]
    Linear,
    /// Linear motion plus a vertical oscillation `amplitude * sin(2 pi t / period)`.
    Sinusoidal { amplitude: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub scale: f64,
    /// Hip-centre position at frame 0.
    pub start: [f64; 2],
    /// Pixels per frame.
    pub velocity: [f64; 2],
    #[serde(default)]
    pub path: MotionPath,
}

impl AgentSpec {
    pub fn position(&self, t: u64) -> (f64, f64) {
        let t = t as f64;
        let x = self.start[0] + self.velocity[0] * t;
        let mut y = self.start[1] + self.velocity[1] * t;
        if let MotionPath::Sinusoidal { amplitude, period } = self.path {
            y += amplitude * (2.0 * std::f64::consts::PI * t / period).sin();
        }
        (x, y)
    }

    /// Joint positions at frame `t`, ignoring visibility.
    pub fn joints(&self, t: u64) -> [(f64, f64); 15] {
        let (cx, cy) = self.position(t);
        TEMPLATE.map(|(dx, dy)| (cx + self.scale * dx, cy + self.scale * dy))
    }

    pub fn head_size(&self) -> f64 {
        let (a, b) = (TEMPLATE[12], TEMPLATE[14]);
        self.scale * (a.0 - b.0).hypot(a.1 - b.1)
    }
}

/// Inclusive frame range `[start, end]` for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub agent: usize,
    pub start: u64,
    pub end: u64,
}

impl Interval {
    fn covers(&self, agent: usize, t: u64) -> bool {
        self.agent == agent && (self.start..=self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub agent: usize,
    pub start: u64,
    pub end: u64,
    pub joints: Vec<usize>,
    /// Range of the location probability reported for the hidden joints.
    #[serde(default = "default_occluded_p_loc")]
    pub p_loc: [f64; 2],
}

fn default_occluded_p_loc() -> [f64; 2] {
    [OCCLUDED_P_LOC.0, OCCLUDED_P_LOC.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frames: u64,
    pub width: usize,
    pub height: usize,
    pub agents: Vec<AgentSpec>,
    /// Frames where the detector misses the agent; ground truth is unchanged.
    #[serde(default)]
    pub dropouts: Vec<Interval>,
    /// Frames where the agent has left the scene.
    #[serde(default)]
    pub absences: Vec<Interval>,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
    /// Standard deviation of the detection noise in pixels.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_separation")]
    pub feature_separation: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_separation() -> f64 {
    100.0
}

fn default_feature_dim() -> usize {
    512
}

impl ScenarioConfig {
    /// No events and no noise.
    pub fn clean(agents: Vec<AgentSpec>, frames: u64) -> Self {
        ScenarioConfig {
            frames,
            width: 320,
            height: 240,
            agents,
            dropouts: Vec::new(),
            absences: Vec::new(),
            occlusions: Vec::new(),
            noise_sigma: 0.0,
            feature_separation: default_separation(),
            feature_dim: default_feature_dim(),
            seed: 0,
        }
    }

    /// Three well separated agents walking vertically.
    pub fn three_walkers(frames: u64) -> Self {
        let agent = |x: f64, y: f64, vx: f64, vy: f64, scale: f64| AgentSpec {
            scale,
            start: [x, y],
            velocity: [vx, vy],
            path: MotionPath::Linear,
        };
        let step = 75.0 / frames.max(1) as f64;
        Self::clean(
            vec![
                agent(55.0, 60.0, 0.2, step, 1.0),
                agent(160.0, 150.0, -0.1, -step, 0.9),
                agent(265.0, 70.0, -0.2, step, 1.1),
            ],
            frames,
        )
    }

    /// Single-frame detector misses spread over every agent.
    pub fn dropout_preset() -> Self {
        let mut cfg = Self::three_walkers(50);
        cfg.noise_sigma = 0.5;
        cfg.seed = 11;
        for (agent, frames) in [(0, [6, 17, 29, 41]), (1, [9, 21, 33, 45]), (2, [4, 14, 26, 38])] {
            for t in frames {
                cfg.dropouts.push(Interval {
                    agent,
                    start: t,
                    end: t,
                });
            }
        }
        cfg
    }

    /// Two agents leave the scene for a while and come back.
    pub fn reentry_preset() -> Self {
        let mut cfg = Self::three_walkers(60);
        cfg.noise_sigma = 0.5;
        cfg.seed = 12;
        cfg.absences.push(Interval {
            agent: 0,
            start: 15,
            end: 26,
        });
        cfg.absences.push(Interval {
            agent: 2,
            start: 34,
            end: 47,
        });
        cfg
    }

    /// Hidden joints reported with high location but low availability.
    pub fn occlusion_preset() -> Self {
        let mut cfg = Self::three_walkers(40);
        cfg.noise_sigma = 0.5;
        cfg.seed = 13;
        cfg.occlusions = vec![
            Occlusion {
                agent: 0,
                start: 5,
                end: 24,
                joints: vec![0, 1, 6, 7],
                p_loc: default_occluded_p_loc(),
            },
            Occlusion {
                agent: 1,
                start: 10,
                end: 34,
                joints: vec![3, 4, 5, 10, 11],
                p_loc: default_occluded_p_loc(),
            },
            Occlusion {
                agent: 2,
                start: 0,
                end: 15,
                joints: vec![6, 11, 13],
                p_loc: default_occluded_p_loc(),
            },
        ];
        cfg
    }

    /// The occlusion scenario plus hidden joints whose location probability
    /// is spread over the threshold sweep range.
    pub fn occlusion_sweep_preset() -> Self {
        let mut cfg = Self::occlusion_preset();
        cfg.seed = 14;
        cfg.occlusions.extend([
            Occlusion {
                agent: 0,
                start: 20,
                end: 39,
                joints: vec![4, 5, 10, 11],
                p_loc: [0.2, 0.6],
            },
            Occlusion {
                agent: 1,
                start: 0,
                end: 9,
                joints: vec![0, 1, 6, 7, 8],
                p_loc: [0.2, 0.6],
            },
            Occlusion {
                agent: 2,
                start: 16,
                end: 39,
                joints: vec![2, 3, 9],
                p_loc: [0.2, 0.6],
            },
        ]);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width < 2 || self.height < 2 {
            return bad(format!("frame size {}x{} too small", self.width, self.height));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma = {} must be non-negative", self.noise_sigma));
        }
        if !(self.feature_separation >= 0.0 && self.feature_separation.is_finite()) {
            return bad(format!(
                "feature_separation = {} must be non-negative",
                self.feature_separation
            ));
        }
        if self.feature_dim < self.agents.len().max(1) {
            return bad(format!(
                "feature_dim = {} must be at least the agent count {}",
                self.feature_dim,
                self.agents.len()
            ));
        }
        for (i, a) in self.agents.iter().enumerate() {
            let finite = a.start.iter().chain(&a.velocity).all(|v| v.is_finite());
            if !(a.scale > 0.0 && a.scale.is_finite()) || !finite {
                return bad(format!(
                    "agent {i}: scale, start and velocity must be finite, scale positive"
                ));
            }
            if let MotionPath::Sinusoidal { amplitude, period } = a.path {
                if !amplitude.is_finite() || !(period > 0.0 && period.is_finite()) {
                    return bad(format!(
                        "agent {i}: sinusoidal path needs finite amplitude and positive period"
                    ));
                }
            }
        }
        let check = |kind: &str, agent: usize, start: u64, end: u64| -> Result<()> {
            if agent >= self.agents.len() {
                return bad(format!(
                    "{kind} references agent {agent}, only {} defined",
                    self.agents.len()
                ));
            }
            if start > end || end >= self.frames {
                return bad(format!("{kind} range {start}..={end} outside 0..{}", self.frames));
            }
            Ok(())
        };
        for e in &self.dropouts {
            check("dropout", e.agent, e.start, e.end)?;
        }
        for e in &self.absences {
            check("absence", e.agent, e.start, e.end)?;
        }
        for e in &self.occlusions {
            check("occlusion", e.agent, e.start, e.end)?;
            if let Some(j) = e.joints.iter().find(|&&j| j >= TEMPLATE.len()) {
                return bad(format!("occlusion references joint {j}"));
            }
            let [lo, hi] = e.p_loc;
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("occlusion p_loc range [{lo}, {hi}] invalid"));
            }
        }
        Ok(())
    }

    fn present(&self, agent: usize, t: u64) -> bool {
        !self.absences.iter().any(|e| e.covers(agent, t))
    }

    fn dropped(&self, agent: usize, t: u64) -> bool {
        self.dropouts.iter().any(|e| e.covers(agent, t))
    }

    /// Location probability range of a hidden joint, if hidden.
    fn occluded(&self, agent: usize, joint: usize, t: u64) -> Option<[f64; 2]> {
        self.occlusions
            .iter()
            .rev()
            .find(|e| e.agent == agent && (e.start..=e.end).contains(&t) && e.joints.contains(&joint))
            .map(|e| e.p_loc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub width: usize,
    pub height: usize,
    pub ground_truth: GroundTruthSequence,
    /// One entry per frame; frame `t > 0` carries the flow from `t - 1`.
    pub observations: Vec<FrameObservations>,
    pub agent_features: Vec<FeatureVector>,
    /// Agent index of every detection, aligned with `observations`.
    pub detection_agents: Vec<Vec<usize>>,
}

impl ScenarioBundle {
    /// Observations labelled with the true identities (`agent + 1`).
    pub fn oracle_predictions(&self) -> Vec<TrackedFrame> {
        self.observations
            .iter()
            .zip(&self.detection_agents)
            .map(|(obs, agents)| TrackedFrame {
                frame: obs.frame,
                poses: obs
                    .detections
                    .iter()
                    .zip(agents)
                    .map(|(pose, &a)| TrackedPose {
                        track_id: a as u64 + 1,
                        pose: pose.clone(),
                    })
                    .collect(),
            })
            .collect()
    }
}

fn in_frame(x: f64, y: f64, w: usize, h: usize) -> bool {
    (0.0..=(w - 1) as f64).contains(&x) && (0.0..=(h - 1) as f64).contains(&y)
}

fn uniform(range: (f64, f64), u: f64) -> f64 {
    range.0 + (range.1 - range.0) * u
}

fn paint_flow(cfg: &ScenarioConfig, t: u64) -> Result<FlowField> {
    let mut flow = FlowField::zeros(cfg.width, cfg.height)?;
    for (i, agent) in cfg.agents.iter().enumerate() {
        if !cfg.present(i, t - 1) || !cfg.present(i, t) {
            continue;
        }
        let (x0, y0) = agent.position(t - 1);
        let (x1, y1) = agent.position(t);
        let d = [(x1 - x0) as f32, (y1 - y0) as f32];
        let joints = agent.joints(t - 1);
        let kps: Vec<Keypoint> = joints.iter().map(|&(x, y)| Keypoint::new(x, y, 1.0, 1.0)).collect();
        let b = bbox_from_keypoints(kps.iter(), DEFAULT_BOX_MARGIN)?;
        let clamp_u = |v: f64| v.clamp(0.0, (cfg.width - 1) as f64) as usize;
        let clamp_v = |v: f64| v.clamp(0.0, (cfg.height - 1) as f64) as usize;
        if b.x_max + FLOW_PAD < 0.0 || b.y_max + FLOW_PAD < 0.0 {
            continue;
        }
        let (u0, u1) = (
            clamp_u((b.x_min - FLOW_PAD).floor()),
            clamp_u((b.x_max + FLOW_PAD).ceil()),
        );
        let (v0, v1) = (
            clamp_v((b.y_min - FLOW_PAD).floor()),
            clamp_v((b.y_max + FLOW_PAD).ceil()),
        );
        for v in v0..=v1 {
            for u in u0..=u1 {
                flow.set(u, v, d);
            }
        }
    }
    Ok(flow)
}

/// Builds the bundle described by `cfg`; identical configs give identical bundles.
pub fn generate(cfg: &ScenarioConfig) -> Result<ScenarioBundle> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let common: Vec<f64> = (0..cfg.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let agent_features = (0..cfg.agents.len())
        .map(|i| {
            let mut v = common.clone();
            v[i] += cfg.feature_separation;
            FeatureVector::new(v)
        })
        .collect::<Result<Vec<_>>>()?;

    let (w, h) = (cfg.width, cfg.height);
    let mut ground_truth = GroundTruthSequence::default();
    let mut observations = Vec::with_capacity(cfg.frames as usize);
    let mut detection_agents = Vec::with_capacity(cfg.frames as usize);
    for t in 0..cfg.frames {
        let mut people = Vec::new();
        let mut obs = FrameObservations::new(t, Vec::new());
        let mut agents_here = Vec::new();
        for (i, agent) in cfg.agents.iter().enumerate() {
            let joints = agent.joints(t);
            let mut gt_kps = vec![None; joints.len()];
            let mut det_kps = vec![None; joints.len()];
            for (j, &(x, y)) in joints.iter().enumerate() {
                let nx: f64 = noise.sample(&mut rng);
                let ny: f64 = noise.sample(&mut rng);
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                if !in_frame(x, y, w, h) {
                    continue;
                }
                let dx = (x + nx).clamp(0.0, (w - 1) as f64);
                let dy = (y + ny).clamp(0.0, (h - 1) as f64);
                match cfg.occluded(i, j, t) {
                    Some([lo, hi]) => {
                        det_kps[j] = Some(Keypoint::new(
                            dx,
                            dy,
                            uniform((lo, hi), u1),
                            uniform(OCCLUDED_P_AVL, u2),
                        ));
                    }
                    None => {
                        gt_kps[j] = Some(Keypoint::new(x, y, 1.0, 1.0));
                        det_kps[j] = Some(Keypoint::new(
                            dx,
                            dy,
                            uniform(VISIBLE_P_LOC, u1),
                            uniform(VISIBLE_P_AVL, u2),
                        ));
                    }
                }
            }
            if !cfg.present(i, t) {
                continue;
            }
            if gt_kps.iter().any(Option::is_some) {
                people.push(GtPerson {
                    track_id: i as u64 + 1,
                    pose: Pose::from_keypoints(gt_kps, DEFAULT_BOX_MARGIN)?,
                    head_size: agent.head_size(),
                });
            }
            if !cfg.dropped(i, t) && det_kps.iter().any(Option::is_some) {
                obs.detections.push(Pose::from_keypoints(det_kps, DEFAULT_BOX_MARGIN)?);
                obs.features.push(Some(agent_features[i].clone()));
                agents_here.push(i);
            }
        }
        if t > 0 {
            obs.flow = Some(paint_flow(cfg, t)?);
        }
        ground_truth.frames.push(GtFrame { frame: t, people });
        observations.push(obs);
        detection_agents.push(agents_here);
    }
    Ok(ScenarioBundle {
        width: w,
        height: h,
        ground_truth,
        observations,
        agent_features,
        detection_agents,
    })
}

/// Skeleton matching the synthetic template.
pub fn skeleton() -> SkeletonSpec {
    SkeletonSpec::posetrack()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{map_eval, mota};
    use crate::revision::warp_pose;
    use proptest::prelude::*;

    fn one_agent(frames: u64) -> ScenarioConfig {
        ScenarioConfig::clean(
            vec![AgentSpec {
                scale: 1.0,
                start: [100.0, 100.0],
                velocity: [1.5, -0.5],
                path: MotionPath::Linear,
            }],
            frames,
        )
    }

    #[test]
    fn single_agent_no_events() {
        let b = generate(&one_agent(10)).unwrap();
        assert_eq!(b.observations.len(), 10);
        assert!(b.observations.iter().all(|o| o.detections.len() == 1));
        assert!(b.observations[0].flow.is_none());
        for o in &b.observations[1..] {
            let hip = o.detections[0].keypoints[2].unwrap();
            let (dx, dy) = o.flow.as_ref().unwrap().sample(hip.x - 1.5, hip.y + 0.5);
            assert_eq!((dx, dy), (1.5, -0.5));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig::occlusion_sweep_preset();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn dropout_omits_detection_only() {
        let mut cfg = one_agent(10);
        let clean = generate(&cfg).unwrap();
        cfg.dropouts.push(Interval {
            agent: 0,
            start: 5,
            end: 5,
        });
        let b = generate(&cfg).unwrap();
        assert!(b.observations[5].detections.is_empty());
        assert_eq!(b.observations[4].detections.len(), 1);
        assert_eq!(b.ground_truth, clean.ground_truth);
        assert_eq!(b.observations[5].flow, clean.observations[5].flow);
    }

    #[test]
    fn absence_removes_everything() {
        let mut cfg = ScenarioConfig::three_walkers(10);
        cfg.absences.push(Interval {
            agent: 1,
            start: 3,
            end: 4,
        });
        let b = generate(&cfg).unwrap();
        for t in [3, 4] {
            assert!(b.ground_truth.frames[t].people.iter().all(|p| p.track_id != 2));
            assert_eq!(b.detection_agents[t], vec![0, 2]);
        }
        // no flow painted at the absent agent's last position
        let hip = b.observations[2].detections[1].keypoints[2].unwrap();
        assert_eq!(
            b.observations[3].flow.as_ref().unwrap().sample(hip.x, hip.y),
            (0.0, 0.0)
        );
    }

    #[test]
    fn occluded_joints() {
        let cfg = ScenarioConfig::occlusion_preset();
        let b = generate(&cfg).unwrap();
        let t = 10;
        let gt = &b.ground_truth.frames[t].people[0];
        let det = &b.observations[t].detections[0];
        for j in 0..15 {
            let hidden = [0, 1, 6, 7].contains(&j);
            assert_eq!(gt.pose.keypoints[j].is_none(), hidden);
            let k = det.keypoints[j].unwrap();
            if hidden {
                assert!(k.p_loc >= 0.8 && k.p_avl <= 0.2);
            } else {
                assert!(k.p_loc >= 0.75 && k.p_avl >= 0.9);
            }
        }
    }

    #[test]
    fn invalid_references() {
        let mut cfg = one_agent(5);
        cfg.dropouts.push(Interval {
            agent: 1,
            start: 0,
            end: 0,
        });
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let mut cfg = one_agent(5);
        cfg.absences.push(Interval {
            agent: 0,
            start: 3,
            end: 5,
        });
        assert!(generate(&cfg).is_err());
        let mut cfg = one_agent(5);
        cfg.occlusions.push(Occlusion {
            agent: 0,
            start: 0,
            end: 1,
            joints: vec![15],
            p_loc: [0.8, 1.0],
        });
        assert!(generate(&cfg).is_err());
        let mut cfg = one_agent(5);
        cfg.noise_sigma = -1.0;
        assert!(generate(&cfg).is_err());
        let mut cfg = ScenarioConfig::three_walkers(5);
        cfg.feature_dim = 2;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn features_separable() {
        let b = generate(&ScenarioConfig::reentry_preset()).unwrap();
        let f = &b.agent_features;
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                assert!(f[i].distance(&f[j]) >= 100.0);
            }
        }
        // same agent before and after re-entry
        let before = b.observations[10].features[0].as_ref().unwrap();
        let after = b.observations[30].features[0].as_ref().unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn clean_bundle_scores_perfectly() {
        let b = generate(&ScenarioConfig::three_walkers(20)).unwrap();
        let spec = skeleton();
        let preds = b.oracle_predictions();
        let m = mota(&preds, &b.ground_truth, &spec, 0.5).unwrap();
        let a = map_eval(&preds, &b.ground_truth, &spec, 0.5).unwrap();
        assert_eq!(m.total.mota, Some(1.0));
        assert_eq!(a.map, 1.0);
    }

    #[test]
    fn leaving_the_frame_hides_joints() {
        let cfg = ScenarioConfig::clean(
            vec![AgentSpec {
                scale: 1.0,
                start: [30.0, 100.0],
                velocity: [-5.0, 0.0],
                path: MotionPath::Linear,
            }],
            12,
        );
        let b = generate(&cfg).unwrap();
        // at t=3 the hip centre sits at x=15, right-hand joints at x<0
        let p = &b.ground_truth.frames[3].people[0].pose;
        assert!(p.keypoints[6].is_none());
        assert!(p.keypoints[11].is_some());
        assert!(b.ground_truth.frames[11].people.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn flow_transports_gt(vx in -3.0..3.0f64, vy in -3.0..3.0f64, x in 80.0..240.0f64, y in 70.0..170.0f64,
                              amp in 0.0..4.0f64, sinusoidal in any::<bool>()) {
            let path = if sinusoidal { MotionPath::Sinusoidal { amplitude: amp, period: 9.0 } } else { MotionPath::Linear };
            let cfg = ScenarioConfig::clean(vec![AgentSpec { scale: 0.8, start: [x, y], velocity: [vx, vy], path }], 8);
            let b = generate(&cfg).unwrap();
            for t in 1..8usize {
                let (Some(prev), Some(cur)) = (b.ground_truth.frames[t - 1].people.first(), b.ground_truth.frames[t].people.first()) else { continue };
                let warped = warp_pose(&prev.pose, b.observations[t].flow.as_ref().unwrap());
                for (a, c) in warped.keypoints.iter().zip(&cur.pose.keypoints) {
                    if let (Some(a), Some(c)) = (a, c) {
                        prop_assert!((a.x - c.x).abs() < 1e-6 && (a.y - c.y).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
