//! File formats and the glue between them and the engine: annotation
//! documents, feature files, run configuration and on-disk scenario bundles.

mod annotations;
mod config;
mod features;

pub use annotations::{Annotation, AnnotationDocument, Category, ImageEntry};
pub use config::RunConfig;
pub use features::{FeatureRecord, FeatureTable};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{map_eval, mota, EvalReport};
use crate::revision::FlowDir;
use crate::synth::{ScenarioBundle, ScenarioConfig};
use crate::tracker::{run, FrameObservations};

pub const GT_FILE: &str = "gt.json";
pub const DETECTIONS_FILE: &str = "detections.json";
pub const FEATURES_FILE: &str = "features.txt";
pub const FLOW_SUBDIR: &str = "flow";
pub const SCENARIO_FILE: &str = "scenario.toml";

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Writes `gt.json`, `detections.json`, `features.txt`, `flow/` and the
/// scenario itself into `dir`.
pub fn write_bundle(bundle: &ScenarioBundle, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    let spec = crate::synth::skeleton();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let images = AnnotationDocument::sequence_images(cfg.frames, cfg.width as u32, cfg.height as u32);
    AnnotationDocument::from_ground_truth(images.clone(), &spec, &bundle.ground_truth).save(&dir.join(GT_FILE))?;
    AnnotationDocument::from_observations(images, &spec, &bundle.observations).save(&dir.join(DETECTIONS_FILE))?;
    FeatureTable::from_observations(&bundle.observations)?.save(&dir.join(FEATURES_FILE))?;
    let flows = FlowDir::new(dir.join(FLOW_SUBDIR));
    for obs in &bundle.observations {
        if let Some(f) = &obs.flow {
            flows.store(obs.frame, f)?;
        }
    }
    let path = dir.join(SCENARIO_FILE);
    fs::write(&path, cfg.to_toml()?).map_err(|e| Error::file(&path, e))
}

/// Loads detections with optional features and flow, ready for tracking.
pub fn load_observations(
    annotations: &Path,
    flow_dir: Option<&Path>,
    features: Option<&Path>,
) -> Result<(AnnotationDocument, Vec<FrameObservations>)> {
    let doc = AnnotationDocument::load(annotations)?;
    let table = features.map(FeatureTable::load).transpose()?;
    let mut obs = doc.observations(table.as_ref())?;
    if let Some(dir) = flow_dir {
        let flows = FlowDir::new(dir);
        for o in &mut obs {
            o.flow = flows.field(o.frame)?;
        }
    }
    Ok((doc, obs))
}

/// Runs the tracker over `obs` and returns the tracked annotations.
pub fn track_document(
    doc: &AnnotationDocument,
    obs: &[FrameObservations],
    cfg: &RunConfig,
) -> Result<AnnotationDocument> {
    let spec = cfg.skeleton(doc.skeleton()?)?;
    let mut tracker_cfg = cfg.tracker_config();
    if let Some(dim) = obs
        .iter()
        .flat_map(|o| o.features.iter().flatten())
        .map(|f| f.dim())
        .next()
    {
        tracker_cfg.feature_dim = dim;
    }
    let frames = run(obs, &spec, &tracker_cfg)?;
    let mut out = AnnotationDocument::from_tracked(doc.images.clone(), &spec, &frames);
    out.categories = doc.categories.clone();
    Ok(out)
}

/// Evaluates tracked annotations against ground-truth annotations.
pub fn evaluate(predictions: &AnnotationDocument, gt: &AnnotationDocument, cfg: &RunConfig) -> Result<EvalReport> {
    let spec = cfg.skeleton(gt.skeleton()?)?;
    let pred_spec = predictions.skeleton()?;
    if pred_spec.joint_count() != spec.joint_count() {
        return Err(Error::SkeletonMismatch {
            expected: spec.joint_count(),
            found: pred_spec.joint_count(),
        });
    }
    let frames = predictions.tracked_frames()?;
    let truth = gt.ground_truth()?;
    Ok(EvalReport {
        tau_factor: cfg.tau_factor,
        mota: mota(&frames, &truth, &spec, cfg.tau_factor)?,
        ap: map_eval(&frames, &truth, &spec, cfg.tau_factor)?,
    })
}
