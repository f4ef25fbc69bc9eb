//! Command-line front end: `track`, `eval`, `synth` and `overlay`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

pub mod overlay;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use posetrack::synth::{generate, ScenarioConfig};
use posetrack::toolkit::{evaluate, load_observations, track_document, write_bundle, AnnotationDocument, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "posetrack", version, about = "Multi-person pose tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assign track ids to per-frame pose detections.
    Track {
        /// Detection annotations (JSON).
        annotations: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of flow_NNNNNN.bin files.
        #[arg(long)]
        flow_dir: Option<PathBuf>,
        /// Feature file with one `frame,detection,values...` line per detection.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        disable_revision: bool,
        #[arg(long)]
        disable_reid: bool,
        /// Output annotations; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score tracked annotations against ground truth.
    Eval {
        predictions: PathBuf,
        ground_truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report path; the text table always goes to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scenario bundle.
    Synth {
        /// Scenario file (TOML).
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "scenario")]
        preset: Option<Preset>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render annotations as one PNG per frame.
    Overlay {
        annotations: PathBuf,
        /// Frame width; taken from the image entries when omitted.
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Clean,
    Dropout,
    Reentry,
    Occlusion,
    OcclusionSweep,
}

impl Preset {
    fn config(self) -> ScenarioConfig {
        match self {
            Preset::Clean => ScenarioConfig::three_walkers(50),
            Preset::Dropout => ScenarioConfig::dropout_preset(),
            Preset::Reentry => ScenarioConfig::reentry_preset(),
            Preset::Occlusion => ScenarioConfig::occlusion_preset(),
            Preset::OcclusionSweep => ScenarioConfig::occlusion_sweep_preset(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] posetrack::Error),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn write_out(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => stdout.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Track {
            annotations,
            config,
            flow_dir,
            features,
            disable_revision,
            disable_reid,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.enable_revision &= !disable_revision;
            cfg.enable_reid &= !disable_reid;
            let flow_dir = flow_dir.or_else(|| cfg.flow_dir.clone());
            let features = features.or_else(|| cfg.features.clone());
            let out = out.or_else(|| cfg.out.clone());
            let (doc, obs) = load_observations(&annotations, flow_dir.as_deref(), features.as_deref())?;
            let tracked = track_document(&doc, &obs, &cfg)?;
            log::info!(
                "tracked {} frames, {} poses",
                tracked.images.len(),
                tracked.annotations.len()
            );
            write_out(out.as_deref(), &tracked.to_json()?, stdout)
        }
        Command::Eval {
            predictions,
            ground_truth,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let pred = AnnotationDocument::load(&predictions)?;
            let gt = AnnotationDocument::load(&ground_truth)?;
            let report = evaluate(&pred, &gt, &cfg)?;
            if let Some(p) = out.or_else(|| cfg.out.clone()) {
                fs::write(&p, report.to_json()?).map_err(io_err(&p))?;
            }
            stdout
                .write_all(report.to_text().as_bytes())
                .map_err(io_err(Path::new("<stdout>")))
        }
        Command::Synth {
            scenario,
            preset,
            seed,
            out,
        } => {
            let mut cfg = match (scenario, preset) {
                (Some(path), None) => ScenarioConfig::load(&path)?,
                (None, Some(p)) => p.config(),
                _ => return Err(CliError::Usage("synth needs a scenario file or --preset".into())),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let bundle = generate(&cfg)?;
            write_bundle(&bundle, &cfg, &out)?;
            writeln!(stdout, "wrote {} frames to {}", cfg.frames, out.display()).map_err(io_err(&out))
        }
        Command::Overlay {
            annotations,
            width,
            height,
            out,
        } => {
            let doc = AnnotationDocument::load(&annotations)?;
            let spec = doc.skeleton()?;
            let poses = doc.observations(None)?;
            let sizes: BTreeMap<u64, (u32, u32)> = doc.images.iter().map(|i| (i.id, (i.width, i.height))).collect();
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            // observations keep file order within a frame
            let mut ids: BTreeMap<u64, Vec<Option<u64>>> = BTreeMap::new();
            for a in &doc.annotations {
                ids.entry(a.image_id).or_default().push(a.track_id);
            }
            for frame in &poses {
                let (w, h) = sizes[&frame.frame];
                let (w, h) = (width.unwrap_or(w), height.unwrap_or(h));
                if w == 0 || h == 0 {
                    return Err(CliError::Usage(format!(
                        "frame {} has zero size; pass --width/--height",
                        frame.frame
                    )));
                }
                let frame_ids = ids.get(&frame.frame).map(Vec::as_slice).unwrap_or_default();
                let items: Vec<_> = frame_ids.iter().copied().zip(&frame.detections).collect();
                let img = overlay::render(w, h, &items, &spec);
                let path = out.join(format!("{:06}.png", frame.frame));
                overlay::save(&img, &path).map_err(|source| CliError::Image { path, source })?;
            }
            writeln!(stdout, "wrote {} images to {}", poses.len(), out.display()).map_err(io_err(&out))
        }
    }
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}
