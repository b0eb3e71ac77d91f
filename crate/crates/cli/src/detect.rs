use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use synthdetect::EnsembleConfig;

use crate::config::{self, DEFAULT_PATCHES_PER_SCORER};
use crate::{imageio, write_output, GlobalArgs, Outcome, MODEL_DIR_ENV};

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Image files or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Ensemble configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with cnn1.onnx .. cnn5.onnx, used when --config is absent.
    #[arg(long, env = MODEL_DIR_ENV)]
    pub model_dir: Option<PathBuf>,
    /// Patches per scorer when the configuration leaves it unset.
    #[arg(long, default_value_t = DEFAULT_PATCHES_PER_SCORER)]
    pub patches_per_scorer: usize,
    /// Fused scores at or above this are labelled synthetic.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub threshold: f64,
    /// JSON-lines verdict file (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    image: &'a str,
    error: String,
}

pub fn cmd_detect(global: &GlobalArgs, args: &DetectArgs) -> anyhow::Result<Outcome> {
    if !args.threshold.is_finite() {
        bail!("--threshold must be finite");
    }
    let file_config = config::resolve(
        args.config.as_ref(),
        args.model_dir.as_ref(),
        args.patches_per_scorer,
    )?;
    let ensemble = file_config.build(global.seed(), args.patches_per_scorer)?;
    let paths = imageio::collect_inputs(&args.inputs)?;
    if paths.is_empty() {
        bail!("no PNG or JPEG images among the inputs");
    }
    let (text, failed) = detect_paths(&ensemble, &paths, args.threshold);
    write_output(args.output.as_ref(), &text)?;
    Ok(if failed == 0 {
        Outcome::Success
    } else {
        Outcome::Partial(failed)
    })
}

/// Scores `paths` in parallel and renders one JSON line per path, in the
/// order given. Returns the rendered text and the number of failures.
pub fn detect_paths(ensemble: &EnsembleConfig, paths: &[PathBuf], threshold: f64) -> (String, usize) {
    let lines: Vec<(String, bool)> = paths
        .par_iter()
        .map(|path| detect_one(ensemble, path, threshold))
        .collect();
    let failed = lines.iter().filter(|(_, ok)| !ok).count();
    let mut text = String::new();
    for (line, _) in lines {
        text.push_str(&line);
        text.push('\n');
    }
    (text, failed)
}

fn detect_one(ensemble: &EnsembleConfig, path: &Path, threshold: f64) -> (String, bool) {
    let key = path.display().to_string();
    let verdict = imageio::load_rgb(path)
        .and_then(|image| Ok(ensemble.detect(&image, &key, threshold)?));
    match verdict {
        Ok(v) => (serde_json::to_string(&v).expect("verdicts serialize"), true),
        Err(e) => {
            log::warn!("{key}: {e:#}");
            let record = FailureRecord {
                image: &key,
                error: format!("{e:#}"),
            };
            (serde_json::to_string(&record).expect("records serialize"), false)
        }
    }
}
