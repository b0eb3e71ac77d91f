//! Scorers backed by an ONNX classifier.
//!
//! Each patch is fed as a `1x3xNxN` f32 tensor in NCHW order, scaled to
//! [0, 1] and then normalized per channel.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tract_onnx::prelude::*;

use super::{PatchScorer, ScorerId, ScoringError};
use crate::ImageBuffer;

fn default_input_size() -> u32 {
    crate::DEFAULT_PATCH_SIZE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    /// Identity: the network sees values in [0, 1].
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

impl Normalization {
    /// The usual ImageNet channel statistics.
    pub fn imagenet() -> Self {
        Self {
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}

/// How the network output is turned into one signed score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputConvention {
    /// One value per patch, used as is.
    #[default]
    Logit,
    /// Two class logits; the score is `synthetic - real`.
    TwoClassMargin {
        real_index: usize,
        synthetic_index: usize,
    },
}

impl OutputConvention {
    fn output_len(self) -> usize {
        match self {
            OutputConvention::Logit => 1,
            OutputConvention::TwoClassMargin {
                real_index,
                synthetic_index,
            } => real_index.max(synthetic_index) + 1,
        }
    }

    fn score(self, output: &[f32]) -> f64 {
        match self {
            OutputConvention::Logit => f64::from(output[0]),
            OutputConvention::TwoClassMargin {
                real_index,
                synthetic_index,
            } => f64::from(output[synthetic_index]) - f64::from(output[real_index]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBackendConfig {
    pub model_path: PathBuf,
    #[serde(default = "default_input_size")]
    pub input_size: u32,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub output: OutputConvention,
}

impl ModelBackendConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        Self {
            model_path: model_path.into(),
            input_size: default_input_size(),
            normalization: Normalization::default(),
            output: OutputConvention::default(),
        }
    }
}

type Plan = Arc<TypedSimplePlan>;

pub struct OnnxScorer {
    id: ScorerId,
    config: ModelBackendConfig,
    plan: Plan,
}

impl std::fmt::Debug for OnnxScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxScorer")
            .field("id", &self.id)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

/// Loads and optimizes a model for a fixed `1x3xNxN` input.
pub fn load_model_backend(
    id: impl Into<ScorerId>,
    config: &ModelBackendConfig,
) -> Result<OnnxScorer, ScoringError> {
    let path = &config.model_path;
    let load_err = |reason: String| ScoringError::ModelLoad {
        path: path.display().to_string(),
        reason,
    };
    if config.normalization.std.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(load_err("normalization std must be finite and non-zero".into()));
    }
    if !path.is_file() {
        return Err(load_err("no such file".into()));
    }
    let model = tract_onnx::onnx()
        .model_for_path(path)
        .map_err(|e| load_err(format!("{e:#}")))?;

    let n = config.input_size as usize;
    let typed = model
        .with_input_fact(0, f32::fact([1, 3, n, n]).into())
        .and_then(|m| m.into_optimized())
        .map_err(|e| {
            ScoringError::ShapeMismatch(format!("model rejects a 1x3x{n}x{n} input: {e:#}"))
        })?;

    let out_fact = typed
        .output_fact(0)
        .map_err(|e| ScoringError::Backend(format!("{e:#}")))?;
    let expected = config.output.output_len();
    match out_fact.shape.as_concrete() {
        Some(dims) if dims.iter().product::<usize>() == expected => {}
        Some(dims) => {
            return Err(ScoringError::ShapeMismatch(format!(
                "model output shape {dims:?}, expected {expected} value(s) per patch"
            )))
        }
        None => {
            return Err(ScoringError::ShapeMismatch(
                "model output shape is not fixed".into(),
            ))
        }
    }

    let plan = typed
        .into_runnable()
        .map_err(|e| ScoringError::Backend(format!("{e:#}")))?;
    Ok(OnnxScorer {
        id: id.into(),
        config: config.clone(),
        plan,
    })
}

impl OnnxScorer {
    pub fn config(&self) -> &ModelBackendConfig {
        &self.config
    }

    fn to_tensor(&self, patch: &ImageBuffer) -> Result<Tensor, ScoringError> {
        let n = self.config.input_size;
        if patch.width() != n || patch.height() != n {
            return Err(ScoringError::ShapeMismatch(format!(
                "patch is {}x{}, model expects {n}x{n}",
                patch.width(),
                patch.height()
            )));
        }
        let Normalization { mean, std } = self.config.normalization;
        let n = n as usize;
        let array = tract_ndarray::Array4::from_shape_fn((1, 3, n, n), |(_, c, y, x)| {
            let v = f32::from(patch.pixel(x as u32, y as u32)[c]) / 255.0;
            (v - mean[c]) / std[c]
        });
        Ok(array.into_tensor())
    }
}

impl PatchScorer for OnnxScorer {
    fn id(&self) -> &ScorerId {
        &self.id
    }

    fn score_batch(&self, patches: &[ImageBuffer]) -> Result<Vec<f64>, ScoringError> {
        patches
            .iter()
            .map(|patch| {
                let input = self.to_tensor(patch)?;
                let outputs = self
                    .plan
                    .run(tvec!(input.into()))
                    .map_err(|e| ScoringError::Backend(format!("{e:#}")))?;
                let view = outputs[0]
                    .to_plain_array_view::<f32>()
                    .map_err(|e| ScoringError::Backend(format!("{e:#}")))?;
                let values: Vec<f32> = view.iter().copied().collect();
                Ok(self.config.output.score(&values))
            })
            .collect()
    }
}
