//! Patch scorers.
//!
//! A scorer maps each patch to one signed real: negative means the patch
//! looks real, positive means it looks synthetic. Downstream stages never
//! rescale or recentre these values.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{ImageBuffer, PatchRegion};

#[cfg(feature = "onnx")]
pub mod onnx;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("no patches to score")]
    EmptyPatches,
    #[error("{patches} patches but {regions} regions")]
    LengthMismatch { patches: usize, regions: usize },
    #[error("scorer returned {got} scores for {expected} patches")]
    OutputLength { expected: usize, got: usize },
    #[error("non-finite score {value} for patch {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("patch {index}: {source}")]
    AtPatch {
        index: usize,
        #[source]
        source: Box<ScoringError>,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot load model {path}: {reason}")]
    ModelLoad { path: String, reason: String },
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScorerId(pub String);

impl ScorerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ScorerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ScorerId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Scores patches independently of one another.
///
/// Implementations must return one finite score per input patch, and the
/// score of a patch must not depend on the rest of the batch.
pub trait PatchScorer: Send + Sync {
    fn id(&self) -> &ScorerId;

    fn score_batch(&self, patches: &[ImageBuffer]) -> Result<Vec<f64>, ScoringError>;
}

impl<S: PatchScorer + ?Sized> PatchScorer for Arc<S> {
    fn id(&self) -> &ScorerId {
        (**self).id()
    }

    fn score_batch(&self, patches: &[ImageBuffer]) -> Result<Vec<f64>, ScoringError> {
        (**self).score_batch(patches)
    }
}

impl<S: PatchScorer + ?Sized> PatchScorer for Box<S> {
    fn id(&self) -> &ScorerId {
        (**self).id()
    }

    fn score_batch(&self, patches: &[ImageBuffer]) -> Result<Vec<f64>, ScoringError> {
        (**self).score_batch(patches)
    }
}

/// The scores one scorer assigned to the patches of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchScoreVector {
    scorer: ScorerId,
    scores: Vec<f64>,
    regions: Vec<PatchRegion>,
}

impl PatchScoreVector {
    pub fn new(
        scorer: ScorerId,
        scores: Vec<f64>,
        regions: Vec<PatchRegion>,
    ) -> Result<Self, ScoringError> {
        if scores.is_empty() {
            return Err(ScoringError::EmptyPatches);
        }
        if scores.len() != regions.len() {
            return Err(ScoringError::LengthMismatch {
                patches: scores.len(),
                regions: regions.len(),
            });
        }
        if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(ScoringError::NonFinite { index, value });
        }
        Ok(Self {
            scorer,
            scores,
            regions,
        })
    }

    pub fn scorer(&self) -> &ScorerId {
        &self.scorer
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn regions(&self) -> &[PatchRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores `patches` in one batch.
pub fn score_patches<S: PatchScorer + ?Sized>(
    scorer: &S,
    patches: &[ImageBuffer],
    regions: &[PatchRegion],
) -> Result<PatchScoreVector, ScoringError> {
    score_patches_batched(scorer, patches, regions, patches.len().max(1))
}

/// Scores `patches` in consecutive batches of at most `batch_size`.
pub fn score_patches_batched<S: PatchScorer + ?Sized>(
    scorer: &S,
    patches: &[ImageBuffer],
    regions: &[PatchRegion],
    batch_size: usize,
) -> Result<PatchScoreVector, ScoringError> {
    if patches.is_empty() {
        return Err(ScoringError::EmptyPatches);
    }
    if patches.len() != regions.len() {
        return Err(ScoringError::LengthMismatch {
            patches: patches.len(),
            regions: regions.len(),
        });
    }
    let mut scores = Vec::with_capacity(patches.len());
    for (chunk_index, chunk) in patches.chunks(batch_size.max(1)).enumerate() {
        let offset = chunk_index * batch_size.max(1);
        let batch = scorer
            .score_batch(chunk)
            .map_err(|e| locate_failure(scorer, chunk, offset, e))?;
        if batch.len() != chunk.len() {
            return Err(ScoringError::OutputLength {
                expected: chunk.len(),
                got: batch.len(),
            });
        }
        scores.extend(batch);
    }
    PatchScoreVector::new(scorer.id().clone(), scores, regions.to_vec())
}

// Re-scores a failed batch one patch at a time to report which patch broke.
fn locate_failure<S: PatchScorer + ?Sized>(
    scorer: &S,
    chunk: &[ImageBuffer],
    offset: usize,
    batch_error: ScoringError,
) -> ScoringError {
    chunk
        .iter()
        .enumerate()
        .find_map(|(i, patch)| {
            scorer
                .score_batch(std::slice::from_ref(patch))
                .err()
                .map(|e| ScoringError::AtPatch {
                    index: offset + i,
                    source: Box::new(e),
                })
        })
        .unwrap_or(batch_error)
}

/// Mean BT.601 luma of a patch, normalized to [0, 1].
pub fn mean_luma(patch: &ImageBuffer) -> f64 {
    let n = f64::from(patch.width()) * f64::from(patch.height());
    patch.pixels().map(pixel_luma).sum::<f64>() / n
}

fn pixel_luma(p: [u8; 3]) -> f64 {
    (0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])) / 255.0
}

/// A square luma template for [`AnalyticScorerSpec::PlantedSignal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Row-major luma values in [0, 1].
    Values { size: u32, data: Vec<f64> },
    /// Uniform random 8-bit levels drawn from `seed`.
    Seeded { size: u32, seed: u64 },
}

impl Template {
    pub fn size(&self) -> u32 {
        match self {
            Template::Values { size, .. } | Template::Seeded { size, .. } => *size,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Template::Values { data, .. } => data.clone(),
            Template::Seeded { size, seed } => {
                let mut rng = crate::seed::stream_from(*seed);
                (0..size * size)
                    .map(|_| f64::from(rng.random::<u8>()) / 255.0)
                    .collect()
            }
        }
    }

    /// The template drawn as a gray patch, quantized to 8 bits.
    pub fn render(&self) -> ImageBuffer {
        let size = self.size();
        let data = self
            .values()
            .iter()
            .flat_map(|&v| {
                let level = (v * 255.0).round().clamp(0.0, 255.0) as u8;
                [level; 3]
            })
            .collect();
        ImageBuffer::new(size, size, data).expect("template is size x size")
    }
}

/// Deterministic closed-form scorers, used as test oracles and fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticScorerSpec {
    ConstantScore { value: f64 },
    /// `gain * (mean luma - pivot)`, luma in [0, 1].
    LumaThreshold { pivot: f64, gain: f64 },
    /// `gain * NCC(patch luma, template)`.
    PlantedSignal { template: Template, gain: f64 },
}

impl AnalyticScorerSpec {
    fn default_id(&self) -> String {
        match self {
            AnalyticScorerSpec::ConstantScore { value } => format!("constant({value})"),
            AnalyticScorerSpec::LumaThreshold { pivot, gain } => format!("luma({pivot},{gain})"),
            AnalyticScorerSpec::PlantedSignal { gain, .. } => format!("planted({gain})"),
        }
    }
}

pub struct AnalyticScorer {
    id: ScorerId,
    kind: AnalyticKind,
}

enum AnalyticKind {
    Constant(f64),
    Luma { pivot: f64, gain: f64 },
    Planted { size: u32, centered: Vec<f64>, norm: f64, gain: f64 },
}

impl AnalyticScorer {
    pub fn new(id: impl Into<ScorerId>, spec: &AnalyticScorerSpec) -> Self {
        let kind = match spec {
            AnalyticScorerSpec::ConstantScore { value } => AnalyticKind::Constant(*value),
            AnalyticScorerSpec::LumaThreshold { pivot, gain } => AnalyticKind::Luma {
                pivot: *pivot,
                gain: *gain,
            },
            AnalyticScorerSpec::PlantedSignal { template, gain } => {
                let (centered, norm) = centre(template.values());
                AnalyticKind::Planted {
                    size: template.size(),
                    centered,
                    norm,
                    gain: *gain,
                }
            }
        };
        Self {
            id: id.into(),
            kind,
        }
    }

    fn score_one(&self, patch: &ImageBuffer) -> Result<f64, ScoringError> {
        match &self.kind {
            AnalyticKind::Constant(v) => Ok(*v),
            AnalyticKind::Luma { pivot, gain } => Ok(gain * (mean_luma(patch) - pivot)),
            AnalyticKind::Planted {
                size,
                centered,
                norm,
                gain,
            } => {
                if patch.width() != *size || patch.height() != *size {
                    return Err(ScoringError::ShapeMismatch(format!(
                        "patch is {}x{}, template is {size}x{size}",
                        patch.width(),
                        patch.height()
                    )));
                }
                let (lumas, patch_norm) = centre(patch.pixels().map(pixel_luma).collect());
                // Lumas live in [0, 1]; a one-level change already has norm ~4e-3.
                if *norm < FLAT_NORM || patch_norm < FLAT_NORM {
                    return Ok(0.0);
                }
                let dot: f64 = lumas.iter().zip(centered).map(|(a, b)| a * b).sum();
                Ok(gain * dot / (norm * patch_norm))
            }
        }
    }
}

impl From<String> for ScorerId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

// Below this the centred values are rounding residue of a flat patch.
const FLAT_NORM: f64 = 1e-9;

// Subtracts the mean and returns the L2 norm of the centred values.
fn centre(mut values: Vec<f64>) -> (Vec<f64>, f64) {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    for v in &mut values {
        *v -= mean;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    (values, norm)
}

impl PatchScorer for AnalyticScorer {
    fn id(&self) -> &ScorerId {
        &self.id
    }

    fn score_batch(&self, patches: &[ImageBuffer]) -> Result<Vec<f64>, ScoringError> {
        patches.iter().map(|p| self.score_one(p)).collect()
    }
}

/// Builds an analytic scorer named after its parameters.
pub fn make_analytic_scorer(spec: &AnalyticScorerSpec) -> AnalyticScorer {
    AnalyticScorer::new(spec.default_id(), spec)
}
