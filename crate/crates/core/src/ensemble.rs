//! End-to-end scoring of one image by an ensemble of patch scorers.

use std::sync::Arc;

use thiserror::Error;

use crate::aggregation::{aggregate, AggregationError, ImageVerdict, ScorerVerdict};
use crate::patching::{self, PatchError};
use crate::scoring::{score_patches_batched, ScoringError};
use crate::seed::derive_seed;
use crate::{AggregationPolicy, ImageBuffer, PatchScorer, SamplingPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("ensemble has no scorers")]
    Empty,
    #[error("scorer {index} samples {got}px patches, scorer 0 samples {expected}px")]
    InconsistentPatchSize { index: usize, expected: u32, got: u32 },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error("scorer {scorer}: {source}")]
    Scoring {
        scorer: String,
        #[source]
        source: ScoringError,
    },
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

/// One ensemble member: a scorer, how its patches are sampled, and how its
/// patch scores are collapsed.
#[derive(Clone)]
pub struct EnsembleMember {
    pub scorer: Arc<dyn PatchScorer>,
    pub sampling: SamplingPolicy,
    pub policy: AggregationPolicy,
}

impl EnsembleMember {
    pub fn new(scorer: Arc<dyn PatchScorer>, sampling: SamplingPolicy) -> Self {
        Self {
            scorer,
            sampling,
            policy: AggregationPolicy::Proposed,
        }
    }

    pub fn with_policy(self, policy: AggregationPolicy) -> Self {
        Self { policy, ..self }
    }
}

#[derive(Clone)]
pub struct EnsembleConfig {
    members: Vec<EnsembleMember>,
    batch_size: usize,
}

impl EnsembleConfig {
    pub const DEFAULT_BATCH_SIZE: usize = 64;

    pub fn new(members: Vec<EnsembleMember>) -> Result<Self, EnsembleError> {
        let first = members.first().ok_or(EnsembleError::Empty)?;
        let expected = first.sampling.size;
        for (index, m) in members.iter().enumerate() {
            m.sampling.validate()?;
            if m.sampling.size != expected {
                return Err(EnsembleError::InconsistentPatchSize {
                    index,
                    expected,
                    got: m.sampling.size,
                });
            }
        }
        Ok(Self {
            members,
            batch_size: Self::DEFAULT_BATCH_SIZE,
        })
    }

    pub fn with_batch_size(self, batch_size: usize) -> Self {
        Self {
            batch_size: batch_size.max(1),
            ..self
        }
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn patch_size(&self) -> u32 {
        self.members[0].sampling.size
    }

    /// Scores `image` with every member and fuses the results.
    ///
    /// Each member samples with a seed derived from its own sampling seed
    /// and `image_key`, so the verdict depends only on the image, its key
    /// and the configuration.
    pub fn detect(
        &self,
        image: &ImageBuffer,
        image_key: &str,
        threshold: f64,
    ) -> Result<ImageVerdict, EnsembleError> {
        let per_scorer = self
            .members
            .iter()
            .map(|m| self.score_member(m, image, image_key))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ImageVerdict::fuse(image_key, per_scorer, threshold)?)
    }

    fn score_member(
        &self,
        member: &EnsembleMember,
        image: &ImageBuffer,
        image_key: &str,
    ) -> Result<ScorerVerdict, EnsembleError> {
        let sampling = member
            .sampling
            .with_seed(derive_seed(member.sampling.seed, image_key));
        let (regions, patches) = patching::extract_patches(image, &sampling)?;
        let scores = score_patches_batched(member.scorer.as_ref(), &patches, &regions, self.batch_size)
            .map_err(|source| EnsembleError::Scoring {
                scorer: member.scorer.id().to_string(),
                source,
            })?;
        Ok(ScorerVerdict {
            id: member.scorer.id().clone(),
            score: aggregate(&scores, member.policy)?,
            policy: member.policy,
            patches: scores.len(),
        })
    }
}
