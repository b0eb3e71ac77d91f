//! Patch-score aggregation and ensemble fusion.
//!
//! The proposed rule trusts the real class: an image is called real only if
//! every patch score is negative, in which case its score is the most
//! negative patch score. As soon as one patch scores zero or above, the
//! image takes the largest patch score instead. `KThreshold(k)` relaxes the
//! trigger to at least `k` non-negative patches; `Mean` and `Median` are the
//! usual pooled baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{PatchScoreVector, ScorerId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregationError {
    #[error("cannot aggregate an empty score vector")]
    EmptyScores,
    #[error("cannot fuse an empty ensemble")]
    EmptyEnsemble,
    #[error("invalid aggregation policy {0:?} (expected proposed, mean, median or k=<n>)")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AggregationPolicy {
    #[default]
    Proposed,
    /// Max branch once at least `k` scores are non-negative, min otherwise.
    KThreshold(usize),
    Mean,
    Median,
}

impl AggregationPolicy {
    pub fn k_threshold(k: usize) -> Result<Self, AggregationError> {
        if k == 0 {
            return Err(AggregationError::InvalidPolicy("k=0".into()));
        }
        Ok(Self::KThreshold(k))
    }
}

impl fmt::Display for AggregationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationPolicy::Proposed => f.write_str("proposed"),
            AggregationPolicy::KThreshold(k) => write!(f, "k={k}"),
            AggregationPolicy::Mean => f.write_str("mean"),
            AggregationPolicy::Median => f.write_str("median"),
        }
    }
}

impl FromStr for AggregationPolicy {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "proposed" => Ok(Self::Proposed),
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => other
                .strip_prefix("k=")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Self::KThreshold)
                .ok_or_else(|| AggregationError::InvalidPolicy(s.to_owned())),
        }
    }
}

impl Serialize for AggregationPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AggregationPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn min_of(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Collapses one scorer's patch scores into an image score.
pub fn aggregate_scores(scores: &[f64], policy: AggregationPolicy) -> Result<f64, AggregationError> {
    if scores.is_empty() {
        return Err(AggregationError::EmptyScores);
    }
    Ok(match policy {
        AggregationPolicy::Proposed => {
            if scores.iter().all(|&s| s < 0.0) {
                min_of(scores)
            } else {
                max_of(scores)
            }
        }
        AggregationPolicy::KThreshold(k) => {
            let non_negative = scores.iter().filter(|&&s| s >= 0.0).count();
            if non_negative >= k {
                max_of(scores)
            } else {
                min_of(scores)
            }
        }
        AggregationPolicy::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        AggregationPolicy::Median => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
    })
}

/// [`aggregate_scores`] on a scorer's output.
pub fn aggregate(scores: &PatchScoreVector, policy: AggregationPolicy) -> Result<f64, AggregationError> {
    aggregate_scores(scores.scores(), policy)
}

/// Equal-weight mean of the per-scorer image scores.
pub fn fuse_ensemble(image_scores: &[f64]) -> Result<f64, AggregationError> {
    if image_scores.is_empty() {
        return Err(AggregationError::EmptyEnsemble);
    }
    Ok(image_scores.iter().sum::<f64>() / image_scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Synthetic,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "0" => Ok(Label::Real),
            "synthetic" | "fake" | "1" => Ok(Label::Synthetic),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Real below `threshold`, synthetic at or above it.
pub fn classify(score: f64, threshold: f64) -> Label {
    if score < threshold {
        Label::Real
    } else {
        Label::Synthetic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerVerdict {
    pub id: ScorerId,
    pub score: f64,
    pub policy: AggregationPolicy,
    pub patches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageVerdict {
    pub image: String,
    pub fused_score: f64,
    pub label: Label,
    pub per_scorer: Vec<ScorerVerdict>,
}

impl ImageVerdict {
    /// Fuses per-scorer results and labels the image at `threshold`.
    pub fn fuse(
        image: impl Into<String>,
        per_scorer: Vec<ScorerVerdict>,
        threshold: f64,
    ) -> Result<Self, AggregationError> {
        let scores: Vec<f64> = per_scorer.iter().map(|s| s.score).collect();
        let fused_score = fuse_ensemble(&scores)?;
        Ok(Self {
            image: image.into(),
            fused_score,
            label: classify(fused_score, threshold),
            per_scorer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn agg(scores: &[f64], policy: AggregationPolicy) -> f64 {
        aggregate_scores(scores, policy).unwrap()
    }

    #[test]
    fn proposed_branches() {
        assert_eq!(agg(&[-2.0, -0.5, -1.3], AggregationPolicy::Proposed), -2.0);
        assert_eq!(agg(&[-2.0, 0.7, 0.3], AggregationPolicy::Proposed), 0.7);
        assert_eq!(agg(&[0.0, -1.0], AggregationPolicy::Proposed), 0.0);
    }

    #[test]
    fn k_threshold_example() {
        // Two non-negative scores: k=2 fires, k=3 does not.
        assert_eq!(agg(&[-2.0, 0.7, 0.3], AggregationPolicy::KThreshold(2)), 0.7);
        assert_eq!(agg(&[-2.0, 0.7, 0.3], AggregationPolicy::KThreshold(3)), -2.0);
    }

    #[test]
    fn k_threshold_with_fewer_patches_than_k() {
        // All non-negative but P < k: the count test fails and min is returned.
        assert_eq!(agg(&[0.5, 1.5], AggregationPolicy::KThreshold(3)), 0.5);
    }

    #[test]
    fn pooled_baselines() {
        assert_eq!(agg(&[1.0, 2.0, 3.0, 4.0], AggregationPolicy::Median), 2.5);
        assert_eq!(agg(&[3.0, 1.0, 2.0], AggregationPolicy::Median), 2.0);
        assert_eq!(agg(&[1.0, 2.0, 3.0, 6.0], AggregationPolicy::Mean), 3.0);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(
            aggregate_scores(&[], AggregationPolicy::Proposed),
            Err(AggregationError::EmptyScores)
        );
        assert_eq!(fuse_ensemble(&[]), Err(AggregationError::EmptyEnsemble));
    }

    #[test]
    fn fusion_examples() {
        assert_eq!(fuse_ensemble(&[-1.0, 3.0]).unwrap(), 1.0);
        assert_eq!(fuse_ensemble(&[-0.4]).unwrap(), -0.4);
        assert_eq!(fuse_ensemble(&[1.0; 5]).unwrap(), 1.0);
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify(-0.001, 0.0), Label::Real);
        assert_eq!(classify(0.0, 0.0), Label::Synthetic);
        assert_eq!(classify(5.0, 0.0), Label::Synthetic);
    }

    #[test]
    fn policy_strings() {
        for p in [
            AggregationPolicy::Proposed,
            AggregationPolicy::KThreshold(25),
            AggregationPolicy::Mean,
            AggregationPolicy::Median,
        ] {
            assert_eq!(p.to_string().parse::<AggregationPolicy>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<AggregationPolicy>(&json).unwrap(), p);
        }
        assert!("k=0".parse::<AggregationPolicy>().is_err());
        assert!("max".parse::<AggregationPolicy>().is_err());
    }

    #[test]
    fn verdict_json_shape() {
        let v = ImageVerdict::fuse(
            "a.png",
            vec![ScorerVerdict {
                id: "cnn1".into(),
                score: -1.0,
                policy: AggregationPolicy::Proposed,
                patches: 200,
            }],
            0.0,
        )
        .unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(
            json,
            r#"{"image":"a.png","fused_score":-1.0,"label":"real","per_scorer":[{"id":"cnn1","score":-1.0,"policy":"proposed","patches":200}]}"#
        );
    }

    fn scores_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..64)
    }

    proptest! {
        #[test]
        fn proposed_equals_k1(scores in scores_strategy()) {
            prop_assert_eq!(
                agg(&scores, AggregationPolicy::Proposed),
                agg(&scores, AggregationPolicy::KThreshold(1))
            );
        }

        #[test]
        fn permutation_invariant(scores in scores_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut crate::seed::stream_from(seed));
            for policy in [
                AggregationPolicy::Proposed,
                AggregationPolicy::KThreshold(3),
                AggregationPolicy::Median,
            ] {
                prop_assert_eq!(agg(&scores, policy), agg(&shuffled, policy));
            }
            let (a, b) = (agg(&scores, AggregationPolicy::Mean), agg(&shuffled, AggregationPolicy::Mean));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn smaller_k_never_less_synthetic(scores in scores_strategy(), k1 in 1usize..40, k2 in 1usize..40) {
            let (lo, hi) = (k1.min(k2), k1.max(k2));
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let fired_hi = scores.iter().filter(|&&s| s >= 0.0).count() >= hi;
            if fired_hi {
                prop_assert_eq!(agg(&scores, AggregationPolicy::KThreshold(lo)), max);
            }
            prop_assert!(agg(&scores, AggregationPolicy::KThreshold(lo)) >= agg(&scores, AggregationPolicy::KThreshold(hi)));
        }

        #[test]
        fn fusion_is_linear(scores in prop::collection::vec(-10.0f64..10.0, 1..8), a in -4.0f64..4.0) {
            let scaled: Vec<f64> = scores.iter().map(|s| a * s).collect();
            let lhs = fuse_ensemble(&scaled).unwrap();
            let rhs = a * fuse_ensemble(&scores).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
