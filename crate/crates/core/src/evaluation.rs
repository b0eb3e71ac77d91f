//! ROC/AUC, confusion matrices, score histograms and the aggregation-policy
//! simulation.
//!
//! The synthetic class is the positive class throughout. AUC is the
//! Mann-Whitney statistic: the fraction of (synthetic, real) pairs in which
//! the synthetic sample scores higher, ties counting one half.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{aggregate_scores, classify, AggregationError, AggregationPolicy, Label};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no {0} samples; both classes are required")]
    SingleClass(Label),
    #[error("non-finite score {value} at sample {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub score: f64,
    pub truth: Label,
}

impl LabeledScore {
    pub fn new(score: f64, truth: Label) -> Self {
        Self { score, truth }
    }

    pub fn real(score: f64) -> Self {
        Self::new(score, Label::Real)
    }

    pub fn synthetic(score: f64) -> Self {
        Self::new(score, Label::Synthetic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    pub curve: Vec<RocPoint>,
    pub tpr_at_zero: f64,
    pub fpr_at_zero: f64,
}

impl RocResult {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.curve {
            let _ = writeln!(out, "{},{}", p.fpr, p.tpr);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    pub true_positives: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub tpr: f64,
    pub fpr: f64,
}

struct ClassCounts {
    real: u64,
    synthetic: u64,
}

fn check_samples(samples: &[LabeledScore]) -> Result<ClassCounts, EvalError> {
    if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| !s.score.is_finite()) {
        return Err(EvalError::NonFinite {
            index,
            value: s.score,
        });
    }
    let synthetic = samples.iter().filter(|s| s.truth == Label::Synthetic).count() as u64;
    let real = samples.len() as u64 - synthetic;
    if real == 0 {
        return Err(EvalError::SingleClass(Label::Real));
    }
    if synthetic == 0 {
        return Err(EvalError::SingleClass(Label::Synthetic));
    }
    Ok(ClassCounts { real, synthetic })
}

// Samples sorted ascending, grouped into runs of equal score, each run
// reported as (score, real count, synthetic count).
fn tie_groups(samples: &[LabeledScore]) -> Vec<(f64, u64, u64)> {
    let mut sorted: Vec<LabeledScore> = samples.to_vec();
    sorted.sort_by(|a, b| a.score.partial_cmp(&b.score).expect("scores are finite"));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for s in sorted {
        let (real, syn) = match s.truth {
            Label::Real => (1, 0),
            Label::Synthetic => (0, 1),
        };
        match groups.last_mut() {
            Some(g) if g.0 == s.score => {
                g.1 += real;
                g.2 += syn;
            }
            _ => groups.push((s.score, real, syn)),
        }
    }
    groups
}

/// AUC with the full ROC curve and the operating point at threshold 0.
pub fn compute_auc(samples: &[LabeledScore]) -> Result<RocResult, EvalError> {
    let counts = check_samples(samples)?;
    let groups = tie_groups(samples);

    // Twice the Mann-Whitney U, kept in integers so ties stay exact.
    let mut twice_u: u128 = 0;
    let mut real_below: u64 = 0;
    for &(_, real, syn) in &groups {
        twice_u += 2 * u128::from(syn) * u128::from(real_below) + u128::from(syn) * u128::from(real);
        real_below += real;
    }
    let auc = twice_u as f64 / (2 * u128::from(counts.real) * u128::from(counts.synthetic)) as f64;

    let mut curve = Vec::with_capacity(groups.len() + 1);
    curve.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let (mut fp, mut tp) = (0u64, 0u64);
    for &(_, real, syn) in groups.iter().rev() {
        fp += real;
        tp += syn;
        curve.push(RocPoint {
            fpr: fp as f64 / counts.real as f64,
            tpr: tp as f64 / counts.synthetic as f64,
        });
    }

    let at_zero = confusion_at(samples, 0.0)?;
    Ok(RocResult {
        auc,
        curve,
        tpr_at_zero: at_zero.tpr,
        fpr_at_zero: at_zero.fpr,
    })
}

/// Confusion counts with scores at or above `threshold` called synthetic.
pub fn confusion_at(samples: &[LabeledScore], threshold: f64) -> Result<Confusion, EvalError> {
    let counts = check_samples(samples)?;
    let (mut tp, mut fp) = (0u64, 0u64);
    for s in samples {
        if classify(s.score, threshold) == Label::Synthetic {
            match s.truth {
                Label::Synthetic => tp += 1,
                Label::Real => fp += 1,
            }
        }
    }
    Ok(Confusion {
        threshold,
        true_positives: tp,
        false_negatives: counts.synthetic - tp,
        false_positives: fp,
        true_negatives: counts.real - fp,
        tpr: tp as f64 / counts.synthetic as f64,
        fpr: fp as f64 / counts.real as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bin_count + 1` equally spaced edges from the minimum to the maximum
    /// score.
    pub edges: Vec<f64>,
    pub real: Vec<u64>,
    pub synthetic: Vec<u64>,
}

impl Histogram {
    pub const DEFAULT_BINS: usize = 50;

    pub fn bin_count(&self) -> usize {
        self.real.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,real,synthetic\n");
        for i in 0..self.bin_count() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.real[i],
                self.synthetic[i]
            );
        }
        out
    }
}

/// Per-class counts over `bin_count` equal-width bins spanning all scores.
/// Non-finite scores are skipped; `bin_count` of 0 is treated as 1.
pub fn histogram(samples: &[LabeledScore], bin_count: usize) -> Histogram {
    let bins = bin_count.max(1);
    let finite = samples.iter().filter(|s| s.score.is_finite());
    let (lo, hi) = finite
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.score), hi.max(s.score)));
    let (lo, hi) = if lo > hi { (0.0, 0.0) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut real = vec![0u64; bins];
    let mut synthetic = vec![0u64; bins];
    for s in finite {
        let idx = if hi > lo {
            (((s.score - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        match s.truth {
            Label::Real => real[idx] += 1,
            Label::Synthetic => synthetic[idx] += 1,
        }
    }
    Histogram {
        edges,
        real,
        synthetic,
    }
}

/// Gaussian patch-score model standing in for a trained scorer.
///
/// Real images draw every patch score from `N(real_mean, sigma)`. In a
/// synthetic image each patch independently carries the generator trace
/// with probability `signal_fraction`, drawing from
/// `N(synthetic_mean, sigma)`; the rest look real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub images_per_class: usize,
    pub patches_per_image: usize,
    pub real_mean: f64,
    pub synthetic_mean: f64,
    pub sigma: f64,
    pub signal_fraction: f64,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            images_per_class: 500,
            patches_per_image: 100,
            real_mean: -2.0,
            synthetic_mean: 2.0,
            sigma: 0.5,
            signal_fraction: 0.1,
            seed: 2022,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::InvalidSpec(msg));
        if self.images_per_class == 0 || self.patches_per_image == 0 {
            return fail("images_per_class and patches_per_image must be >= 1".into());
        }
        if !(self.signal_fraction > 0.0 && self.signal_fraction <= 1.0) {
            return fail(format!("signal_fraction {} outside (0, 1]", self.signal_fraction));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma {} must be positive", self.sigma));
        }
        if !(self.real_mean < 0.0 && self.synthetic_mean > 0.0) {
            return fail(format!(
                "need real_mean < 0 < synthetic_mean, got {} and {}",
                self.real_mean, self.synthetic_mean
            ));
        }
        if !(self.real_mean.is_finite() && self.synthetic_mean.is_finite()) {
            return fail("means must be finite".into());
        }
        Ok(())
    }

    /// Patch score vectors for every simulated image, real images first.
    pub fn generate(&self) -> Result<Vec<(Label, Vec<f64>)>, EvalError> {
        self.validate()?;
        let real = Normal::new(self.real_mean, self.sigma).expect("validated sigma");
        let synthetic = Normal::new(self.synthetic_mean, self.sigma).expect("validated sigma");
        let images: Vec<(Label, usize)> = [Label::Real, Label::Synthetic]
            .into_iter()
            .flat_map(|label| (0..self.images_per_class).map(move |i| (label, i)))
            .collect();
        Ok(images
            .into_par_iter()
            .map(|(label, i)| {
                let mut rng = seed::stream(self.seed, &format!("{label}/{i}"));
                let scores = (0..self.patches_per_image)
                    .map(|_| match label {
                        Label::Real => real.sample(&mut rng),
                        Label::Synthetic => {
                            if rng.random_bool(self.signal_fraction) {
                                synthetic.sample(&mut rng)
                            } else {
                                real.sample(&mut rng)
                            }
                        }
                    })
                    .collect();
                (label, scores)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: AggregationPolicy,
    pub auc: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Aggregates simulated images under each policy and evaluates at 0.
pub fn simulate_policy_comparison(
    spec: &SimulationSpec,
    policies: &[AggregationPolicy],
) -> Result<Vec<PolicyRow>, EvalError> {
    let images = spec.generate()?;
    policies
        .iter()
        .map(|&policy| {
            let samples = images
                .iter()
                .map(|(label, scores)| Ok(LabeledScore::new(aggregate_scores(scores, policy)?, *label)))
                .collect::<Result<Vec<_>, AggregationError>>()?;
            let roc = compute_auc(&samples)?;
            Ok(PolicyRow {
                policy,
                auc: roc.auc,
                tpr: roc.tpr_at_zero,
                fpr: roc.fpr_at_zero,
            })
        })
        .collect()
}

/// Renders a comparison table as CSV.
pub fn policy_table_csv(rows: &[PolicyRow]) -> String {
    let mut out = String::from("policy,auc,tpr,fpr\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.policy, r.auc, r.tpr, r.fpr);
    }
    out
}
