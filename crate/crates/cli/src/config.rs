//! Ensemble configuration files.
//!
//! ```json
//! {
//!   "patch_size": 128,
//!   "scorers": [
//!     {"id": "cnn1", "backend": {"onnx": {"model_path": "cnn1.onnx"}},
//!      "sampling": {"mode": "random", "count": 200}},
//!     {"id": "flat", "backend": {"analytic": {"kind": "constant_score", "value": -1.0}},
//!      "policy": "k=5"}
//!   ]
//! }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use synthdetect::scoring::onnx::{load_model_backend, ModelBackendConfig, Normalization};
use synthdetect::scoring::{AnalyticScorer, AnalyticScorerSpec};
use synthdetect::seed::derive_seed;
use synthdetect::{
    AggregationPolicy, EnsembleConfig, EnsembleMember, PatchScorer, SamplingMode, SamplingPolicy,
    DEFAULT_PATCH_SIZE,
};

/// Patches drawn by the first, randomly sampling, default scorer.
pub const DEFAULT_RANDOM_PATCHES: usize = 200;
/// Default number of grid-aligned patches for the remaining scorers.
pub const DEFAULT_PATCHES_PER_SCORER: usize = 180;
/// Number of models looked up in the default model directory.
pub const DEFAULT_MODEL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendDecl {
    Analytic(AnalyticScorerSpec),
    Onnx(ModelBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingDecl {
    #[serde(default)]
    pub mode: Option<SamplingMode>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerDecl {
    pub id: String,
    pub backend: BackendDecl,
    #[serde(default)]
    pub sampling: SamplingDecl,
    #[serde(default)]
    pub policy: AggregationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFileConfig {
    #[serde(default = "default_patch_size")]
    pub patch_size: u32,
    pub scorers: Vec<ScorerDecl>,
}

fn default_patch_size() -> u32 {
    DEFAULT_PATCH_SIZE
}

impl EnsembleFileConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing ensemble config {}", path.display()))?;
        // Relative model paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut config.scorers {
            if let BackendDecl::Onnx(m) = &mut s.backend {
                if m.model_path.is_relative() {
                    m.model_path = base.join(&m.model_path);
                }
            }
        }
        Ok(config)
    }

    /// The five-model deployment layout: `cnn1.onnx` samples 200 random
    /// patches, `cnn2.onnx` .. `cnn5.onnx` sample `patches_per_scorer`
    /// grid-aligned patches each.
    pub fn default_models(dir: &Path, patches_per_scorer: usize) -> Self {
        let scorers = (1..=DEFAULT_MODEL_COUNT)
            .map(|i| {
                let mut backend = ModelBackendConfig::new(dir.join(format!("cnn{i}.onnx")));
                backend.normalization = Normalization::imagenet();
                let (mode, count) = if i == 1 {
                    (SamplingMode::Random, DEFAULT_RANDOM_PATCHES)
                } else {
                    (SamplingMode::GridAligned, patches_per_scorer)
                };
                ScorerDecl {
                    id: format!("cnn{i}"),
                    backend: BackendDecl::Onnx(backend),
                    sampling: SamplingDecl {
                        mode: Some(mode),
                        count: Some(count),
                        seed: None,
                    },
                    policy: AggregationPolicy::Proposed,
                }
            })
            .collect();
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            scorers,
        }
    }

    /// Instantiates every scorer. Unset sampling fields default to
    /// grid-aligned sampling of `patches_per_scorer` patches with a seed
    /// derived from `seed` and the scorer id.
    pub fn build(&self, seed: u64, patches_per_scorer: usize) -> anyhow::Result<EnsembleConfig> {
        if self.scorers.is_empty() {
            bail!("ensemble config declares no scorers");
        }
        let mut ids: Vec<&str> = self.scorers.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            bail!("duplicate scorer id {:?}", w[0]);
        }
        let members = self
            .scorers
            .iter()
            .map(|decl| self.member(decl, seed, patches_per_scorer))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(EnsembleConfig::new(members)?)
    }

    fn member(
        &self,
        decl: &ScorerDecl,
        seed: u64,
        patches_per_scorer: usize,
    ) -> anyhow::Result<EnsembleMember> {
        let scorer: Arc<dyn PatchScorer> = match &decl.backend {
            BackendDecl::Analytic(spec) => Arc::new(AnalyticScorer::new(decl.id.as_str(), spec)),
            BackendDecl::Onnx(model) => {
                let mut model = model.clone();
                model.input_size = self.patch_size;
                Arc::new(
                    load_model_backend(decl.id.as_str(), &model)
                        .with_context(|| format!("scorer {}", decl.id))?,
                )
            }
        };
        let sampling = SamplingPolicy::new(
            decl.sampling.mode.unwrap_or(SamplingMode::GridAligned),
            decl.sampling.count.unwrap_or(patches_per_scorer),
            self.patch_size,
            decl.sampling
                .seed
                .unwrap_or_else(|| derive_seed(seed, &format!("scorer/{}", decl.id))),
        )
        .with_context(|| format!("scorer {}", decl.id))?;
        Ok(EnsembleMember::new(scorer, sampling).with_policy(decl.policy))
    }
}

/// Resolves the configuration for `detect`: an explicit file, or the
/// default model layout under `model_dir`.
pub fn resolve(
    config: Option<&PathBuf>,
    model_dir: Option<&PathBuf>,
    patches_per_scorer: usize,
) -> anyhow::Result<EnsembleFileConfig> {
    match (config, model_dir) {
        (Some(path), _) => EnsembleFileConfig::from_path(path),
        (None, Some(dir)) => Ok(EnsembleFileConfig::default_models(dir, patches_per_scorer)),
        (None, None) => bail!(
            "no ensemble configured: pass --config or set --model-dir / {}",
            crate::MODEL_DIR_ENV
        ),
    }
}
