//! Construction rules for the five orthogonal training datasets.
//!
//! | id | categories            | order            | patches/image | JPEG |
//! |----|-----------------------|------------------|---------------|------|
//! | D1 | ffhq, metfaces, afhq2 | augment then crop| 1             | yes  |
//! | D2 | ffhq, metfaces, afhq2 | crop then augment| 1             | yes  |
//! | D3 | afhq2                 | crop then augment| 10            | no   |
//! | D4 | metfaces, afhq2       | crop then augment| 10            | no   |
//! | D5 | ffhq                  | crop then augment| 1             | yes  |
//!
//! Augmenting the full image before cropping (D1) means random crops land
//! anywhere relative to the JPEG block lattice. Cropping first on the grid
//! (D2-D5) keeps every patch in phase with the compression blocks.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmentation::{apply_pipeline, AugmentError, AugmentationConfig, AugmentationLog, OpKind};
use crate::patching::{self, PatchError, PatchRegion, SamplingMode, SamplingPolicy};
use crate::seed;
use crate::{ImageBuffer, Label, DEFAULT_PATCH_SIZE};

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error("unknown recipe {0:?} (expected D1..D5)")]
    UnknownRecipe(String),
    #[error("no manifest entries match recipe {0}")]
    EmptyAfterFilter(RecipeId),
    #[error("invalid source manifest: {0}")]
    InvalidManifest(String),
    #[error("{path}: {source}")]
    Load {
        path: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{path}: {source}")]
    Patch {
        path: String,
        #[source]
        source: PatchError,
    },
    #[error("{path}: {source}")]
    Augment {
        path: String,
        #[source]
        source: AugmentError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Ffhq,
    Metfaces,
    Afhq2,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Ffhq, Category::Metfaces, Category::Afhq2];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "stylegan2")]
    StyleGan2,
    #[serde(rename = "stargan-v2")]
    StarGanV2,
    #[serde(rename = "taming")]
    Taming,
    #[serde(rename = "facev2v")]
    FaceVid2Vid,
    #[serde(rename = "score-based")]
    ScoreBased,
}

impl Generator {
    pub const SYNTHETIC: [Generator; 5] = [
        Generator::StyleGan2,
        Generator::StarGanV2,
        Generator::Taming,
        Generator::FaceVid2Vid,
        Generator::ScoreBased,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub path: String,
    pub label: Label,
    pub generator: Generator,
    pub category: Category,
}

/// The images available for dataset construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceManifest {
    entries: Vec<SourceEntry>,
}

impl SourceManifest {
    pub fn new(entries: Vec<SourceEntry>) -> Result<Self, RecipeError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(RecipeError::InvalidManifest(format!("duplicate path {}", e.path)));
            }
            match (e.label, e.generator) {
                (Label::Real, g) if g != Generator::None => {
                    return Err(RecipeError::InvalidManifest(format!(
                        "{} is real but tagged with a generator",
                        e.path
                    )))
                }
                (Label::Synthetic, Generator::None) => {
                    return Err(RecipeError::InvalidManifest(format!(
                        "{} is synthetic but has no generator tag",
                        e.path
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { entries })
    }

    /// Parses one JSON object per non-blank line.
    pub fn from_jsonl(text: &str) -> Result<Self, RecipeError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| RecipeError::InvalidManifest(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[SourceEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecipeId {
    D1,
    D2,
    D3,
    D4,
    D5,
}

impl RecipeId {
    pub const ALL: [RecipeId; 5] = [RecipeId::D1, RecipeId::D2, RecipeId::D3, RecipeId::D4, RecipeId::D5];
}

impl fmt::Display for RecipeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RecipeId {
    type Err = RecipeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D1" => Ok(RecipeId::D1),
            "D2" => Ok(RecipeId::D2),
            "D3" => Ok(RecipeId::D3),
            "D4" => Ok(RecipeId::D4),
            "D5" => Ok(RecipeId::D5),
            _ => Err(RecipeError::UnknownRecipe(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchOrder {
    /// Augment the full image, then crop at random offsets.
    AugmentThenCrop,
    /// Crop on the JPEG grid, then augment each patch.
    CropThenAugment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub id: RecipeId,
    pub categories: BTreeSet<Category>,
    /// Generators admitted for synthetic entries. Real entries always pass.
    pub generators: BTreeSet<Generator>,
    pub order: PatchOrder,
    pub patches_per_image: usize,
    #[serde(default = "default_patch_size")]
    pub patch_size: u32,
    pub jpeg_enabled: bool,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
}

fn default_patch_size() -> u32 {
    DEFAULT_PATCH_SIZE
}

/// Returns the built-in recipe for `id`.
pub fn builtin_recipe(id: RecipeId) -> DatasetRecipe {
    use Category::*;
    use Generator::*;
    let all_generators: BTreeSet<_> = Generator::SYNTHETIC.into_iter().collect();
    let (categories, generators, order, patches_per_image, jpeg_enabled): (&[Category], BTreeSet<Generator>, _, _, _) =
        match id {
            RecipeId::D1 => (&Category::ALL, all_generators, PatchOrder::AugmentThenCrop, 1, true),
            RecipeId::D2 => (&Category::ALL, all_generators, PatchOrder::CropThenAugment, 1, true),
            RecipeId::D3 => (&[Afhq2], [StyleGan2, StarGanV2].into(), PatchOrder::CropThenAugment, 10, false),
            RecipeId::D4 => (
                &[Metfaces, Afhq2],
                [StyleGan2, StarGanV2].into(),
                PatchOrder::CropThenAugment,
                10,
                false,
            ),
            RecipeId::D5 => (
                &[Ffhq],
                [StyleGan2, Taming, FaceVid2Vid, ScoreBased].into(),
                PatchOrder::CropThenAugment,
                1,
                true,
            ),
        };
    DatasetRecipe {
        id,
        categories: categories.iter().copied().collect(),
        generators,
        order,
        patches_per_image,
        patch_size: DEFAULT_PATCH_SIZE,
        jpeg_enabled,
        augmentation: AugmentationConfig::default(),
    }
}

/// Looks a recipe up by its textual id.
pub fn builtin_recipe_named(name: &str) -> Result<DatasetRecipe, RecipeError> {
    Ok(builtin_recipe(name.parse()?))
}

impl DatasetRecipe {
    /// D4 restricted to Metfaces, the variant that trained unstably.
    pub fn d4_metfaces_only() -> Self {
        Self {
            categories: [Category::Metfaces].into(),
            generators: [Generator::StyleGan2].into(),
            ..builtin_recipe(RecipeId::D4)
        }
    }

    pub fn admits(&self, entry: &SourceEntry) -> bool {
        self.categories.contains(&entry.category)
            && (entry.label == Label::Real || self.generators.contains(&entry.generator))
    }

    /// The augmentation configuration with JPEG disabled when the recipe
    /// excludes it.
    pub fn effective_augmentation(&self) -> AugmentationConfig {
        let config = self.augmentation.clone();
        if self.jpeg_enabled {
            config
        } else {
            config.with_probability(OpKind::Jpeg, 0.0)
        }
    }

    fn sampling_mode(&self) -> SamplingMode {
        match self.order {
            PatchOrder::AugmentThenCrop => SamplingMode::Random,
            PatchOrder::CropThenAugment => SamplingMode::GridAligned,
        }
    }
}

/// One emitted training patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub recipe: RecipeId,
    pub source: String,
    pub label: Label,
    pub category: Category,
    pub generator: Generator,
    pub patch_index: usize,
    pub region: PatchRegion,
    pub augmentation: AugmentationLog,
}

#[derive(Debug, Clone)]
pub struct MaterializedPatch {
    pub row: DatasetRow,
    pub pixels: Option<ImageBuffer>,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetOutput {
    pub patches: Vec<MaterializedPatch>,
}

impl DatasetOutput {
    pub fn rows(&self) -> impl Iterator<Item = &DatasetRow> {
        self.patches.iter().map(|p| &p.row)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            out.push_str(&serde_json::to_string(row).expect("rows serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MaterializeOptions {
    /// Keep the augmented patch pixels alongside each row.
    pub keep_pixels: bool,
}

/// Builds the patch-level dataset described by `recipe`.
///
/// Every entry gets an independent stream derived from `seed` and its path,
/// so the output does not depend on how entries are scheduled. Rows follow
/// manifest order, then patch order.
pub fn materialize<L, E>(
    recipe: &DatasetRecipe,
    manifest: &SourceManifest,
    seed: u64,
    options: MaterializeOptions,
    load: L,
) -> Result<DatasetOutput, RecipeError>
where
    L: Fn(&SourceEntry) -> Result<ImageBuffer, E> + Sync,
    E: std::error::Error + Send + Sync + 'static,
{
    let selected: Vec<&SourceEntry> = manifest.entries().iter().filter(|e| recipe.admits(e)).collect();
    if selected.is_empty() {
        return Err(RecipeError::EmptyAfterFilter(recipe.id));
    }
    let augmentation = recipe.effective_augmentation();
    augmentation.validate().map_err(|source| RecipeError::Augment {
        path: String::from("<recipe>"),
        source,
    })?;

    let per_entry = selected
        .par_iter()
        .map(|entry| {
            let image = load(entry).map_err(|e| RecipeError::Load {
                path: entry.path.clone(),
                source: Box::new(e),
            })?;
            materialize_entry(recipe, &augmentation, entry, &image, seed, options)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DatasetOutput {
        patches: per_entry.into_iter().flatten().collect(),
    })
}

fn materialize_entry(
    recipe: &DatasetRecipe,
    augmentation: &AugmentationConfig,
    entry: &SourceEntry,
    image: &ImageBuffer,
    seed: u64,
    options: MaterializeOptions,
) -> Result<Vec<MaterializedPatch>, RecipeError> {
    let entry_seed = seed::derive_seed(seed, &entry.path);
    let mut rng = seed::stream_from(entry_seed);
    let patch_err = |source| RecipeError::Patch {
        path: entry.path.clone(),
        source,
    };
    let aug_err = |source| RecipeError::Augment {
        path: entry.path.clone(),
        source,
    };
    let policy = SamplingPolicy::new(recipe.sampling_mode(), recipe.patches_per_image, recipe.patch_size, entry_seed)
        .map_err(patch_err)?;

    let crops: Vec<(PatchRegion, ImageBuffer, AugmentationLog)> = match recipe.order {
        PatchOrder::AugmentThenCrop => {
            let (augmented, log) = apply_pipeline(image, augmentation, &mut rng).map_err(aug_err)?;
            let (regions, patches) = patching::extract_patches(&augmented, &policy).map_err(patch_err)?;
            regions
                .into_iter()
                .zip(patches)
                .map(|(r, p)| (r, p, log.clone()))
                .collect()
        }
        PatchOrder::CropThenAugment => {
            let (regions, patches) = patching::extract_patches(image, &policy).map_err(patch_err)?;
            regions
                .into_iter()
                .zip(patches)
                .map(|(r, p)| {
                    let (augmented, log) = apply_pipeline(&p, augmentation, &mut rng).map_err(aug_err)?;
                    Ok((r, augmented, log))
                })
                .collect::<Result<_, RecipeError>>()?
        }
    };

    Ok(crops
        .into_iter()
        .enumerate()
        .map(|(patch_index, (region, pixels, log))| MaterializedPatch {
            row: DatasetRow {
                recipe: recipe.id,
                source: entry.path.clone(),
                label: entry.label,
                category: entry.category,
                generator: entry.generator,
                patch_index,
                region,
                augmentation: log,
            },
            pixels: options.keep_pixels.then_some(pixels),
        })
        .collect())
}

/// The ways in which two datasets can differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orthogonality {
    /// Disjoint semantic categories.
    Semantic,
    /// Different post-processing order, hence different JPEG-grid alignment.
    PostProcessing,
    /// One applies JPEG compression and the other does not.
    Compression,
    /// Different generator sets.
    Generators,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: RecipeId,
    pub b: RecipeId,
    pub holds: Vec<Orthogonality>,
    pub fails: Vec<Orthogonality>,
}

impl PairReport {
    pub fn is_orthogonal(&self) -> bool {
        !self.holds.is_empty()
    }

    pub fn holds(&self, condition: Orthogonality) -> bool {
        self.holds.contains(&condition)
    }
}

/// Checks every pair of recipes against the four orthogonality conditions.
pub fn validate_orthogonality(recipes: &[DatasetRecipe]) -> Vec<PairReport> {
    let mut reports = Vec::new();
    for (i, a) in recipes.iter().enumerate() {
        for b in &recipes[i + 1..] {
            let checks = [
                (Orthogonality::Semantic, a.categories.is_disjoint(&b.categories)),
                (Orthogonality::PostProcessing, a.order != b.order),
                (Orthogonality::Compression, a.jpeg_enabled != b.jpeg_enabled),
                (Orthogonality::Generators, a.generators != b.generators),
            ];
            let (holds, fails): (Vec<_>, Vec<_>) = checks.into_iter().partition(|(_, ok)| *ok);
            reports.push(PairReport {
                a: a.id,
                b: b.id,
                holds: holds.into_iter().map(|(c, _)| c).collect(),
                fails: fails.into_iter().map(|(c, _)| c).collect(),
            });
        }
    }
    reports
}

/// Training hyperparameters handed to external trainers as a sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfigMetadata {
    pub backbone: String,
    pub pretrained_weights: String,
    pub patch_size: u32,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub loss: String,
    pub optimizer: OptimizerConfig,
    pub initial_learning_rate: f64,
    pub plateau_decay_factor: f64,
    pub plateau_patience_epochs: u32,
    pub early_stop_patience_epochs: u32,
    pub max_epochs: u32,
    pub model_selection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub name: String,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfigMetadata {
    fn default() -> Self {
        Self {
            backbone: "efficientnet-b4".into(),
            pretrained_weights: "imagenet".into(),
            patch_size: DEFAULT_PATCH_SIZE,
            train_fraction: 0.8,
            validation_fraction: 0.2,
            loss: "cross-entropy".into(),
            optimizer: OptimizerConfig {
                name: "adam".into(),
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            initial_learning_rate: 0.001,
            plateau_decay_factor: 10.0,
            plateau_patience_epochs: 10,
            early_stop_patience_epochs: 20,
            max_epochs: 500,
            model_selection: "best-validation-loss".into(),
        }
    }
}
