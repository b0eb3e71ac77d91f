use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use synthdetect::recipes::{
    builtin_recipe_named, materialize, DatasetRecipe, MaterializeOptions, RecipeError, RecipeId,
    SourceEntry, SourceManifest, TrainingConfigMetadata,
};
use synthdetect::ImageBuffer;

use crate::{imageio, DataFailure, GlobalArgs, Outcome};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const TRAINING_CONFIG_FILE: &str = "training_config.json";
pub const PATCH_DIR: &str = "patches";

#[derive(Debug, Clone, Args)]
pub struct BuildDatasetArgs {
    /// Built-in recipe id (D1..D5) or a recipe JSON file.
    #[arg(long)]
    pub recipe: String,
    /// Source manifest, JSON-lines of {path, label, generator, category}.
    /// Relative paths are resolved against the manifest's directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Use Metfaces alone for D4 instead of Metfaces plus AFHQ2.
    #[arg(long)]
    pub d4_metfaces_only: bool,
    /// Also write every patch as PNG under `patches/`.
    #[arg(long)]
    pub write_patches: bool,
}

/// A built-in id, or else a path to a recipe JSON file.
pub fn resolve_recipe(spec: &str, d4_metfaces_only: bool) -> anyhow::Result<DatasetRecipe> {
    let recipe = match builtin_recipe_named(spec) {
        Ok(r) => r,
        Err(e) => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(e.into());
            }
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).with_context(|| format!("parsing recipe {spec}"))?
        }
    };
    if d4_metfaces_only {
        if recipe.id != RecipeId::D4 {
            bail!("--d4-metfaces-only only applies to recipe D4, got {}", recipe.id);
        }
        return Ok(DatasetRecipe::d4_metfaces_only());
    }
    Ok(recipe)
}

fn resolve_sources(manifest: SourceManifest, base: &Path) -> anyhow::Result<SourceManifest> {
    let entries = manifest
        .entries()
        .iter()
        .cloned()
        .map(|mut e| {
            if Path::new(&e.path).is_relative() {
                e.path = base.join(&e.path).display().to_string();
            }
            e
        })
        .collect();
    Ok(SourceManifest::new(entries)?)
}

#[derive(Debug)]
struct LoadError(anyhow::Error);

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for LoadError {}

fn load(entry: &SourceEntry) -> Result<ImageBuffer, LoadError> {
    imageio::load_rgb(Path::new(&entry.path)).map_err(LoadError)
}

pub fn cmd_build_dataset(global: &GlobalArgs, args: &BuildDatasetArgs) -> anyhow::Result<Outcome> {
    let recipe = resolve_recipe(&args.recipe, args.d4_metfaces_only)?;
    let text = std::fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest = SourceManifest::from_jsonl(&text)?;
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let manifest = resolve_sources(manifest, base)?;

    let options = MaterializeOptions {
        keep_pixels: args.write_patches,
    };
    let output = match materialize(&recipe, &manifest, global.seed(), options, load) {
        Ok(o) => o,
        Err(e @ (RecipeError::Load { .. } | RecipeError::Patch { .. } | RecipeError::Augment { .. })) => {
            return Err(anyhow::Error::new(DataFailure(e.to_string())));
        }
        Err(e) => return Err(e.into()),
    };

    std::fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    std::fs::write(args.output.join(DATASET_FILE), output.to_jsonl())?;
    let training = TrainingConfigMetadata {
        patch_size: recipe.patch_size,
        ..TrainingConfigMetadata::default()
    };
    let mut sidecar = serde_json::to_string_pretty(&training)?;
    sidecar.push('\n');
    std::fs::write(args.output.join(TRAINING_CONFIG_FILE), sidecar)?;

    if args.write_patches {
        let dir = args.output.join(PATCH_DIR);
        std::fs::create_dir_all(&dir)?;
        for (i, patch) in output.patches.iter().enumerate() {
            if let Some(pixels) = &patch.pixels {
                imageio::save_png(pixels, &dir.join(format!("{i:06}.png")))?;
            }
        }
    }
    log::info!("{} rows written to {}", output.len(), args.output.display());
    Ok(Outcome::Success)
}
