use synthdetect::augmentation::OpKind;
use synthdetect::recipes::{
    builtin_recipe, materialize, Category, DatasetOutput, DatasetRecipe, Generator,
    MaterializeOptions, RecipeError, RecipeId, SourceEntry, SourceManifest,
};
use synthdetect::{ImageBuffer, Label};

fn entry(path: &str, label: Label, generator: Generator, category: Category) -> SourceEntry {
    SourceEntry {
        path: path.into(),
        label,
        generator,
        category,
    }
}

fn afhq2_manifest() -> SourceManifest {
    let mut entries = Vec::new();
    for i in 0..3 {
        entries.push(entry(&format!("afhq2/real_{i}.png"), Label::Real, Generator::None, Category::Afhq2));
        let g = if i % 2 == 0 { Generator::StyleGan2 } else { Generator::StarGanV2 };
        entries.push(entry(&format!("afhq2/fake_{i}.png"), Label::Synthetic, g, Category::Afhq2));
    }
    SourceManifest::new(entries).unwrap()
}

fn mixed_manifest() -> SourceManifest {
    let mut entries = Vec::new();
    for (c, category) in Category::ALL.into_iter().enumerate() {
        for i in 0..3 {
            entries.push(entry(&format!("{c}/real_{i}.png"), Label::Real, Generator::None, category));
            let g = Generator::SYNTHETIC[(c + i) % Generator::SYNTHETIC.len()];
            entries.push(entry(&format!("{c}/fake_{i}.png"), Label::Synthetic, g, category));
        }
    }
    SourceManifest::new(entries).unwrap()
}

fn load(entry: &SourceEntry) -> Result<ImageBuffer, std::io::Error> {
    let k: u32 = entry.path.bytes().map(u32::from).sum();
    Ok(ImageBuffer::from_fn(256, 240, move |x, y| {
        [(x * 3 + k) as u8, (y * 5 + k) as u8, ((x ^ y) + k) as u8]
    })
    .expect("non-empty"))
}

fn run(recipe: &DatasetRecipe, manifest: &SourceManifest, seed: u64) -> DatasetOutput {
    materialize(recipe, manifest, seed, MaterializeOptions::default(), load).unwrap()
}

#[test]
fn d3_emits_ten_uncompressed_patches_per_image() {
    let out = run(&builtin_recipe(RecipeId::D3), &afhq2_manifest(), 1);
    assert_eq!(out.len(), 60);
    for row in out.rows() {
        assert!(!row.augmentation.was_applied(OpKind::Jpeg));
        assert!(row.region.aligned);
        assert_eq!(row.region.size, 128);
    }
}

#[test]
fn d3_on_ffhq_only_is_empty() {
    let manifest = SourceManifest::new(vec![
        entry("f/real.png", Label::Real, Generator::None, Category::Ffhq),
        entry("f/fake.png", Label::Synthetic, Generator::StyleGan2, Category::Ffhq),
    ])
    .unwrap();
    let err = materialize(&builtin_recipe(RecipeId::D3), &manifest, 0, MaterializeOptions::default(), load)
        .unwrap_err();
    assert!(matches!(err, RecipeError::EmptyAfterFilter(RecipeId::D3)), "{err}");
}

#[test]
fn materialization_is_deterministic() {
    for id in RecipeId::ALL {
        let recipe = builtin_recipe(id);
        let a = run(&recipe, &mixed_manifest(), 42).to_jsonl();
        let b = run(&recipe, &mixed_manifest(), 42).to_jsonl();
        assert_eq!(a, b, "{id}");
        let c = run(&recipe, &mixed_manifest(), 43).to_jsonl();
        assert_ne!(a, c, "{id}");
    }
}

#[test]
fn worker_count_does_not_matter() {
    let recipe = builtin_recipe(RecipeId::D1);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run(&recipe, &mixed_manifest(), 3).to_jsonl());
    let b = four.install(|| run(&recipe, &mixed_manifest(), 3).to_jsonl());
    assert_eq!(a, b);
}

#[test]
fn rows_keep_source_labels_and_order() {
    let manifest = mixed_manifest();
    let recipe = builtin_recipe(RecipeId::D4);
    let out = run(&recipe, &manifest, 5);
    let admitted: Vec<&SourceEntry> = manifest.entries().iter().filter(|e| recipe.admits(e)).collect();
    let mut rows = out.rows();
    for e in admitted {
        for p in 0..recipe.patches_per_image {
            let row = rows.next().unwrap();
            assert_eq!(row.source, e.path);
            assert_eq!(row.label, e.label);
            assert_eq!(row.category, e.category);
            assert_eq!(row.generator, e.generator);
            assert_eq!(row.patch_index, p);
        }
    }
    assert!(rows.next().is_none());
}

#[test]
fn augment_then_crop_breaks_alignment() {
    let recipe = builtin_recipe(RecipeId::D1);
    let manifest = mixed_manifest();
    let rows: Vec<_> = (0..10)
        .flat_map(|seed| run(&recipe, &manifest, seed).patches)
        .map(|p| p.row)
        .collect();
    assert!(rows.iter().all(|r| !r.region.aligned));
    assert!(rows.iter().any(|r| r.region.x % 8 != 0 || r.region.y % 8 != 0));
}

#[test]
fn kept_pixels_match_the_logged_augmentation() {
    let recipe = builtin_recipe(RecipeId::D2);
    let manifest = mixed_manifest();
    let out = materialize(&recipe, &manifest, 9, MaterializeOptions { keep_pixels: true }, load).unwrap();
    for p in &out.patches {
        let entry = manifest.entries().iter().find(|e| e.path == p.row.source).unwrap();
        let source = load(entry).unwrap();
        let crop = synthdetect::patching::crop(&source, &p.row.region).unwrap();
        let replayed = p.row.augmentation.replay(&crop).unwrap();
        assert_eq!(Some(&replayed), p.pixels.as_ref());
    }
}

#[test]
fn load_failures_name_the_entry() {
    let failing = |e: &SourceEntry| -> Result<ImageBuffer, std::io::Error> {
        if e.path.ends_with("fake_1.png") {
            Err(std::io::Error::other("corrupt"))
        } else {
            load(e)
        }
    };
    let err = materialize(
        &builtin_recipe(RecipeId::D2),
        &mixed_manifest(),
        0,
        MaterializeOptions::default(),
        failing,
    )
    .unwrap_err();
    match err {
        RecipeError::Load { path, .. } => assert!(path.ends_with("fake_1.png")),
        other => panic!("{other}"),
    }
}
