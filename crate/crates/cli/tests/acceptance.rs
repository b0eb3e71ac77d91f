//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use synthdetect::aggregation::{aggregate_scores, fuse_ensemble};
use synthdetect::augmentation::{apply_pipeline, jpeg_roundtrip, AugmentationConfig, OpKind};
use synthdetect::evaluation::{compute_auc, simulate_policy_comparison, LabeledScore, SimulationSpec};
use synthdetect::patching::sample_regions;
use synthdetect::recipes::{
    builtin_recipe, materialize, validate_orthogonality, Category, DatasetRecipe, Generator,
    MaterializeOptions, Orthogonality, PatchOrder, RecipeId, SourceEntry, SourceManifest,
};
use synthdetect::seed::{stream, stream_from};
use synthdetect::{AggregationPolicy, ImageBuffer, Label, SamplingPolicy};

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<String, String>) -> (bool, String) {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    match result {
        Ok(detail) if elapsed <= limit => (true, format!("{detail}; {elapsed:.2?}")),
        Ok(detail) => (false, format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
        Err(e) => (false, format!("{e}; {elapsed:.2?}")),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// All-negative test, then min or max.
fn proposed_oracle(v: &[f64]) -> f64 {
    if v.iter().all(|s| *s < 0.0) {
        v.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn aggregation_oracle() -> Result<String, String> {
    let mut rng = stream_from(1);
    for i in 0..1000 {
        let len = rng.random_range(1..=256);
        let bias = rng.random_range(-3.0..1.0);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0) + bias).collect();
        let got = aggregate_scores(&v, AggregationPolicy::Proposed).map_err(|e| e.to_string())?;
        let want = proposed_oracle(&v);
        ensure(got.to_bits() == want.to_bits(), || {
            format!("vector {i}: got {got}, oracle {want}")
        })?;
    }
    Ok("1000 vectors exact".into())
}

// O(n^2) Mann-Whitney pair counting.
fn brute_auc(samples: &[LabeledScore]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for s in samples.iter().filter(|s| s.truth == Label::Synthetic) {
        for r in samples.iter().filter(|r| r.truth == Label::Real) {
            pairs += 1.0;
            wins += if s.score > r.score {
                1.0
            } else if s.score == r.score {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn auc_oracle() -> Result<String, String> {
    let mut rng = stream_from(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(2..=500);
        // Coarse quantization forces ties.
        let levels = rng.random_range(3..40) as f64;
        let mut samples: Vec<LabeledScore> = (0..n)
            .map(|_| {
                let truth = if rng.random_bool(0.5) { Label::Synthetic } else { Label::Real };
                let shift = if truth == Label::Synthetic { 0.3 } else { 0.0 };
                let score = ((rng.random::<f64>() + shift) * levels).round() / levels;
                LabeledScore::new(score, truth)
            })
            .collect();
        samples[0].truth = Label::Real;
        samples[1].truth = Label::Synthetic;
        let got = compute_auc(&samples).map_err(|e| e.to_string())?.auc;
        let want = brute_auc(&samples);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || format!("set {i}: {got} vs {want}"))?;
    }
    Ok(format!("100 sets, max |diff| {worst:e}"))
}

fn test_image(width: u32, height: u32, key: u32) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, |x, y| {
        let v = (x.wrapping_mul(31) ^ y.wrapping_mul(17)).wrapping_add(key * 13);
        [v as u8, (v >> 3) as u8, (x + y + key) as u8]
    })
    .expect("non-empty image")
}

fn small_manifest() -> SourceManifest {
    let mut entries = Vec::new();
    for (c, category) in Category::ALL.into_iter().enumerate() {
        for i in 0..2 {
            entries.push(SourceEntry {
                path: format!("{category:?}/real_{i}.png"),
                label: Label::Real,
                generator: Generator::None,
                category,
            });
            entries.push(SourceEntry {
                path: format!("{category:?}/fake_{i}.png"),
                label: Label::Synthetic,
                generator: Generator::SYNTHETIC[(c + i) % Generator::SYNTHETIC.len()],
                category,
            });
        }
    }
    SourceManifest::new(entries).expect("valid manifest")
}

fn load_fixture(entry: &SourceEntry) -> Result<ImageBuffer, std::io::Error> {
    let key = entry.path.bytes().map(u32::from).sum();
    Ok(test_image(300, 260, key))
}

fn grid_alignment() -> Result<String, String> {
    let mut checked = 0;
    for (w, h) in [(128, 128), (256, 256), (301, 517), (1024, 768)] {
        for seed in 0..20 {
            let policy = SamplingPolicy::grid_aligned(40, seed);
            let regions = sample_regions(w, h, &policy).map_err(|e| e.to_string())?;
            for r in &regions {
                ensure(r.x % 8 == 0 && r.y % 8 == 0, || format!("{w}x{h} seed {seed}: {r:?}"))?;
            }
            checked += regions.len();
        }
    }
    let d2 = builtin_recipe(RecipeId::D2);
    let out = materialize(&d2, &small_manifest(), 11, MaterializeOptions::default(), load_fixture)
        .map_err(|e| e.to_string())?;
    ensure(!out.is_empty(), || "D2 produced no rows".into())?;
    for row in out.rows() {
        ensure(row.region.x % 8 == 0 && row.region.y % 8 == 0, || {
            format!("D2 row {} misaligned: {:?}", row.source, row.region)
        })?;
    }
    let random = sample_regions(1024, 1024, &SamplingPolicy::random(200, 7)).map_err(|e| e.to_string())?;
    let misaligned = random.iter().filter(|r| r.x % 8 != 0 || r.y % 8 != 0).count();
    ensure(misaligned >= 1, || "seeded random draw is fully aligned".into())?;
    Ok(format!(
        "{checked} grid regions, {} D2 rows aligned; random draw has {misaligned}/200 misaligned",
        out.len()
    ))
}

fn augmentation_frequencies() -> Result<String, String> {
    const RUNS: usize = 20_000;
    let config = AugmentationConfig::default();
    let image = test_image(64, 64, 5);
    let mut counts = [0usize; OpKind::PIPELINE.len()];
    for i in 0..RUNS {
        let mut rng = stream(config.seed, &format!("run/{i}"));
        let (_, log) = apply_pipeline(&image, &config, &mut rng).map_err(|e| e.to_string())?;
        for (k, op) in OpKind::PIPELINE.iter().enumerate() {
            if log.was_applied(*op) {
                counts[k] += 1;
            }
        }
    }
    let mut report = Vec::new();
    for (k, op) in OpKind::PIPELINE.iter().enumerate() {
        let rate = counts[k] as f64 / RUNS as f64;
        let (lo, hi) = if *op == OpKind::Jpeg { (0.68, 0.72) } else { (0.48, 0.52) };
        ensure((lo..=hi).contains(&rate), || format!("{} rate {rate} outside [{lo}, {hi}]", op.name()))?;
        report.push(format!("{}={rate:.3}", op.name()));
    }
    Ok(report.join(" "))
}

fn policy_simulation() -> Result<String, String> {
    let spec = SimulationSpec::default();
    let ks = [1, 5, 10, 25];
    let mut policies = vec![AggregationPolicy::Proposed, AggregationPolicy::Mean, AggregationPolicy::Median];
    policies.extend(ks.iter().map(|&k| AggregationPolicy::KThreshold(k)));
    let rows = simulate_policy_comparison(&spec, &policies).map_err(|e| e.to_string())?;
    let (proposed, mean, median) = (rows[0].auc, rows[1].auc, rows[2].auc);
    let detail = format!("auc proposed {proposed:.6} mean {mean:.6} median {median:.6}");
    ensure(proposed > mean, || format!("{detail}: proposed not above mean"))?;
    ensure(proposed > median, || format!("{detail}: proposed not above median"))?;
    let sweep = &rows[3..];
    for w in sweep.windows(2) {
        ensure(w[1].fpr <= w[0].fpr, || {
            format!("fpr rises from {} ({}) to {} ({})", w[0].policy, w[0].fpr, w[1].policy, w[1].fpr)
        })?;
        ensure(1.0 - w[1].tpr >= 1.0 - w[0].tpr, || {
            format!("missed detections fall from {} to {}", w[0].policy, w[1].policy)
        })?;
    }
    let fprs: Vec<String> = sweep.iter().map(|r| format!("{}", r.fpr)).collect();
    let misses: Vec<String> = sweep.iter().map(|r| format!("{:.3}", 1.0 - r.tpr)).collect();
    Ok(format!("{detail}; k sweep fpr [{}] missed [{}]", fprs.join(", "), misses.join(", ")))
}

fn fusion_exactness() -> Result<String, String> {
    let mut rng = stream_from(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let fused = fuse_ensemble(&v).map_err(|e| e.to_string())?;
        let mean = v.iter().sum::<f64>() / n as f64;
        let scale = v.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let err = (fused - mean).abs() / scale;
        worst = worst.max(err);
        ensure(err <= 4.0 * f64::EPSILON, || format!("{v:?}: fused {fused} vs mean {mean}"))?;
        let single = fuse_ensemble(&v[..1]).map_err(|e| e.to_string())?;
        ensure(single.to_bits() == v[0].to_bits(), || format!("single {single} vs {}", v[0]))?;
    }
    Ok(format!("1000 ensembles, max relative error {worst:e}; single scorer identity"))
}

fn write_detect_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    for i in 0..10u32 {
        let rgb: image::RgbImage = test_image(160 + 8 * i, 144 + 4 * i, i).into();
        rgb.save(images.join(format!("img_{i:02}.png"))).unwrap();
    }
    let config = dir.join("ensemble.json");
    std::fs::write(
        &config,
        r#"{"patch_size": 32, "scorers": [
            {"id": "luma", "backend": {"analytic": {"kind": "luma_threshold", "pivot": 0.5, "gain": 4.0}},
             "sampling": {"mode": "random", "count": 20}},
            {"id": "planted", "backend": {"analytic": {"kind": "planted_signal",
             "template": {"seeded": {"size": 32, "seed": 5}}, "gain": 3.0}},
             "sampling": {"count": 12}, "policy": "k=3"},
            {"id": "flat", "backend": {"analytic": {"kind": "constant_score", "value": -0.25}},
             "policy": "median"}
        ]}"#,
    )
    .unwrap();
    (images, config)
}

fn run_detect(images: &Path, config: &Path, workers: usize, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_synthdetect"))
        .args(["--seed", "2022", "--workers", &workers.to_string(), "detect"])
        .arg(images)
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("detect exited with {status}"))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn end_to_end_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (images, config) = write_detect_fixture(dir.path());
    let a = run_detect(&images, &config, 1, &dir.path().join("a.jsonl"))?;
    let b = run_detect(&images, &config, 1, &dir.path().join("b.jsonl"))?;
    let c = run_detect(&images, &config, 8, &dir.path().join("c.jsonl"))?;
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    ensure(lines == 10, || format!("expected 10 verdicts, got {lines}"))?;
    ensure(a == b, || "two runs differ".into())?;
    ensure(a == c, || "workers 1 and 8 differ".into())?;
    Ok(format!("10 verdicts, {} bytes identical across runs and worker counts", a.len()))
}

fn mse(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let n = a.as_raw().len() as f64;
    a.as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / n
}

fn jpeg_monotonicity() -> Result<String, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/astronaut.png");
    let rgb = image::open(&path).map_err(|e| e.to_string())?.to_rgb8();
    let img = ImageBuffer::try_from(rgb).map_err(|e| e.to_string())?;
    let q30 = mse(&img, &jpeg_roundtrip(&img, 30).map_err(|e| e.to_string())?);
    let q90 = mse(&img, &jpeg_roundtrip(&img, 90).map_err(|e| e.to_string())?);
    ensure(q30 > q90, || format!("MSE q30 {q30} <= q90 {q90}"))?;
    Ok(format!("MSE q30 {q30:.2} > q90 {q90:.2}"))
}

fn recipe_fidelity() -> Result<String, String> {
    use Category::*;
    use Generator::*;
    type Row = (RecipeId, &'static [Category], &'static [Generator], PatchOrder, usize, bool);
    let all_gens: &[Generator] = &[StyleGan2, StarGanV2, Taming, FaceVid2Vid, ScoreBased];
    let table: [Row; 5] = [
        (RecipeId::D1, &[Ffhq, Metfaces, Afhq2], all_gens, PatchOrder::AugmentThenCrop, 1, true),
        (RecipeId::D2, &[Ffhq, Metfaces, Afhq2], all_gens, PatchOrder::CropThenAugment, 1, true),
        (RecipeId::D3, &[Afhq2], &[StyleGan2, StarGanV2], PatchOrder::CropThenAugment, 10, false),
        (RecipeId::D4, &[Metfaces, Afhq2], &[StyleGan2, StarGanV2], PatchOrder::CropThenAugment, 10, false),
        (
            RecipeId::D5,
            &[Ffhq],
            &[StyleGan2, Taming, FaceVid2Vid, ScoreBased],
            PatchOrder::CropThenAugment,
            1,
            true,
        ),
    ];
    for (id, cats, gens, order, per_image, jpeg) in table {
        let r: DatasetRecipe = builtin_recipe(id);
        ensure(r.id == id, || format!("{id}: id {}", r.id))?;
        ensure(r.categories == cats.iter().copied().collect(), || format!("{id}: categories {:?}", r.categories))?;
        ensure(r.generators == gens.iter().copied().collect(), || format!("{id}: generators {:?}", r.generators))?;
        ensure(r.order == order, || format!("{id}: order {:?}", r.order))?;
        ensure(r.patches_per_image == per_image, || format!("{id}: {} patches", r.patches_per_image))?;
        ensure(r.jpeg_enabled == jpeg, || format!("{id}: jpeg {}", r.jpeg_enabled))?;
        ensure(r.patch_size == 128, || format!("{id}: patch size {}", r.patch_size))?;
        let aug = r.effective_augmentation();
        let want_jpeg = if jpeg { 0.7 } else { 0.0 };
        ensure(aug.probabilities.get(OpKind::Jpeg) == want_jpeg, || format!("{id}: jpeg probability"))?;
    }
    let reports = validate_orthogonality(&[builtin_recipe(RecipeId::D1), builtin_recipe(RecipeId::D2)]);
    ensure(reports.len() == 1, || format!("{} reports", reports.len()))?;
    let r = &reports[0];
    ensure(r.holds(Orthogonality::PostProcessing), || format!("(D1, D2) holds {:?}", r.holds))?;
    ensure(!r.holds(Orthogonality::Semantic), || "(D1, D2) reported semantic".into())?;
    Ok(format!("D1..D5 match; (D1, D2) holds {:?}", r.holds))
}

fn main() {
    let criteria: [(&'static str, Duration, fn() -> Result<String, String>); 9] = [
        ("aggregation oracle equivalence", Duration::from_secs(1), aggregation_oracle),
        ("auc oracle equivalence", Duration::from_secs(5), auc_oracle),
        ("grid alignment", Duration::MAX, grid_alignment),
        ("augmentation frequencies", Duration::from_secs(60), augmentation_frequencies),
        ("policy simulation", Duration::from_secs(30), policy_simulation),
        ("ensemble fusion exactness", Duration::MAX, fusion_exactness),
        ("end-to-end determinism", Duration::MAX, end_to_end_determinism),
        ("jpeg monotonicity", Duration::MAX, jpeg_monotonicity),
        ("recipe fidelity", Duration::MAX, recipe_fidelity),
    ];
    let checks: Vec<Check> = criteria
        .into_iter()
        .map(|(name, limit, f)| {
            let (passed, detail) = timed(limit, f);
            Check { name, passed, detail }
        })
        .collect();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
