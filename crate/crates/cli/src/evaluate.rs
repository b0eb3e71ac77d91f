use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use serde_json::Value;
use synthdetect::evaluation::{
    compute_auc, confusion_at, histogram, Confusion, Histogram, LabeledScore, RocResult,
};
use synthdetect::Label;

use crate::{write_output, Outcome};

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// JSON-lines rows with `score` (or `fused_score`) and optionally
    /// `label` and `image`; `detect` output is accepted as is.
    pub scores: PathBuf,
    /// JSON-lines rows with `image` and `label`, joined on `image`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Row field whose value names the group of each row.
    #[arg(long)]
    pub group_by: Option<String>,
    /// Threshold for the reported confusion counts.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Metrics JSON (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the global ROC curve as CSV.
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
    /// Write the global score histogram as CSV.
    #[arg(long)]
    pub histogram_csv: Option<PathBuf>,
    #[arg(long, default_value_t = Histogram::DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsBlock {
    pub count: usize,
    pub real: usize,
    pub synthetic: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub skipped_rows: usize,
    pub global: MetricsBlock,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, MetricsBlock>,
}

/// Metrics for one set of samples. A single-class set is reported in
/// `error` rather than failing.
pub fn metrics_block(samples: &[LabeledScore], threshold: f64) -> MetricsBlock {
    let real = samples.iter().filter(|s| s.truth == Label::Real).count();
    let mut block = MetricsBlock {
        count: samples.len(),
        real,
        synthetic: samples.len() - real,
        roc: None,
        confusion: None,
        error: None,
    };
    match compute_auc(samples).and_then(|roc| Ok((roc, confusion_at(samples, threshold)?))) {
        Ok((roc, confusion)) => {
            block.roc = Some(roc);
            block.confusion = Some(confusion);
        }
        Err(e) => block.error = Some(e.to_string()),
    }
    block
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRows {
    pub samples: Vec<(Option<String>, LabeledScore)>,
    pub skipped: usize,
}

fn label_of(v: &Value) -> Option<Label> {
    match v {
        Value::String(s) => s.parse().ok(),
        Value::Number(n) => n.as_u64().and_then(|n| match n {
            0 => Some(Label::Real),
            1 => Some(Label::Synthetic),
            _ => None,
        }),
        Value::Bool(b) => Some(if *b { Label::Synthetic } else { Label::Real }),
        _ => None,
    }
}

fn group_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses score rows. Rows without a score (such as `detect` failure
/// records) are skipped and counted; a row with a score but no usable
/// label is an error.
pub fn parse_rows(
    text: &str,
    labels: Option<&HashMap<String, Label>>,
    group_by: Option<&str>,
) -> anyhow::Result<ParsedRows> {
    let mut samples = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: serde_json::Map<String, Value> =
            serde_json::from_str(line).with_context(|| format!("scores line {}", i + 1))?;
        let score = row
            .get("score")
            .or_else(|| row.get("fused_score"))
            .and_then(Value::as_f64);
        let Some(score) = score else {
            log::warn!("scores line {}: no score, skipped", i + 1);
            skipped += 1;
            continue;
        };
        if !score.is_finite() {
            bail!("scores line {}: non-finite score", i + 1);
        }
        let image = row.get("image").and_then(Value::as_str);
        let label = match row.get("label").and_then(label_of) {
            Some(l) if labels.is_none() => Some(l),
            embedded => labels
                .and_then(|m| image.and_then(|img| m.get(img)).copied())
                .or(embedded),
        };
        let Some(truth) = label else {
            bail!("scores line {}: no ground-truth label", i + 1);
        };
        let group = group_by.map(|g| row.get(g).map(group_of).unwrap_or_default());
        samples.push((group, LabeledScore::new(score, truth)));
    }
    Ok(ParsedRows { samples, skipped })
}

fn parse_labels(text: &str) -> anyhow::Result<HashMap<String, Label>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: serde_json::Map<String, Value> =
            serde_json::from_str(line).with_context(|| format!("labels line {}", i + 1))?;
        let image = row.get("image").and_then(Value::as_str);
        let label = row.get("label").and_then(label_of);
        match (image, label) {
            (Some(image), Some(label)) => {
                out.insert(image.to_owned(), label);
            }
            _ => bail!("labels line {}: need string `image` and a `label`", i + 1),
        }
    }
    Ok(out)
}

pub fn evaluate_rows(rows: &ParsedRows, threshold: f64) -> MetricsReport {
    let all: Vec<LabeledScore> = rows.samples.iter().map(|(_, s)| *s).collect();
    let mut grouped: BTreeMap<String, Vec<LabeledScore>> = BTreeMap::new();
    for (g, s) in &rows.samples {
        if let Some(g) = g {
            grouped.entry(g.clone()).or_default().push(*s);
        }
    }
    MetricsReport {
        threshold,
        skipped_rows: rows.skipped,
        global: metrics_block(&all, threshold),
        groups: grouped
            .into_iter()
            .map(|(g, s)| (g, metrics_block(&s, threshold)))
            .collect(),
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<Outcome> {
    if !args.threshold.is_finite() {
        bail!("--threshold must be finite");
    }
    if args.bins == 0 {
        bail!("--bins must be at least 1");
    }
    let labels = args
        .labels
        .as_ref()
        .map(|p| {
            std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .and_then(|t| parse_labels(&t))
        })
        .transpose()?;
    let text = std::fs::read_to_string(&args.scores)
        .with_context(|| format!("reading {}", args.scores.display()))?;
    let rows = parse_rows(&text, labels.as_ref(), args.group_by.as_deref())?;
    if rows.samples.is_empty() {
        bail!("{} contains no scored rows", args.scores.display());
    }
    let report = evaluate_rows(&rows, args.threshold);
    if let Some(e) = &report.global.error {
        log::warn!("global metrics unavailable: {e}");
    }
    for (g, block) in &report.groups {
        if let Some(e) = &block.error {
            log::warn!("group {g}: {e}");
        }
    }

    if let (Some(path), Some(roc)) = (&args.roc_csv, &report.global.roc) {
        write_output(Some(path), &roc.curve_csv())?;
    }
    if let Some(path) = &args.histogram_csv {
        let samples: Vec<LabeledScore> = rows.samples.iter().map(|(_, s)| *s).collect();
        let h: Histogram = histogram(&samples, args.bins);
        write_output(Some(path), &h.to_csv())?;
    }
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_output(args.output.as_ref(), &json)?;

    Ok(if rows.skipped > 0 {
        Outcome::Partial(rows.skipped)
    } else {
        Outcome::Success
    })
}
