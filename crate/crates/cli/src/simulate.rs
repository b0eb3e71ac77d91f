use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;
use synthdetect::evaluation::{policy_table_csv, simulate_policy_comparison, PolicyRow, SimulationSpec};
use synthdetect::AggregationPolicy;

use crate::{write_output, GlobalArgs, Outcome};

pub const DEFAULT_POLICIES: &str = "proposed,mean,median,k=1,k=5,k=10,k=25";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Simulation spec JSON; missing fields take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Comma-separated policies: proposed, mean, median, k=N.
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_POLICIES)]
    pub policies: Vec<AggregationPolicy>,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a> {
    spec: &'a SimulationSpec,
    rows: &'a [PolicyRow],
}

pub fn cmd_simulate(global: &GlobalArgs, args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SimulationSpec::default(),
    };
    if let Some(seed) = global.seed {
        spec.seed = seed;
    }
    let rows = simulate_policy_comparison(&spec, &args.policies)?;
    let text = match args.format {
        TableFormat::Csv => policy_table_csv(&rows),
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(&Report { spec: &spec, rows: &rows })?;
            s.push('\n');
            s
        }
    };
    write_output(args.output.as_ref(), &text)?;
    Ok(Outcome::Success)
}
