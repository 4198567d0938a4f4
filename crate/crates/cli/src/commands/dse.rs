use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;
use smartex_core::dse::{optimize_with, SearchOptions, DSE_CSV_HEADER, DSE_SCHEMA_VERSION};
use smartex_core::{DseResult, Metric, Objective, SearchMode};

use super::{attach_stats, finish, load_hardware_from, load_workload_from, write_csv, write_json};
use crate::args::{DseArgs, ModeArg, ObjectiveArg};
use crate::commands::model::BREAKDOWN_CSV_HEADER;
use crate::files::Inputs;
use crate::manifest::RunManifest;
use crate::CliError;

/// `dse.json` as written by `dse`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseDoc {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub result: DseResult,
}

pub fn run(a: DseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs = Inputs::default();
    let mut workload = load_workload_from(&a.workload, &mut inputs)?;
    let hw = load_hardware_from(&a.hardware, &mut inputs)?;
    if let Some(path) = &a.stats {
        attach_stats(&mut workload, path, &mut inputs)?;
    }
    let objective = Objective {
        metric: match a.objective {
            ObjectiveArg::Energy => Metric::Energy,
            ObjectiveArg::Latency => Metric::Latency,
            ObjectiveArg::Edp => Metric::Edp,
        },
        th_min: a.th_min,
        l_max: a.l_max,
        per_layer: a.per_layer,
    };
    let mode = match a.mode {
        ModeArg::Exhaustive => SearchMode::Exhaustive,
        ModeArg::Pruned => SearchMode::Pruned,
    };
    let mut options = SearchOptions {
        skip_fraction: a.skip_fraction,
        ..SearchOptions::default()
    };
    if let Some(m) = a.max_candidates {
        options.max_candidates = m;
    }
    let result = optimize_with(&workload, &hw, objective, mode, options)?;

    let manifest = RunManifest::new(
        "dse",
        inputs.records,
        json!({
            "workload": workload.name,
            "hardware": hw.name,
            "objective": objective,
            "mode": mode,
            "max_candidates": options.max_candidates,
            "skip_fraction": options.skip_fraction,
            "se_stats": workload.stats.is_some(),
        }),
    );
    let mut written = Vec::new();
    write_csv(&a.out, "dse.csv", DSE_CSV_HEADER, &result.csv_rows(), &mut written)?;
    let breakdown: Vec<String> = result
        .layers
        .iter()
        .flat_map(|c| c.report.csv_rows())
        .map(|r| format!("best,{r}"))
        .collect();
    write_csv(&a.out, "breakdown.csv", BREAKDOWN_CSV_HEADER, &breakdown, &mut written)?;
    for c in &result.layers {
        let _ = writeln!(out, "{}: {}", c.layer, c.dataflow);
    }
    if result.truncated {
        let _ = writeln!(out, "warning: candidate limit reached; results cover a truncated space");
    }
    let doc = DseDoc {
        schema_version: DSE_SCHEMA_VERSION,
        manifest: manifest.clone(),
        result,
    };
    write_json(&a.out, "dse.json", &doc, &mut written)?;
    finish(&a.out, &manifest, written, out)
}
