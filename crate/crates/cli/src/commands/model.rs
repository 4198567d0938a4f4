use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;
use smartex_core::dataflow::{preset, validate};
use smartex_core::perfmodel::{evaluate, evaluate_se, CSV_HEADER, PERF_SCHEMA_VERSION};
use smartex_core::workload::layer_macs;
use smartex_core::{Dataflow, HardwareConfig, PerfReport, Style};

use super::{attach_stats, finish, load_hardware_from, load_workload_from, write_csv, write_json};
use crate::args::ModelArgs;
use crate::files::Inputs;
use crate::manifest::RunManifest;
use crate::CliError;

pub const SUMMARY_CSV_HEADER: &str = "layer,energy_pj,latency_cycles,edp,dram_bits,throughput_gops";
const SUMMARY_SE_COLUMNS: &str =
    "se_energy_pj,se_latency_cycles,se_edp,se_dram_bits,se_throughput_gops,dram_ratio,energy_ratio,edp_ratio";
pub const BREAKDOWN_CSV_HEADER: &str = "variant,layer,level,type,n_ref,v_ref,words,bits,energy_pj";

/// Headline numbers of one layer or of the whole workload.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub energy_pj: f64,
    pub latency_cycles: f64,
    /// Per layer, energy times latency; for totals, the sum over layers.
    pub edp: f64,
    pub dram_bits: f64,
    pub throughput_gops: f64,
}

impl Summary {
    fn of(r: &PerfReport) -> Self {
        Summary {
            energy_pj: r.energy.total,
            latency_cycles: r.latency.total,
            edp: r.edp,
            dram_bits: r.counts.dram_bits(),
            throughput_gops: r.throughput_gops,
        }
    }

    fn total<'a>(reports: impl Iterator<Item = &'a PerfReport>, hw: &HardwareConfig) -> Self {
        let mut s = Summary::default();
        let mut macs = 0u64;
        for r in reports {
            s.energy_pj += r.energy.total;
            s.latency_cycles += r.latency.total;
            s.edp += r.edp;
            s.dram_bits += r.counts.dram_bits();
            macs += r.counts.n_mac;
        }
        s.throughput_gops = 2.0 * macs as f64 * hw.freq_hz / s.latency_cycles.max(1.0) / 1e9;
        s
    }

    fn cells(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.energy_pj, self.latency_cycles, self.edp, self.dram_bits, self.throughput_gops
        )
    }
}

/// Dense over decomposed: values above 1 mean the decomposed form is cheaper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub dram: f64,
    pub energy: f64,
    pub edp: f64,
}

impl Ratios {
    fn of(dense: &Summary, se: &Summary) -> Self {
        Ratios {
            dram: dense.dram_bits / se.dram_bits,
            energy: dense.energy_pj / se.energy_pj,
            edp: dense.edp / se.edp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerModel {
    pub layer: String,
    pub dense: PerfReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<PerfReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Ratios>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTotals {
    pub dense: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Ratios>,
}

/// `report.json` as written by `model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub workload: String,
    pub hardware: String,
    pub layers: Vec<LayerModel>,
    pub totals: ModelTotals,
}

pub fn run(a: ModelArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs = Inputs::default();
    let mut workload = load_workload_from(&a.workload, &mut inputs)?;
    let hw = load_hardware_from(&a.hardware, &mut inputs)?;
    if let Some(path) = &a.stats {
        attach_stats(&mut workload, path, &mut inputs)?;
    }
    let explicit: Option<Dataflow> = match &a.dataflow {
        Some(text) => {
            if workload.layers.len() != 1 {
                return Err(CliError::usage(format!(
                    "--dataflow needs a single-layer workload; `{}` has {} layers",
                    workload.name,
                    workload.layers.len()
                )));
            }
            Some(text.parse()?)
        }
        None => None,
    };
    let style_tag = a.style.clone().unwrap_or_else(|| "os".into());
    let style = Style::from_tag(&style_tag)
        .ok_or_else(|| CliError::usage(format!("unknown style `{style_tag}`")))?;

    let mut layers = Vec::with_capacity(workload.layers.len());
    for (k, layer) in workload.layers.iter().enumerate() {
        let df = match &explicit {
            Some(df) => df.clone(),
            None => preset(style, layer, &hw)?,
        };
        let issues = validate(&df, layer, &hw);
        if !issues.is_empty() {
            return Err(CliError::invalid(format!(
                "layer `{}`: dataflow `{df}` is not legal: {}",
                layer.name,
                issues.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
            )));
        }
        let dense = evaluate(&df, layer, &hw)?;
        let stats = workload.stats.as_ref().and_then(|s| s[k].as_ref());
        let se = match stats {
            Some(s) => Some(evaluate_se(&df, layer, &hw, s, a.skip_fraction)?),
            None => None,
        };
        let ratios = se.as_ref().map(|se| Ratios::of(&Summary::of(&dense), &Summary::of(se)));
        debug_assert_eq!(dense.counts.n_mac, layer_macs(layer));
        layers.push(LayerModel {
            layer: layer.name.clone(),
            dense,
            se,
            ratios,
        });
    }
    let dense_total = Summary::total(layers.iter().map(|l| &l.dense), &hw);
    let se_total = if layers.iter().any(|l| l.se.is_some()) {
        Some(Summary::total(
            layers.iter().map(|l| l.se.as_ref().unwrap_or(&l.dense)),
            &hw,
        ))
    } else {
        None
    };
    let totals = ModelTotals {
        ratios: se_total.as_ref().map(|s| Ratios::of(&dense_total, s)),
        dense: dense_total,
        se: se_total,
    };

    let manifest = RunManifest::new(
        "model",
        inputs.records,
        json!({
            "workload": workload.name,
            "hardware": hw.name,
            "style": if explicit.is_some() { "custom".to_string() } else { style.tag().to_string() },
            "dataflow": a.dataflow,
            "skip_fraction": a.skip_fraction,
            "se_stats": workload.stats.is_some(),
        }),
    );
    let mut written = Vec::new();
    let mut breakdown = Vec::new();
    let mut summary = Vec::new();
    for l in &layers {
        breakdown.extend(l.dense.csv_rows().into_iter().map(|r| format!("dense,{r}")));
        if let Some(se) = &l.se {
            breakdown.extend(se.csv_rows().into_iter().map(|r| format!("se,{r}")));
        }
    }
    let with_se = totals.se.is_some();
    let row = |name: &str, dense: &Summary, se: Option<&Summary>, ratios: Option<&Ratios>| {
        let mut s = format!("{name},{}", dense.cells());
        if with_se {
            match (se, ratios) {
                (Some(se), Some(r)) => s.push_str(&format!(",{},{},{},{}", se.cells(), r.dram, r.energy, r.edp)),
                _ => s.push_str(&",".repeat(8)),
            }
        }
        s
    };
    for l in &layers {
        let se = l.se.as_ref().map(Summary::of);
        summary.push(row(&l.layer, &Summary::of(&l.dense), se.as_ref(), l.ratios.as_ref()));
    }
    summary.push(row("TOTAL", &totals.dense, totals.se.as_ref(), totals.ratios.as_ref()));
    let summary_header = if with_se {
        format!("{SUMMARY_CSV_HEADER},{SUMMARY_SE_COLUMNS}")
    } else {
        SUMMARY_CSV_HEADER.to_string()
    };
    debug_assert!(BREAKDOWN_CSV_HEADER.ends_with(CSV_HEADER));
    write_csv(&a.out, "breakdown.csv", BREAKDOWN_CSV_HEADER, &breakdown, &mut written)?;
    write_csv(&a.out, "summary.csv", &summary_header, &summary, &mut written)?;
    let doc = ModelDoc {
        schema_version: PERF_SCHEMA_VERSION,
        manifest: manifest.clone(),
        workload: workload.name.clone(),
        hardware: hw.name.clone(),
        layers,
        totals,
    };
    write_json(&a.out, "report.json", &doc, &mut written)?;
    let _ = writeln!(
        out,
        "modelled {} layers: energy {:.4e} pJ, latency {:.4e} cycles",
        doc.layers.len(),
        doc.totals.dense.energy_pj,
        doc.totals.dense.latency_cycles
    );
    finish(&a.out, &manifest, written, out)
}
