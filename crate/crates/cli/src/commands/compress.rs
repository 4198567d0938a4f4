use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use smartex_core::sxform::{compress_layer, merge_stats, weight_dims, BitWidths, SEFORM_SCHEMA_VERSION};
use smartex_core::tensor::WeightTensor;
use smartex_core::{SeParams, StorageStats};

use super::{finish, load_workload_from, write_csv, write_file, write_json, FormDoc};
use crate::args::CompressArgs;
use crate::files::{file_stem, Inputs};
use crate::manifest::RunManifest;
use crate::CliError;

pub const STATS_CSV_HEADER: &str =
    "layer,cr,row_sparsity,bits_dense,bits_compressed,bits_basis,bits_ce,bits_index,rel_error,iterations";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStatsRow {
    pub layer: String,
    pub stats: StorageStats,
    pub rel_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalRow {
    pub stats: StorageStats,
    /// Relative Frobenius error over all layers' weights together.
    pub rel_error: f64,
}

/// `stats.json` as written by `compress`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub workload: String,
    pub layers: Vec<LayerStatsRow>,
    pub total: TotalRow,
}

fn params_from(a: &CompressArgs) -> SeParams {
    let d = SeParams::default();
    SeParams {
        rank: a.rank.or(d.rank),
        n_p: a.n_p.unwrap_or(d.n_p),
        theta_v: a.theta_v.unwrap_or(d.theta_v),
        theta_c: a.theta_c.unwrap_or(d.theta_c),
        tol: a.tol.unwrap_or(d.tol),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        slice_rows: a.slice_rows.unwrap_or(d.slice_rows),
        fc_cols: a.fc_cols.unwrap_or(d.fc_cols),
    }
}

fn csv_row(layer: &str, s: &StorageStats, rel_error: f64, iterations: Option<usize>) -> String {
    format!(
        "{layer},{},{},{},{},{},{},{},{},{}",
        s.cr,
        s.sparsity,
        s.bits_dense,
        s.compressed_bits(),
        s.bits_basis,
        s.bits_ce,
        s.bits_index,
        rel_error,
        iterations.map(|i| i.to_string()).unwrap_or_default()
    )
}

pub fn run(a: CompressArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs = Inputs::default();
    let mut workload = load_workload_from(&a.workload, &mut inputs)?;
    let params = params_from(&a);
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);

    let mut written = Vec::new();
    let mut rows = Vec::new();
    let (mut err2, mut ref2) = (0.0f64, 0.0f64);
    for layer in &workload.layers {
        let weights = match &a.weights {
            Some(dir) => {
                let path = dir.join(format!("{}.setn", file_stem(&layer.name)));
                let bytes = inputs.read(&path)?;
                WeightTensor::read_setn(bytes.as_slice())
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
            }
            None => {
                let dims = weight_dims(layer);
                let n: usize = dims.iter().product();
                WeightTensor::new(dims, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect())?
            }
        };
        let bits = BitWidths {
            bits_ref: a.bits_ref.unwrap_or(layer.bits_w),
            bits_ce: a.bits_ce,
            bits_basis: a.bits_basis,
        };
        let lc = compress_layer(&weights, layer, &params, bits, &[])?;
        let norm2: f64 = weights.data().iter().map(|&v| (v as f64) * (v as f64)).sum();
        if norm2 > 0.0 {
            err2 += lc.rel_error * lc.rel_error * norm2;
            ref2 += norm2;
        } else {
            err2 += lc.rel_error * lc.rel_error;
        }
        rows.push(LayerStatsRow {
            layer: layer.name.clone(),
            stats: lc.stats.clone(),
            rel_error: lc.rel_error,
            iterations: lc.iterations,
        });
        if !a.stats_only {
            let name = format!("forms/{}.json", file_stem(&layer.name));
            let mut text = serde_json::to_string(&FormDoc::new(lc)).expect("forms serialize");
            text.push('\n');
            write_file(&a.out, &name, text.as_bytes(), &mut written)?;
        }
    }
    let parts: Vec<StorageStats> = rows.iter().map(|r| r.stats.clone()).collect();
    let total = TotalRow {
        stats: merge_stats(&parts).expect("workloads have layers"),
        rel_error: if ref2 > 0.0 { (err2 / ref2).sqrt() } else { err2.sqrt() },
    };

    let manifest = RunManifest::new(
        "compress",
        inputs.records,
        json!({
            "workload": workload.name,
            "weights": if a.weights.is_some() { "files" } else { "random" },
            "seed": a.seed,
            "se_params": params,
            "bits_ref": a.bits_ref,
            "bits_ce": a.bits_ce,
            "bits_basis": a.bits_basis,
            "stats_only": a.stats_only,
        }),
    );
    let mut csv: Vec<String> = rows
        .iter()
        .map(|r| csv_row(&r.layer, &r.stats, r.rel_error, Some(r.iterations)))
        .collect();
    csv.push(csv_row("TOTAL", &total.stats, total.rel_error, None));
    write_csv(&a.out, "stats.csv", STATS_CSV_HEADER, &csv, &mut written)?;

    workload.stats = Some(rows.iter().map(|r| Some(r.stats.clone())).collect());
    let mut wl = workload.to_json();
    wl.push('\n');
    write_file(&a.out, "workload.json", wl.as_bytes(), &mut written)?;

    let doc = StatsDoc {
        schema_version: SEFORM_SCHEMA_VERSION,
        manifest: manifest.clone(),
        workload: workload.name.clone(),
        layers: rows,
        total,
    };
    write_json(&a.out, "stats.json", &doc, &mut written)?;
    let _ = writeln!(
        out,
        "compressed {} layers: cr {:.3}, row sparsity {:.3}, error {:.3e}",
        doc.layers.len(),
        doc.total.stats.cr,
        doc.total.stats.sparsity,
        doc.total.rel_error
    );
    finish(&a.out, &manifest, written, out)
}
