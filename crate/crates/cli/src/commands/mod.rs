pub mod compress;
pub mod convert;
pub mod dse;
pub mod model;
pub mod presets;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smartex_core::dataflow::{hardware_preset, load_hardware};
use smartex_core::sxform::{LayerCompression, SEFORM_SCHEMA_VERSION};
use smartex_core::workload::{load_workload, workload_preset};
use smartex_core::{HardwareConfig, Workload};

use crate::args::{Cli, Command, HardwareSource, WorkloadSource};
use crate::files::{sha256_hex, write_atomic, Inputs};
use crate::manifest::RunManifest;
use crate::CliError;

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compress(a) => compress::run(a, out),
        Command::Model(a) => model::run(a, out),
        Command::Dse(a) => dse::run(a, out),
        Command::Convert(a) => convert::run(a, out),
        Command::Presets(a) => presets::run(a, out),
    }
}

/// One layer's decomposed weights as written by `compress`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormDoc {
    pub schema_version: u32,
    pub compression: LayerCompression,
}

impl FormDoc {
    pub fn new(compression: LayerCompression) -> Self {
        FormDoc {
            schema_version: SEFORM_SCHEMA_VERSION,
            compression,
        }
    }
}

pub(crate) fn load_workload_from(src: &WorkloadSource, inputs: &mut Inputs) -> Result<Workload, CliError> {
    match (&src.workload, &src.preset) {
        (Some(path), _) => {
            let text = inputs.read_text(path)?;
            load_workload(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => {
            let w = workload_preset(name)?;
            inputs.preset(name, &w.to_json());
            Ok(w)
        }
        (None, None) => Err(CliError::usage("one of --workload or --preset is required")),
    }
}

pub(crate) fn load_hardware_from(
    src: &HardwareSource,
    inputs: &mut Inputs,
) -> Result<HardwareConfig, CliError> {
    match (&src.hw, &src.hw_preset) {
        (Some(path), _) => {
            let text = inputs.read_text(path)?;
            load_hardware(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => {
            let hw = hardware_preset(name)?;
            inputs.preset(name, &hw.to_json());
            Ok(hw)
        }
        (None, None) => Err(CliError::usage("one of --hw or --hw-preset is required")),
    }
}

/// Reads a `compress` stats document and attaches its per-layer statistics
/// to the workload.
pub(crate) fn attach_stats(w: &mut Workload, path: &Path, inputs: &mut Inputs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc: compress::StatsDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    doc.manifest.timestamp.clear();
    let canonical = serde_json::to_string_pretty(&doc).expect("documents serialize");
    inputs.record(path, sha256_hex(canonical.as_bytes()));
    let mut slots = vec![None; w.layers.len()];
    for row in doc.layers {
        let k = w
            .layers
            .iter()
            .position(|l| l.name == row.layer)
            .ok_or_else(|| {
                CliError::invalid(format!(
                    "{}: layer `{}` is not in workload `{}`",
                    path.display(),
                    row.layer,
                    w.name
                ))
            })?;
        slots[k] = Some(row.stats);
    }
    w.stats = Some(slots);
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    written: &mut Vec<String>,
) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    write_file(dir, name, text.as_bytes(), written)
}

pub(crate) fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: &[String],
    written: &mut Vec<String>,
) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(dir, name, text.as_bytes(), written)
}

pub(crate) fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    written: &mut Vec<String>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    written.push(path.display().to_string());
    Ok(())
}

pub(crate) fn finish(
    dir: &Path,
    manifest: &RunManifest,
    mut written: Vec<String>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    write_json(dir, "manifest.json", manifest, &mut written)?;
    for w in &written {
        let _ = writeln!(out, "wrote {w}");
    }
    Ok(())
}
