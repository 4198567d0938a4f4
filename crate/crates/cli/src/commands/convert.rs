use std::io::Write;
use std::path::Path;

use smartex_core::WeightTensor;

use crate::args::ConvertArgs;
use crate::files::{tensor_from_csv, tensor_to_csv, write_atomic, Inputs};
use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Setn,
}

fn format_of(path: &Path) -> Result<Format, CliError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Ok(Format::Csv),
        Some("setn") => Ok(Format::Setn),
        _ => Err(CliError::usage(format!(
            "{}: expected a .csv or .setn extension",
            path.display()
        ))),
    }
}

pub fn run(a: ConvertArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let from = format_of(&a.input)?;
    let to = format_of(&a.output)?;
    if from == to {
        return Err(CliError::usage("input and output have the same format"));
    }
    let bytes = Inputs::default().read(&a.input)?;
    let tensor = match from {
        Format::Csv => tensor_from_csv(&bytes),
        Format::Setn => WeightTensor::read_setn(bytes.as_slice()).map_err(CliError::domain),
    }
    .map_err(|e| CliError {
        code: e.code,
        message: format!("{}: {}", a.input.display(), e.message),
    })?;
    let encoded = match to {
        Format::Csv => tensor_to_csv(&tensor)?,
        Format::Setn => tensor.to_setn_bytes(),
    };
    write_atomic(&a.output, &encoded)?;
    let _ = writeln!(out, "wrote {} ({:?})", a.output.display(), tensor.dims());
    Ok(())
}
