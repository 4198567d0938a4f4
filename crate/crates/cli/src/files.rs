//! File access with path-bearing errors, atomic writes and the CSV tensor format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smartex_core::{Error, WeightTensor};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    /// File path, or `preset:<name>` for bundled documents.
    pub path: String,
    /// Hash of the file bytes. For documents written by this tool, the hash
    /// covers the document re-serialized with its manifest timestamp blanked.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs read during one run, in read order.
#[derive(Debug, Default)]
pub struct Inputs {
    pub records: Vec<InputRecord>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.records.push(InputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|_| CliError::io_msg(path, "not valid UTF-8"))
    }

    /// Records a document under `path` with an explicitly computed hash.
    pub fn record(&mut self, path: &Path, sha256: String) {
        self.records.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
    }

    pub fn preset(&mut self, name: &str, document: &str) {
        self.records.push(InputRecord {
            path: format!("preset:{name}"),
            sha256: sha256_hex(document.as_bytes()),
        });
    }
}

/// Writes through a temporary file in the destination directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Layer names become file stems; anything outside `[A-Za-z0-9._-]` turns into `_`.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

/// CSV tensor: a `dims,d0,d1,...` record, then the payload row-major with the
/// last dimension across each record.
pub fn tensor_to_csv(t: &WeightTensor) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut head = vec!["dims".to_string()];
    head.extend(t.dims().iter().map(|d| d.to_string()));
    w.write_record(&head).map_err(csv_err)?;
    let width = *t.dims().last().expect("tensors have dims");
    if width > 0 {
        for row in t.data().chunks(width) {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::domain(Error::TensorFormat(e.to_string())))
}

pub fn tensor_from_csv(bytes: &[u8]) -> Result<WeightTensor, CliError> {
    let bad = |m: String| CliError::domain(Error::TensorFormat(m));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = r.records();
    let head = records
        .next()
        .ok_or_else(|| bad("empty CSV".into()))?
        .map_err(csv_err)?;
    if head.get(0) != Some("dims") {
        return Err(bad("first record must start with `dims`".into()));
    }
    let dims = head
        .iter()
        .skip(1)
        .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad dimension `{d}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut data = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        for field in rec.iter().filter(|f| !f.is_empty()) {
            let v = field
                .parse::<f32>()
                .map_err(|_| bad(format!("record {}: bad value `{field}`", line + 2)))?;
            data.push(v);
        }
    }
    WeightTensor::new(dims, data).map_err(CliError::domain)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::domain(Error::TensorFormat(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let t = WeightTensor::new(vec![2, 3], vec![0.1, -2.5, 1e-7, 3.0, f32::MAX, -0.0]).unwrap();
        let bytes = tensor_to_csv(&t).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("dims,2,3\n"));
        assert_eq!(tensor_from_csv(&bytes).unwrap(), t);
    }

    #[test]
    fn csv_rejects_wrong_counts() {
        assert!(tensor_from_csv(b"dims,2,2\n1,2\n3\n").is_err());
        assert!(tensor_from_csv(b"2,2\n1,2\n").is_err());
        assert!(tensor_from_csv(b"dims,1\nx\n").is_err());
    }

    #[test]
    fn stems_are_sanitized() {
        assert_eq!(file_stem("res2a/branch 1"), "res2a_branch_1");
        assert_eq!(file_stem("conv1.2-a"), "conv1.2-a");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn sha_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
