//! Storage accounting for a layer held in decomposed form.

use serde::{Deserialize, Serialize};

use super::algorithm::SeForm;
use crate::error::{Error, Result};
use crate::workload::LayerSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitWidths {
    /// Precision of the dense reference weights.
    pub bits_ref: u32,
    pub bits_ce: u32,
    pub bits_basis: u32,
}

impl Default for BitWidths {
    fn default() -> Self {
        Self {
            bits_ref: 32,
            bits_ce: 4,
            bits_basis: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageStats {
    pub bits_dense: u64,
    pub bits_basis: u64,
    pub bits_ce: u64,
    pub bits_index: u64,
    pub cr: f64,
    /// Fraction of coefficient rows that are entirely zero.
    pub sparsity: f64,
    pub dense_weights: u64,
    pub coeff_rows: u64,
    pub zero_rows: u64,
    /// Element-wise count of nonzero coefficients.
    pub nonzero_coefficients: u64,
}

impl StorageStats {
    pub fn compressed_bits(&self) -> u64 {
        self.bits_basis + self.bits_ce + self.bits_index
    }

    /// `(bits_dense, compressed_bits)`, the compression rate as an exact fraction.
    pub fn cr_ratio(&self) -> (u64, u64) {
        (self.bits_dense, self.compressed_bits())
    }

    /// Compression rate measured against a different dense precision.
    pub fn cr_at(&self, bits_ref: u32) -> f64 {
        (self.dense_weights * bits_ref as u64) as f64 / self.compressed_bits() as f64
    }
}

/// Every coefficient row costs one index bit; nonzero rows additionally store
/// all `r` entries at `bits_ce`; each form that holds any nonzero row stores
/// its basis at `bits_basis`.
pub fn encode_stats(forms: &[SeForm], layer: &LayerSpec, bits: BitWidths) -> Result<StorageStats> {
    if bits.bits_ref == 0 || bits.bits_ce == 0 || bits.bits_basis == 0 {
        return Err(Error::Config("bit widths must be at least 1".into()));
    }
    let dense_weights = layer.weight_count();
    let mut bits_basis = 0u64;
    let mut bits_ce = 0u64;
    let mut coeff_rows = 0u64;
    let mut zero_rows = 0u64;
    let mut nonzero_coefficients = 0u64;
    for f in forms {
        let rows = f.ce.rows() as u64;
        let zeros = f.zero_rows() as u64;
        coeff_rows += rows;
        zero_rows += zeros;
        bits_ce += bits.bits_ce as u64 * f.ce.cols() as u64 * (rows - zeros);
        if zeros < rows {
            bits_basis += bits.bits_basis as u64 * (f.basis.rows() * f.basis.cols()) as u64;
        }
        nonzero_coefficients += f.ce.as_slice().iter().filter(|v| **v != 0.0).count() as u64;
    }
    let bits_dense = bits.bits_ref as u64 * dense_weights;
    let compressed = bits_basis + bits_ce + coeff_rows;
    if compressed == 0 {
        return Err(Error::Model("no coefficient rows to encode".into()));
    }
    Ok(StorageStats {
        bits_dense,
        bits_basis,
        bits_ce,
        bits_index: coeff_rows,
        cr: bits_dense as f64 / compressed as f64,
        sparsity: if coeff_rows == 0 {
            0.0
        } else {
            zero_rows as f64 / coeff_rows as f64
        },
        dense_weights,
        coeff_rows,
        zero_rows,
        nonzero_coefficients,
    })
}

/// Sums per-layer statistics into a network total.
pub fn merge_stats(parts: &[StorageStats]) -> Option<StorageStats> {
    if parts.is_empty() {
        return None;
    }
    let sum = |f: fn(&StorageStats) -> u64| parts.iter().map(f).sum::<u64>();
    let bits_dense = sum(|s| s.bits_dense);
    let bits_basis = sum(|s| s.bits_basis);
    let bits_ce = sum(|s| s.bits_ce);
    let bits_index = sum(|s| s.bits_index);
    let coeff_rows = sum(|s| s.coeff_rows);
    let zero_rows = sum(|s| s.zero_rows);
    Some(StorageStats {
        bits_dense,
        bits_basis,
        bits_ce,
        bits_index,
        cr: bits_dense as f64 / (bits_basis + bits_ce + bits_index) as f64,
        sparsity: if coeff_rows == 0 {
            0.0
        } else {
            zero_rows as f64 / coeff_rows as f64
        },
        dense_weights: sum(|s| s.dense_weights),
        coeff_rows,
        zero_rows,
        nonzero_coefficients: sum(|s| s.nonzero_coefficients),
    })
}
