//! Decomposition of weight matrices into a sparse power-of-two coefficient
//! matrix times a small dense basis.

mod algorithm;
mod quantize;
mod reshape;
mod storage;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use algorithm::{
    decompose, decompose_frozen, fit_step, reconstruct, sparsify_vector, ColumnNormalization,
    SeForm, SeParams, Trace, TraceRecord, TraceStage,
};
pub use quantize::{
    nearest_exponent_in, nearest_integer_exponent, normalize_columns, pow2, pow2_parts, quantization_gap,
    quantize_pow2, round_pow2, round_pow2_in, select_exponents, shift,
};
pub use reshape::{
    reshape_layer, sparsify_channel, unreshape_layer, weight_dims, Placement, ReshapeCase,
};
pub use storage::{encode_stats, merge_stats, BitWidths, StorageStats};

use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::tensor::WeightTensor;
use crate::workload::LayerSpec;

pub const SEFORM_SCHEMA_VERSION: u32 = 1;

/// On-disk form of [`SeForm`]: coefficients as sign and exponent arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SeFormDoc {
    schema_version: u32,
    rows: usize,
    rank: usize,
    /// -1, 0 or +1 per coefficient, row-major.
    sign: Vec<i8>,
    /// Exponent per coefficient; 0 where `sign` is 0.
    exp: Vec<i32>,
    basis: Matrix,
    p_set: Vec<i32>,
    row_mask: Vec<bool>,
    channel_mask: Vec<bool>,
    trace: Trace,
}

impl Serialize for SeForm {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut sign = Vec::with_capacity(self.ce.as_slice().len());
        let mut exp = Vec::with_capacity(sign.capacity());
        for &v in self.ce.as_slice() {
            match pow2_parts(v) {
                Some((neg, p)) => {
                    sign.push(if neg { -1 } else { 1 });
                    exp.push(p);
                }
                None if v == 0.0 => {
                    sign.push(0);
                    exp.push(0);
                }
                None => {
                    return Err(serde::ser::Error::custom(format!(
                        "coefficient {v} is not a power of two"
                    )))
                }
            }
        }
        SeFormDoc {
            schema_version: SEFORM_SCHEMA_VERSION,
            rows: self.ce.rows(),
            rank: self.ce.cols(),
            sign,
            exp,
            basis: self.basis.clone(),
            p_set: self.p_set.clone(),
            row_mask: self.row_mask.clone(),
            channel_mask: self.channel_mask.clone(),
            trace: self.trace.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SeForm {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = SeFormDoc::deserialize(deserializer)?;
        if doc.schema_version != SEFORM_SCHEMA_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let n = doc.rows * doc.rank;
        if doc.sign.len() != n || doc.exp.len() != n {
            return Err(D::Error::custom("sign/exp length does not match rows*rank"));
        }
        let mut data = Vec::with_capacity(n);
        for (&s, &p) in doc.sign.iter().zip(&doc.exp) {
            data.push(match s {
                0 => 0.0,
                1 => pow2(p),
                -1 => -pow2(p),
                _ => return Err(D::Error::custom(format!("sign {s} not in -1..=1"))),
            });
        }
        let ce = Matrix::new(doc.rows, doc.rank, data).map_err(D::Error::custom)?;
        let form = SeForm {
            ce,
            basis: doc.basis,
            p_set: doc.p_set,
            row_mask: doc.row_mask,
            channel_mask: doc.channel_mask,
            trace: doc.trace,
        };
        form.check_invariants(None).map_err(D::Error::custom)?;
        Ok(form)
    }
}

/// A whole layer in decomposed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCompression {
    pub layer: String,
    pub forms: Vec<SeForm>,
    pub placements: Vec<Placement>,
    /// Input-channel keep flags (all `true` without channel scores).
    pub channel_mask: Vec<bool>,
    pub stats: StorageStats,
    /// Relative Frobenius error of the rebuilt layer over real (non-pad) weights.
    pub rel_error: f64,
    pub iterations: usize,
}

impl LayerCompression {
    /// Rebuilds the dense layer tensor.
    pub fn reconstruct(&self, layer: &LayerSpec, fc_cols: usize) -> Result<WeightTensor> {
        let parts = self
            .forms
            .iter()
            .zip(&self.placements)
            .map(|(f, p)| Ok((reconstruct(f)?, p.clone())))
            .collect::<Result<Vec<_>>>()?;
        unreshape_layer(&parts, layer, fc_cols)
    }
}

/// Reshapes, channel-prunes and decomposes one layer. Matrices are
/// decomposed in parallel; the result does not depend on thread count.
pub fn compress_layer(
    weights: &WeightTensor,
    layer: &LayerSpec,
    params: &SeParams,
    bits: BitWidths,
    channel_scores: &[f64],
) -> Result<LayerCompression> {
    params.validate()?;
    let channels = layer.c as usize;
    let keep = sparsify_channel(channel_scores, channels, params.theta_c)?;
    let parts = reshape_layer(weights, layer, params.slice_rows, params.fc_cols)?;
    let original: Vec<Matrix> = parts.iter().map(|(m, _)| m.clone()).collect();

    let forms = parts
        .into_par_iter()
        .map(|(mut m, p)| {
            let frozen = reshape::apply_channel_mask(&mut m, &p, layer, params.fc_cols, &keep)?;
            let frozen = if frozen.iter().any(|f| *f) { frozen } else { Vec::new() };
            let mut form = decompose_frozen(&m, params, &frozen)?;
            form.channel_mask = keep.clone();
            Ok((form, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let (forms, placements): (Vec<_>, Vec<_>) = forms.into_iter().unzip();

    let mut err2 = 0.0;
    let mut ref2 = 0.0;
    for ((form, p), w) in forms.iter().zip(&placements).zip(&original) {
        let rebuilt = reconstruct(form)?;
        let pads = p.pad_mask(layer, params.fc_cols)?;
        for ((&a, &b), &pad) in w.as_slice().iter().zip(rebuilt.as_slice()).zip(&pads) {
            if !pad {
                err2 += (a - b) * (a - b);
                ref2 += a * a;
            }
        }
    }
    let rel_error = if ref2 == 0.0 { err2.sqrt() } else { (err2 / ref2).sqrt() };
    if !rel_error.is_finite() {
        return Err(Error::Numerical(format!("layer `{}` error is not finite", layer.name)));
    }
    let stats = encode_stats(&forms, layer, bits)?;
    let iterations = forms.iter().map(|f| f.trace.iterations()).max().unwrap_or(0);
    Ok(LayerCompression {
        layer: layer.name.clone(),
        forms,
        placements,
        channel_mask: keep,
        stats,
        rel_error,
        iterations,
    })
}
