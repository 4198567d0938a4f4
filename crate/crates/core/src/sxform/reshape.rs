//! Mapping layer weight tensors to the small matrices that get decomposed, and back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::tensor::WeightTensor;
use crate::workload::{LayerKind, LayerSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReshapeCase {
    /// One `(R*C, S)` matrix per filter; row index is `c*R + r`.
    Filter,
    /// One `(ceil(C/n), n)` matrix per output row, zero padded at the end.
    Row,
}

/// Where a reshaped matrix lives inside the layer tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub case: ReshapeCase,
    /// Filter (or output row) index.
    pub group: usize,
    /// First row of this slice within the unsliced per-group matrix.
    pub row_start: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Shape facts needed to move between tensor and matrix coordinates.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    case: ReshapeCase,
    groups: usize,
    channels: usize,
    r: usize,
    s: usize,
    width: usize,
}

impl Geometry {
    fn of(layer: &LayerSpec, fc_cols: usize) -> Result<Self> {
        layer.validate()?;
        let (m, c, r, s) = (
            layer.m as usize,
            layer.c as usize,
            layer.r as usize,
            layer.s as usize,
        );
        match layer.kind {
            LayerKind::Fc => Ok(Self::row(m, c, fc_cols)),
            LayerKind::Conv if r == 1 && s == 1 => Ok(Self::row(m, c, fc_cols)),
            LayerKind::Conv | LayerKind::Dwconv => {
                if r != s && r > 1 && s > 1 {
                    return Err(Error::UnsupportedShape(format!(
                        "layer `{}` has a {r}x{s} kernel; only square kernels are reshaped",
                        layer.name
                    )));
                }
                let channels = if layer.kind == LayerKind::Dwconv { 1 } else { c };
                Ok(Self {
                    case: ReshapeCase::Filter,
                    groups: m,
                    channels,
                    r,
                    s,
                    width: s,
                })
            }
        }
    }

    fn row(m: usize, c: usize, width: usize) -> Self {
        Self {
            case: ReshapeCase::Row,
            groups: m,
            channels: c,
            r: 1,
            s: 1,
            width,
        }
    }

    fn group_rows(&self) -> usize {
        match self.case {
            ReshapeCase::Filter => self.channels * self.r,
            ReshapeCase::Row => self.channels.div_ceil(self.width),
        }
    }

    /// Flat tensor offset of matrix cell `(row, col)` in `group`, or `None` for a pad cell.
    fn offset(&self, group: usize, row: usize, col: usize) -> Option<usize> {
        match self.case {
            ReshapeCase::Filter => {
                let (c, r) = (row / self.r, row % self.r);
                Some(((group * self.channels + c) * self.r + r) * self.s + col)
            }
            ReshapeCase::Row => {
                let k = row * self.width + col;
                (k < self.channels).then_some(group * self.channels + k)
            }
        }
    }

    /// Input channel index of a matrix cell (unpadded).
    fn channel(&self, group: usize, row: usize, col: usize, dw: bool) -> usize {
        match self.case {
            ReshapeCase::Filter if dw => group,
            ReshapeCase::Filter => row / self.r,
            ReshapeCase::Row => row * self.width + col,
        }
    }
}

/// Expected tensor dims for a layer.
pub fn weight_dims(layer: &LayerSpec) -> Vec<usize> {
    let (m, c, r, s) = (
        layer.m as usize,
        layer.c as usize,
        layer.r as usize,
        layer.s as usize,
    );
    match layer.kind {
        LayerKind::Fc => vec![m, c],
        LayerKind::Conv => vec![m, c, r, s],
        LayerKind::Dwconv => vec![c, 1, r, s],
    }
}

fn check_dims(weights: &WeightTensor, layer: &LayerSpec) -> Result<()> {
    let expected = weight_dims(layer);
    let pointwise = layer.kind == LayerKind::Conv && layer.r == 1 && layer.s == 1;
    let matches = weights.dims() == expected.as_slice()
        || (pointwise && weights.dims() == &expected[..2]);
    if matches {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "layer `{}` expects weights {:?}, got {:?}",
            layer.name,
            expected,
            weights.dims()
        )))
    }
}

/// Splits a layer into matrices with their placements.
pub fn reshape_layer(
    weights: &WeightTensor,
    layer: &LayerSpec,
    slice_rows: usize,
    fc_cols: usize,
) -> Result<Vec<(Matrix, Placement)>> {
    if slice_rows == 0 || fc_cols == 0 {
        return Err(Error::Config("slice_rows and fc_cols must be positive".into()));
    }
    check_dims(weights, layer)?;
    let geo = Geometry::of(layer, fc_cols)?;
    let data = weights.data();
    let total = geo.group_rows();
    let mut out = Vec::new();
    for group in 0..geo.groups {
        let mut start = 0;
        while start < total {
            let rows = slice_rows.min(total - start);
            let mut m = Matrix::zeros(rows, geo.width);
            for i in 0..rows {
                for j in 0..geo.width {
                    if let Some(k) = geo.offset(group, start + i, j) {
                        m[(i, j)] = data[k] as f64;
                    }
                }
            }
            out.push((
                m,
                Placement {
                    case: geo.case,
                    group,
                    row_start: start,
                    rows,
                    cols: geo.width,
                },
            ));
            start += rows;
        }
    }
    Ok(out)
}

/// Writes matrices back into a tensor shaped like `layer`, dropping pad cells.
pub fn unreshape_layer(
    parts: &[(Matrix, Placement)],
    layer: &LayerSpec,
    fc_cols: usize,
) -> Result<WeightTensor> {
    let geo = Geometry::of(layer, fc_cols)?;
    let mut out = WeightTensor::zeros(weight_dims(layer));
    let data = out.data_mut();
    for (m, p) in parts {
        if m.shape() != (p.rows, p.cols) || p.case != geo.case || p.group >= geo.groups {
            return Err(Error::Shape(format!("placement {p:?} does not fit layer `{}`", layer.name)));
        }
        for i in 0..p.rows {
            for j in 0..p.cols {
                if let Some(k) = geo.offset(p.group, p.row_start + i, j) {
                    data[k] = m[(i, j)] as f32;
                }
            }
        }
    }
    Ok(out)
}

impl Placement {
    /// `true` where the cell is zero padding rather than a real weight.
    pub fn pad_mask(&self, layer: &LayerSpec, fc_cols: usize) -> Result<Vec<bool>> {
        let geo = Geometry::of(layer, fc_cols)?;
        let mut mask = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                mask.push(geo.offset(self.group, self.row_start + i, j).is_none());
            }
        }
        Ok(mask)
    }
}

/// Channel keep flags: `score >= theta_c`. Empty scores keep every channel.
pub fn sparsify_channel(channel_scores: &[f64], channels: usize, theta_c: f64) -> Result<Vec<bool>> {
    if channel_scores.is_empty() {
        return Ok(vec![true; channels]);
    }
    if channel_scores.len() != channels {
        return Err(Error::Shape(format!(
            "{} channel scores for {channels} channels",
            channel_scores.len()
        )));
    }
    Ok(channel_scores.iter().map(|&s| s >= theta_c).collect())
}

/// Applies a channel mask to one reshaped matrix: zeroes masked cells and
/// returns which coefficient rows must stay zero during decomposition.
pub(crate) fn apply_channel_mask(
    m: &mut Matrix,
    p: &Placement,
    layer: &LayerSpec,
    fc_cols: usize,
    keep: &[bool],
) -> Result<Vec<bool>> {
    let geo = Geometry::of(layer, fc_cols)?;
    let dw = layer.kind == LayerKind::Dwconv;
    let mut frozen = vec![false; p.rows];
    for (i, f) in frozen.iter_mut().enumerate() {
        let row = p.row_start + i;
        let mut any_valid = false;
        let mut any_kept = false;
        for j in 0..p.cols {
            if geo.offset(p.group, row, j).is_none() {
                continue;
            }
            any_valid = true;
            if keep[geo.channel(p.group, row, j, dw)] {
                any_kept = true;
            } else {
                m[(i, j)] = 0.0;
            }
        }
        *f = any_valid && !any_kept;
    }
    Ok(frozen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(dims: Vec<usize>) -> WeightTensor {
        let n = dims.iter().product();
        WeightTensor::new(dims, (0..n).map(|i| i as f32 + 1.0).collect()).unwrap()
    }

    #[test]
    fn conv_filters_become_tall_matrices() {
        let layer = LayerSpec::conv("c", 2, 2, 3, 4, 1);
        let parts = reshape_layer(&iota(vec![2, 2, 3, 3]), &layer, 64, 3).unwrap();
        assert_eq!(parts.len(), 2);
        for (m, _) in &parts {
            assert_eq!(m.shape(), (6, 3));
        }
        // filter 1, channel 1, r 2 -> row 5
        let (m, p) = &parts[1];
        assert_eq!(p.group, 1);
        assert_eq!(m.row(5), &[34.0, 35.0, 36.0]);
    }

    #[test]
    fn fc_rows_reshape_with_padding() {
        let layer = LayerSpec::fc("fc", 4, 6);
        let parts = reshape_layer(&iota(vec![4, 6]), &layer, 64, 3).unwrap();
        assert_eq!(parts.len(), 4);
        assert!(parts.iter().all(|(m, _)| m.shape() == (2, 3)));
        assert!(parts[0].1.pad_mask(&layer, 3).unwrap().iter().all(|p| !p));

        let layer = LayerSpec::fc("fc", 1, 7);
        let parts = reshape_layer(&iota(vec![1, 7]), &layer, 64, 3).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0.shape(), (3, 3));
        let pads = parts[0].1.pad_mask(&layer, 3).unwrap();
        assert_eq!(pads.iter().filter(|p| **p).count(), 2);
        assert_eq!(parts[0].0.row(2), &[7.0, 0.0, 0.0]);
    }

    #[test]
    fn pointwise_conv_is_treated_like_fc() {
        let layer = LayerSpec::conv("pw", 4, 6, 1, 8, 1);
        let parts = reshape_layer(&iota(vec![4, 6, 1, 1]), &layer, 64, 3).unwrap();
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[0].1.case, ReshapeCase::Row);
    }

    #[test]
    fn non_square_kernel_is_rejected() {
        let mut layer = LayerSpec::conv("c", 2, 2, 3, 4, 1);
        layer.s = 5;
        let err = reshape_layer(&iota(vec![2, 2, 3, 5]), &layer, 64, 3).unwrap_err();
        assert!(matches!(err, Error::UnsupportedShape(_)));
    }

    #[test]
    fn wrong_tensor_dims_are_rejected() {
        let layer = LayerSpec::conv("c", 2, 2, 3, 4, 1);
        assert!(matches!(
            reshape_layer(&iota(vec![2, 3, 3, 3]), &layer, 64, 3),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn slicing_and_inverse_round_trip() {
        for (layer, dims) in [
            (LayerSpec::conv("c", 3, 10, 3, 4, 1), vec![3, 10, 3, 3]),
            (LayerSpec::fc("f", 5, 200), vec![5, 200]),
            (LayerSpec::dwconv("d", 4, 3, 4, 1), vec![4, 1, 3, 3]),
        ] {
            let w = iota(dims);
            let parts = reshape_layer(&w, &layer, 8, 3).unwrap();
            assert!(parts.iter().all(|(m, _)| m.rows() <= 8));
            assert_eq!(unreshape_layer(&parts, &layer, 3).unwrap(), w);
        }
    }

    #[test]
    fn channel_mask_cases() {
        assert_eq!(sparsify_channel(&[1.0, 0.001], 2, 0.01).unwrap(), vec![true, false]);
        assert_eq!(sparsify_channel(&[1.0, 0.001], 2, 0.0).unwrap(), vec![true, true]);
        assert_eq!(sparsify_channel(&[], 3, 0.5).unwrap(), vec![true; 3]);
        assert!(matches!(sparsify_channel(&[1.0], 2, 0.5), Err(Error::Shape(_))));
    }

    #[test]
    fn channel_mask_freezes_conv_rows_and_fc_cells() {
        let layer = LayerSpec::conv("c", 1, 2, 3, 4, 1);
        let mut parts = reshape_layer(&iota(vec![1, 2, 3, 3]), &layer, 64, 3).unwrap();
        let (m, p) = &mut parts[0];
        let frozen = apply_channel_mask(m, p, &layer, 3, &[true, false]).unwrap();
        assert_eq!(frozen, vec![false, false, false, true, true, true]);
        assert!(m.row(4).iter().all(|v| *v == 0.0));

        let layer = LayerSpec::fc("f", 1, 4);
        let mut parts = reshape_layer(&iota(vec![1, 4]), &layer, 64, 3).unwrap();
        let (m, p) = &mut parts[0];
        let frozen = apply_channel_mask(m, p, &layer, 3, &[true, false, true, false]).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 3.0]);
        assert_eq!(frozen, vec![false, true]);
    }
}
