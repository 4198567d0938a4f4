//! The iterative quantize / fit / sparsify loop.

use serde::{Deserialize, Serialize};

use super::quantize::{
    normalize_columns, pow2_parts, quantization_gap, round_all, select_exponents, shift,
};
use crate::error::{Error, Result};
use crate::matcore::{frob_norm, matmul, solve_lsq, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    /// Rank of the basis; `None` uses the column count of each matrix.
    pub rank: Option<usize>,
    /// Maximum number of distinct exponents in the coefficient matrix.
    pub n_p: usize,
    /// Rows whose L2 norm falls below this fraction of the largest row norm are zeroed.
    pub theta_v: f64,
    /// Channels with a score below this value are pruned.
    pub theta_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Reshaped matrices taller than this are sliced along their rows.
    pub slice_rows: usize,
    /// Row width used when reshaping fully-connected and 1x1 layers.
    pub fc_cols: usize,
}

impl Default for SeParams {
    fn default() -> Self {
        Self {
            rank: None,
            n_p: 8,
            theta_v: 0.05,
            theta_c: 4e-3,
            tol: 1e-10,
            max_iter: 30,
            slice_rows: 64,
            fc_cols: 3,
        }
    }
}

impl SeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_p < 1 {
            return bad("n_p must be at least 1");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(0.0..1.0).contains(&self.theta_v) {
            return bad("theta_v must lie in [0, 1)");
        }
        if !self.theta_c.is_finite() {
            return bad("theta_c must be finite");
        }
        if self.fc_cols < 1 {
            return bad("fc_cols must be at least 1");
        }
        if let Some(r) = self.rank {
            if r < 1 {
                return bad("rank must be at least 1");
            }
            if self.slice_rows < r {
                return bad("slice_rows must be at least the rank");
            }
        }
        if self.slice_rows < 1 {
            return bad("slice_rows must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStage {
    Iteration,
    /// The closing re-quantize and basis re-fit.
    Final,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub stage: TraceStage,
    /// `||w - ce*basis||_F / ||w||_F` (0 for an all-zero `w`).
    pub rel_error: f64,
    /// Fraction of all-zero coefficient rows.
    pub row_sparsity: f64,
    /// `||basis - basis_init||_F`.
    pub basis_drift: f64,
    /// Quantization difference of this pass.
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnNormalization {
    EveryQuantizeStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub column_normalization: ColumnNormalization,
    pub converged: bool,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.stage == TraceStage::Iteration)
            .count()
    }

    pub fn final_error(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.rel_error)
    }
}

/// A matrix in decomposed form: `w ≈ ce * basis`, with every nonzero of
/// `ce` an exact signed power of two whose exponent lies in `p_set`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeForm {
    pub ce: Matrix,
    pub basis: Matrix,
    pub p_set: Vec<i32>,
    /// `true` where the coefficient row has a nonzero entry.
    pub row_mask: Vec<bool>,
    /// Per input channel keep flags of the owning layer; empty when no
    /// channel pruning was applied.
    pub channel_mask: Vec<bool>,
    pub trace: Trace,
}

impl SeForm {
    /// Checks the domain invariants; returns a description of the first violation.
    pub fn check_invariants(&self, n_p: Option<usize>) -> Result<()> {
        let fail = |m: String| Err(Error::Model(m));
        if self.ce.cols() != self.basis.rows() {
            return fail(format!(
                "ce is {:?} but basis is {:?}",
                self.ce.shape(),
                self.basis.shape()
            ));
        }
        if self.p_set.is_empty() || self.p_set.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("exponent set {:?} not sorted and unique", self.p_set));
        }
        if let Some(n) = n_p {
            if self.p_set.len() > n {
                return fail(format!("|P| = {} exceeds {n}", self.p_set.len()));
            }
        }
        if self.row_mask.len() != self.ce.rows() {
            return fail("row mask length mismatch".into());
        }
        for i in 0..self.ce.rows() {
            let nonzero = self.ce.row(i).iter().any(|v| *v != 0.0);
            if nonzero != self.row_mask[i] {
                return fail(format!("row mask disagrees with row {i}"));
            }
            for (j, &v) in self.ce.row(i).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                match pow2_parts(v) {
                    Some((_, p)) if self.p_set.binary_search(&p).is_ok() => {}
                    _ => return fail(format!("ce[{i},{j}] = {v} outside the power-of-two domain")),
                }
            }
        }
        Ok(())
    }

    pub fn zero_rows(&self) -> usize {
        self.row_mask.iter().filter(|nz| !**nz).count()
    }

    pub fn row_sparsity(&self) -> f64 {
        row_sparsity(&self.ce)
    }
}

fn row_sparsity(ce: &Matrix) -> f64 {
    if ce.rows() == 0 {
        return 0.0;
    }
    let zero = (0..ce.rows())
        .filter(|&i| ce.row(i).iter().all(|v| *v == 0.0))
        .count();
    zero as f64 / ce.rows() as f64
}

fn rel_error(w: &Matrix, ce: &Matrix, basis: &Matrix, w_norm: f64) -> f64 {
    if w_norm == 0.0 {
        return 0.0;
    }
    let approx = matmul(ce, basis).expect("consistent shapes");
    frob_norm(&w.sub(&approx).expect("consistent shapes")) / w_norm
}

/// One alternating least-squares pass: refit the basis with `ce` fixed, then
/// refit the coefficients with the new basis fixed.
pub fn fit_step(w: &Matrix, ce: &Matrix, basis: &Matrix) -> Result<(Matrix, Matrix)> {
    fit_step_frozen(w, ce, basis, &[])
}

pub(crate) fn fit_step_frozen(
    w: &Matrix,
    ce: &Matrix,
    basis: &Matrix,
    frozen_rows: &[bool],
) -> Result<(Matrix, Matrix)> {
    if ce.rows() != w.rows() || basis.cols() != w.cols() || ce.cols() != basis.rows() {
        return Err(Error::Shape(format!(
            "fit step with w {:?}, ce {:?}, basis {:?}",
            w.shape(),
            ce.shape(),
            basis.shape()
        )));
    }
    let new_basis = solve_lsq(ce, w)?;
    let mut new_ce = solve_lsq(&new_basis.transpose(), &w.transpose())?.transpose();
    for (i, &frozen) in frozen_rows.iter().enumerate() {
        if frozen {
            new_ce.row_mut(i).fill(0.0);
        }
    }
    Ok((new_basis, new_ce))
}

/// Zeroes every row whose L2 norm is below `theta_v` times the largest row norm.
pub fn sparsify_vector(ce: &Matrix, theta_v: f64) -> Matrix {
    let norms: Vec<f64> = (0..ce.rows()).map(|i| ce.row_norm(i)).collect();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let cut = theta_v * max;
    let mut out = ce.clone();
    for (i, &n) in norms.iter().enumerate() {
        if n < cut {
            out.row_mut(i).fill(0.0);
        }
    }
    out
}

pub fn decompose(w: &Matrix, params: &SeParams) -> Result<SeForm> {
    decompose_frozen(w, params, &[])
}

/// Runs the decomposition with `frozen_rows` of the coefficient matrix pinned
/// to zero throughout (rows of pruned channels).
pub fn decompose_frozen(w: &Matrix, params: &SeParams, frozen_rows: &[bool]) -> Result<SeForm> {
    params.validate()?;
    let (m, n) = w.shape();
    if m == 0 || n == 0 {
        return Err(Error::Shape("cannot decompose an empty matrix".into()));
    }
    if !frozen_rows.is_empty() && frozen_rows.len() != m {
        return Err(Error::Shape(format!(
            "{} frozen-row flags for {m} rows",
            frozen_rows.len()
        )));
    }
    let r = params.rank.unwrap_or(n);
    if r > n {
        return Err(Error::Config(format!("rank {r} exceeds matrix width {n}")));
    }

    // ce = w (first r columns), basis = [I_r | 0]
    let mut basis_init = Matrix::zeros(r, n);
    for i in 0..r {
        basis_init[(i, i)] = 1.0;
    }
    let w_norm = frob_norm(w);
    if w_norm == 0.0 {
        return Ok(SeForm {
            ce: Matrix::zeros(m, r),
            basis: basis_init,
            p_set: vec![0],
            row_mask: vec![false; m],
            channel_mask: Vec::new(),
            trace: Trace {
                column_normalization: ColumnNormalization::EveryQuantizeStep,
                converged: true,
                records: vec![TraceRecord {
                    iteration: 0,
                    stage: TraceStage::Final,
                    rel_error: 0.0,
                    row_sparsity: 1.0,
                    basis_drift: 0.0,
                    delta: 0.0,
                }],
            },
        });
    }

    let mut ce = Matrix::zeros(m, r);
    for i in 0..m {
        if frozen_rows.get(i).copied().unwrap_or(false) {
            continue;
        }
        ce.row_mut(i).copy_from_slice(&w.row(i)[..r]);
    }
    let mut basis = basis_init.clone();
    let drift = |b: &Matrix| frob_norm(&b.sub(&basis_init).expect("same shape"));

    let mut records = Vec::with_capacity(params.max_iter + 1);
    let mut converged = false;
    for iteration in 1..=params.max_iter {
        // quantize
        let normalized = normalize_columns(&ce);
        let p_set = select_exponents(&normalized, params.n_p);
        let quantized = round_all(&normalized, &p_set);
        let delta = quantization_gap(&normalized, &quantized);
        // fit
        let (b, c) = fit_step_frozen(w, &quantized, &basis, frozen_rows)?;
        basis = b;
        // sparsify
        ce = sparsify_vector(&c, params.theta_v);

        records.push(TraceRecord {
            iteration,
            stage: TraceStage::Iteration,
            rel_error: rel_error(w, &ce, &basis, w_norm),
            row_sparsity: row_sparsity(&ce),
            basis_drift: drift(&basis),
            delta,
        });
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    let normalized = normalize_columns(&ce);
    let p_set = select_exponents(&normalized, params.n_p);
    let ce = round_all(&normalized, &p_set);
    let delta = quantization_gap(&normalized, &ce);
    let basis = solve_lsq(&ce, w)?;
    let form_error = rel_error(w, &ce, &basis, w_norm);
    records.push(TraceRecord {
        iteration: records.len(),
        stage: TraceStage::Final,
        rel_error: form_error,
        row_sparsity: row_sparsity(&ce),
        basis_drift: drift(&basis),
        delta,
    });
    let row_mask = (0..m)
        .map(|i| ce.row(i).iter().any(|v| *v != 0.0))
        .collect();
    Ok(SeForm {
        ce,
        basis,
        p_set,
        row_mask,
        channel_mask: Vec::new(),
        trace: Trace {
            column_normalization: ColumnNormalization::EveryQuantizeStep,
            converged,
            records,
        },
    })
}

/// Rebuilds `ce * basis` using only sign flips, exponent shifts and additions.
pub fn reconstruct(form: &SeForm) -> Result<Matrix> {
    let (m, r) = form.ce.shape();
    if form.basis.rows() != r {
        return Err(Error::Shape("basis rows must match coefficient columns".into()));
    }
    let n = form.basis.cols();
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        for k in 0..r {
            let c = form.ce[(i, k)];
            if c == 0.0 {
                continue;
            }
            let (negative, p) = pow2_parts(c).ok_or_else(|| {
                Error::Model(format!("ce[{i},{k}] = {c} is not a power of two"))
            })?;
            let brow = form.basis.row(k);
            let orow = out.row_mut(i);
            for (o, &b) in orow.iter_mut().zip(brow) {
                let term = shift(b, p);
                *o += if negative { -term } else { term };
            }
        }
    }
    Ok(out)
}
