//! Small dense real matrices and the least-squares solver used by the
//! decomposition engine.
//!
//! Matrices here are tiny (the inner dimension is a kernel width, at most
//! a handful of columns), so everything is row-major `Vec<f64>` and the
//! solver goes through regularized normal equations.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / cols.max(1),
                pos % cols.max(1),
                data[pos]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self[(i, j)] * self[(i, j)])
            .sum::<f64>()
            .sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "matmul {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = out.row_mut(i);
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

pub fn frob_norm(a: &Matrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `min_X ||a X - y||_F` through ridge-regularized normal equations
/// `(a^T a + eps I) X = a^T y`, with `eps = 1e-12 * trace(a^T a) / cols`.
///
/// An all-zero `a` yields an all-zero `X`.
pub fn solve_lsq(a: &Matrix, y: &Matrix) -> Result<Matrix> {
    if a.rows != y.rows {
        return Err(Error::Shape(format!(
            "least squares with {} equations but {} right-hand rows",
            a.rows, y.rows
        )));
    }
    if a.rows == 0 {
        return Err(Error::Shape("least squares with zero equations".into()));
    }
    let n = a.cols;
    let mut gram = Matrix::zeros(n, n);
    let mut rhs = Matrix::zeros(n, y.cols);
    for r in 0..a.rows {
        let arow = a.row(r);
        let yrow = y.row(r);
        for i in 0..n {
            let ai = arow[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..n {
                gram[(i, j)] += ai * arow[j];
            }
            for j in 0..y.cols {
                rhs[(i, j)] += ai * yrow[j];
            }
        }
    }
    let tr = gram.trace();
    if tr == 0.0 {
        return Ok(Matrix::zeros(n, y.cols));
    }
    let eps = 1e-12 * tr / n as f64;
    for i in 0..n {
        gram[(i, i)] += eps;
    }
    cholesky_solve(gram, rhs)
}

/// Solves `g X = rhs` for symmetric positive definite `g`.
fn cholesky_solve(g: Matrix, mut rhs: Matrix) -> Result<Matrix> {
    let n = g.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err(Error::Numerical(format!(
                "normal equations not positive definite at pivot {j}"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    for c in 0..rhs.cols {
        // forward: L z = b
        for i in 0..n {
            let mut s = rhs[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * rhs[(k, c)];
            }
            rhs[(i, c)] = s / l[(i, i)];
        }
        // backward: L^T x = z
        for i in (0..n).rev() {
            let mut s = rhs[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * rhs[(k, c)];
            }
            rhs[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(rhs)
}
