//! Small dense matrices and a one-sided Jacobi SVD.
//!
//! The audit matrices here are tiny (at most a few thousand rows and a
//! handful of columns), so a self-contained Jacobi sweep gives singular
//! values to near machine precision without pulling in a linear-algebra
//! dependency. One-sided Jacobi rotates pairs of columns until all are
//! mutually orthogonal; the singular values are the final column norms.

use alloc::vec;
use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend(row);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies the requested columns into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, columns.len());
        for r in 0..self.rows {
            for (k, &c) in columns.iter().enumerate() {
                out.set(r, k, self.get(r, c));
            }
        }
        out
    }

    fn column_dot(&self, a: usize, b: usize) -> f64 {
        let mut total = 0.0;
        for r in 0..self.rows {
            total += self.get(r, a) * self.get(r, b);
        }
        total
    }

    /// Singular values in descending order, one per column, via one-sided
    /// Jacobi rotations.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows == 0 || self.cols == 0 {
            return vec![0.0; self.cols];
        }
        let mut work = self.clone();
        let eps = f64::EPSILON;
        let max_sweeps = 60;
        for _ in 0..max_sweeps {
            let mut rotated = false;
            for p in 0..work.cols {
                for q in (p + 1)..work.cols {
                    let alpha = work.column_dot(p, p);
                    let beta = work.column_dot(q, q);
                    let gamma = work.column_dot(p, q);
                    if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for r in 0..work.rows {
                        let vp = work.get(r, p);
                        let vq = work.get(r, q);
                        work.set(r, p, c * vp - s * vq);
                        work.set(r, q, s * vp + c * vq);
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut values: Vec<f64> = (0..work.cols)
            .map(|c| work.column_dot(c, c).sqrt())
            .collect();
        values.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
        values
    }

    /// Smallest singular value (over `min(rows, cols)` values; zero when the
    /// matrix is rank-deficient or wider than tall).
    pub fn smallest_singular_value(&self) -> f64 {
        let values = self.singular_values();
        if self.rows < self.cols {
            // more columns than rows: the column family is necessarily
            // dependent and the trailing values are exact zeros
            return 0.0;
        }
        values.last().copied().unwrap_or(0.0)
    }
}
