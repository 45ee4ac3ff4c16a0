//! Sparse integer matrices for exact identity checks.
//!
//! Coboundary and coarsening operators have entries in {-1, 0, 1} with at
//! most a handful of nonzeros per row. Cochain-map identities are required to
//! hold exactly in integer arithmetic, and the largest cases (d = 3, level 4)
//! are far too big for dense products, so these checks run on a minimal
//! sorted-row sparse representation.

use nalgebra::DMatrix;

use crate::gramlin::LinearOperator;

/// Row-major sparse integer matrix; each row holds (col, value) pairs sorted
/// by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: Vec<Vec<(usize, i64)>>,
    cols: usize,
}

impl IntMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            rows: vec![Vec::new(); nrows],
            cols: ncols,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Adds `value` to entry (r, c).
    pub fn add(&mut self, r: usize, c: usize, value: i64) {
        assert!(c < self.cols, "column {c} out of bounds {}", self.cols);
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |&(col, _)| col) {
            Ok(k) => {
                row[k].1 += value;
                if row[k].1 == 0 {
                    row.remove(k);
                }
            }
            Err(k) => row.insert(k, (c, value)),
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, i64)] {
        &self.rows[r]
    }

    /// Exact sparse product self * other.
    pub fn matmul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(
            self.cols,
            other.nrows(),
            "integer matmul dimension mismatch"
        );
        let mut out = IntMatrix::zeros(self.nrows(), other.ncols());
        for r in 0..self.nrows() {
            for &(k, a) in &self.rows[r] {
                for &(c, b) in &other.rows[k] {
                    out.add(r, c, a * b);
                }
            }
        }
        out
    }

    /// Exact difference self - other.
    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.cols, other.ncols());
        let mut out = self.clone();
        for r in 0..other.nrows() {
            for &(c, v) in &other.rows[r] {
                out.add(r, c, -v);
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> u64 {
        self.rows
            .iter()
            .flat_map(|row| row.iter().map(|&(_, v)| v.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Every row has at least one nonzero entry.
    pub fn rows_nonzero(&self) -> bool {
        self.rows.iter().all(|r| !r.is_empty())
    }

    /// Dense f64 copy (entries are small integers, the cast is exact).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.cols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v as f64;
            }
        }
        m
    }

    /// Dense labelled operator with the same entries.
    pub fn to_operator(
        &self,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> LinearOperator {
        LinearOperator::new(self.to_dense(), source, target)
    }
}
