//! Compressed sparse column storage.

use nalgebra::DMatrix;

use crate::error::ConicError;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, ConicError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(ConicError::Malformed(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        let mut cols = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                cols.push(c);
                last = Some((r, c));
            }
        }
        let mut keep_r = Vec::with_capacity(row_idx.len());
        let mut keep_v = Vec::with_capacity(row_idx.len());
        for ((r, v), c) in row_idx.into_iter().zip(values).zip(cols) {
            if v != 0.0 {
                keep_r.push(r);
                keep_v.push(v);
                col_ptr[c + 1] += 1;
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx: keep_r,
            values: keep_v,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate().take(self.ncols) {
            if xj == 0.0 {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| self.col(j).map(|(i, v)| v * x[i]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                trip.push((j, i, v));
            }
        }
        CscMatrix::from_triplets(self.ncols, self.nrows, &trip).expect("transpose of valid matrix")
    }

    /// Rows `rows` (in the given order) as a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> CscMatrix {
        let mut map = vec![usize::MAX; self.nrows];
        for (new, &old) in rows.iter().enumerate() {
            map[old] = new;
        }
        let mut trip = Vec::new();
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                if map[i] != usize::MAX {
                    trip.push((map[i], j, v));
                }
            }
        }
        CscMatrix::from_triplets(rows.len(), self.ncols, &trip).expect("row selection")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_products() {
        let a = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 0, 1.5), (1, 1, 0.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![2.5, 2.0]);
        assert_eq!(a.tmul_vec(&[1.0, 2.0]), vec![2.5, 0.0, 4.0]);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        assert!(CscMatrix::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }
}
