//! A small affine modeling layer on top of [`ConicProblem`].
//!
//! Scalars are [`LinExpr`]s (sparse linear form plus constant); matrices are
//! [`MatExpr`]s holding one `LinExpr` per entry.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::cone::{Cone, ConeSpec};
use crate::error::ConicError;
use crate::linalg::{tri_dim, SQRT2};
use crate::problem::ConicProblem;
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        Self {
            terms: vec![(idx, coef)],
            constant: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn add_scaled(&mut self, other: &LinExpr, f: f64) {
        if f == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * f)));
        self.constant += other.constant * f;
    }

    pub fn scaled(&self, f: f64) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, f);
        out
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compact(&mut self) {
        if self.terms.len() <= 1 {
            self.terms.retain(|&(_, c)| c != 0.0);
            return;
        }
        self.terms.sort_unstable_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Dense matrix of affine expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    data: Vec<LinExpr>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![LinExpr::zero(); rows * cols],
        }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = LinExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&DMatrix::identity(n, n))
    }

    pub fn scalar(e: LinExpr) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![e],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.data[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.data[i * self.cols + j] = e;
    }

    pub fn transpose(&self) -> MatExpr {
        MatExpr::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn scale(&self, f: f64) -> MatExpr {
        MatExpr {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|e| e.scaled(f)).collect(),
        }
    }

    fn check_same(&self, other: &MatExpr) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }

    pub fn add(&self, other: &MatExpr) -> MatExpr {
        self.check_same(other);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            a.add_scaled(b, 1.0);
            a.compact();
        }
        out
    }

    pub fn sub(&self, other: &MatExpr) -> MatExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn add_constant(&self, m: &DMatrix<f64>) -> MatExpr {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.get_mut(i, j).constant += m[(i, j)];
            }
        }
        out
    }

    /// `M · self`
    pub fn left_mul(&self, m: &DMatrix<f64>) -> MatExpr {
        assert_eq!(m.ncols(), self.rows, "left_mul shape mismatch");
        MatExpr::from_fn(m.nrows(), self.cols, |i, j| {
            let mut e = LinExpr::zero();
            for k in 0..self.rows {
                let f = m[(i, k)];
                if f != 0.0 {
                    e.add_scaled(self.get(k, j), f);
                }
            }
            e.compact();
            e
        })
    }

    /// `self · M`
    pub fn right_mul(&self, m: &DMatrix<f64>) -> MatExpr {
        assert_eq!(m.nrows(), self.cols, "right_mul shape mismatch");
        MatExpr::from_fn(self.rows, m.ncols(), |i, j| {
            let mut e = LinExpr::zero();
            for k in 0..self.cols {
                let f = m[(k, j)];
                if f != 0.0 {
                    e.add_scaled(self.get(i, k), f);
                }
            }
            e.compact();
            e
        })
    }

    /// `self + selfᵀ`
    pub fn sym_sum(&self) -> MatExpr {
        self.add(&self.transpose())
    }

    /// Assembles a block matrix; `None` entries are zero blocks. Every block
    /// row must have a consistent height and every block column a consistent
    /// width, determined by its `Some` entries.
    pub fn blocks(grid: &[Vec<Option<&MatExpr>>]) -> MatExpr {
        let br = grid.len();
        let bc = grid[0].len();
        let mut heights = vec![usize::MAX; br];
        let mut widths = vec![usize::MAX; bc];
        for (i, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), bc, "ragged block grid");
            for (j, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    if heights[i] == usize::MAX {
                        heights[i] = m.rows;
                    }
                    if widths[j] == usize::MAX {
                        widths[j] = m.cols;
                    }
                    assert_eq!(heights[i], m.rows, "block row height mismatch");
                    assert_eq!(widths[j], m.cols, "block column width mismatch");
                }
            }
        }
        assert!(
            heights.iter().chain(&widths).all(|&d| d != usize::MAX),
            "every block row and column needs at least one block"
        );
        let rows: usize = heights.iter().sum();
        let cols: usize = widths.iter().sum();
        let mut out = MatExpr::zeros(rows, cols);
        let mut r0 = 0;
        for (i, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (j, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for a in 0..m.rows {
                        for c in 0..m.cols {
                            out.set(r0 + a, c0 + c, m.get(a, c).clone());
                        }
                    }
                }
                c0 += widths[j];
            }
            r0 += heights[i];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    pub fn entries(&self) -> impl Iterator<Item = &LinExpr> {
        self.data.iter()
    }
}

/// Accumulates variables, constraints and a linear objective.
#[derive(Debug, Clone, Default)]
pub struct Model {
    nvars: usize,
    objective: LinExpr,
    zero_rows: Vec<LinExpr>,
    nonneg_rows: Vec<LinExpr>,
    psd: Vec<(usize, Vec<LinExpr>)>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn new_var(&mut self) -> usize {
        self.nvars += 1;
        self.nvars - 1
    }

    pub fn scalar(&mut self) -> LinExpr {
        LinExpr::var(self.new_var())
    }

    /// Symmetric `n x n` matrix variable with `n(n+1)/2` free entries.
    pub fn sym_matrix(&mut self, n: usize) -> MatExpr {
        let mut out = MatExpr::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = self.new_var();
                out.set(i, j, LinExpr::var(v));
                out.set(j, i, LinExpr::var(v));
            }
        }
        out
    }

    /// General `r x c` matrix variable.
    pub fn matrix(&mut self, r: usize, c: usize) -> MatExpr {
        MatExpr::from_fn(r, c, |_, _| LinExpr::var(self.new_var()))
    }

    /// `e = 0`; rows that are identically zero are dropped.
    pub fn add_eq(&mut self, mut e: LinExpr) {
        e.compact();
        if e.terms.is_empty() && e.constant == 0.0 {
            return;
        }
        self.zero_rows.push(e);
    }

    /// `e ≤ 0`
    pub fn add_le(&mut self, mut e: LinExpr) {
        e.compact();
        self.nonneg_rows.push(e);
    }

    /// `e ≥ 0`
    pub fn add_ge(&mut self, e: LinExpr) {
        self.add_le(-e);
    }

    /// `M ⪰ 0` for square `M`; the symmetric part is used.
    pub fn add_psd(&mut self, m: &MatExpr) {
        assert_eq!(m.rows, m.cols, "PSD constraint needs a square matrix");
        let n = m.rows;
        let mut packed = Vec::with_capacity(tri_dim(n));
        for j in 0..n {
            for i in 0..=j {
                let mut e = if i == j {
                    m.get(i, i).clone()
                } else {
                    let mut e = m.get(i, j).scaled(0.5 * SQRT2);
                    e.add_scaled(m.get(j, i), 0.5 * SQRT2);
                    e
                };
                e.compact();
                packed.push(e);
            }
        }
        self.psd.push((n, packed));
    }

    /// `M ⪯ 0`
    pub fn add_nsd(&mut self, m: &MatExpr) {
        self.add_psd(&m.scale(-1.0));
    }

    pub fn minimize(&mut self, mut e: LinExpr) {
        e.compact();
        self.objective = e;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Offset of the objective, not representable in `cᵀx`.
    pub fn objective_constant(&self) -> f64 {
        self.objective.constant
    }

    /// Emits `min cᵀx s.t. Ax + s = b` with cones ordered zero, nonnegative,
    /// then PSD blocks in insertion order.
    pub fn build(&self) -> Result<ConicProblem, ConicError> {
        let mut c = vec![0.0; self.nvars];
        for &(i, v) in &self.objective.terms {
            c[i] += v;
        }
        let mut trip = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;
        // Zero and nonnegative rows: a·x + k (=, ≤) 0  ->  A = a, b = −k.
        for rows in [&self.zero_rows, &self.nonneg_rows] {
            for e in rows.iter() {
                for &(j, v) in &e.terms {
                    trip.push((row, j, v));
                }
                b.push(-e.constant);
                row += 1;
            }
        }
        if !self.zero_rows.is_empty() {
            cones.push(Cone::Zero(self.zero_rows.len()));
        }
        if !self.nonneg_rows.is_empty() {
            cones.push(Cone::NonNeg(self.nonneg_rows.len()));
        }
        // PSD: s = svec(M) = M_lin x + M_const  ->  A = −M_lin, b = M_const.
        for (n, packed) in &self.psd {
            for e in packed {
                for &(j, v) in &e.terms {
                    trip.push((row, j, -v));
                }
                b.push(e.constant);
                row += 1;
            }
            cones.push(Cone::Psd(*n));
        }
        let a = CscMatrix::from_triplets(row, self.nvars, &trip)?;
        ConicProblem::new(c, a, b, ConeSpec::new(cones)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matexpr_products_match_dense() {
        let mut m = Model::new();
        let x = m.matrix(2, 3);
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let r = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 3.0]);
        let e = x.left_mul(&l).right_mul(&r);
        let vals: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let xv = x.eval(&vals);
        let expected = &l * xv * &r;
        assert!((e.eval(&vals) - expected).norm() < 1e-14);
    }

    #[test]
    fn blocks_layout() {
        let a = MatExpr::identity(2);
        let b = MatExpr::constant(&DMatrix::from_element(2, 1, 3.0));
        let bt = b.transpose();
        let m = MatExpr::blocks(&[vec![Some(&a), Some(&b)], vec![Some(&bt), None]]);
        let v = m.eval(&[]);
        assert_eq!(v.nrows(), 3);
        assert_eq!(v[(0, 2)], 3.0);
        assert_eq!(v[(2, 1)], 3.0);
        assert_eq!(v[(2, 2)], 0.0);
    }
}
