//! Cone descriptions and cone-wise helpers.

use crate::error::ConicError;
use crate::linalg::{min_eigenvalue, smat_dense, tri_dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `m` equality rows (slack fixed at zero).
    Zero(usize),
    /// `m` componentwise nonnegative slacks.
    NonNeg(usize),
    /// `n x n` positive semidefinite slack, packed with `svec`.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(m) | Cone::NonNeg(m) => m,
            Cone::Psd(n) => tri_dim(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeSpec {
    cones: Vec<Cone>,
}

impl ConeSpec {
    pub fn new(cones: Vec<Cone>) -> Result<Self, ConicError> {
        if cones.is_empty() {
            return Err(ConicError::Malformed("cone list is empty".into()));
        }
        if cones.iter().any(|c| matches!(c, Cone::Psd(0))) {
            return Err(ConicError::Malformed("PSD cone of size 0".into()));
        }
        Ok(Self { cones })
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn dim(&self) -> usize {
        self.cones.iter().map(Cone::dim).sum()
    }

    /// `(cone, row offset)` pairs.
    pub fn blocks(&self) -> impl Iterator<Item = (Cone, usize)> + '_ {
        self.cones.iter().scan(0usize, |off, &c| {
            let start = *off;
            *off += c.dim();
            Some((c, start))
        })
    }

    /// Largest violation of membership of `s` in the cone (0 when inside).
    pub fn violation(&self, s: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (cone, off) in self.blocks() {
            let blk = &s[off..off + cone.dim()];
            let v = match cone {
                Cone::Zero(_) => blk.iter().fold(0.0f64, |a, x| a.max(x.abs())),
                Cone::NonNeg(_) => blk.iter().fold(0.0f64, |a, x| a.max(-x)),
                Cone::Psd(n) => (-min_eigenvalue(&smat_dense(blk, n))).max(0.0),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Largest violation of membership of `y` in the dual cone.
    pub fn dual_violation(&self, y: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (cone, off) in self.blocks() {
            let blk = &y[off..off + cone.dim()];
            let v = match cone {
                Cone::Zero(_) => 0.0,
                Cone::NonNeg(_) => blk.iter().fold(0.0f64, |a, x| a.max(-x)),
                Cone::Psd(n) => (-min_eigenvalue(&smat_dense(blk, n))).max(0.0),
            };
            worst = worst.max(v);
        }
        worst
    }
}
