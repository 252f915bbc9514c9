//! Linear rows `H π ≤ h` over the stacked selection vector.
//!
//! Entries are indexed period-major: node `i` in period `j` sits at
//! `j * n_nodes + i` (both zero-based).

use nalgebra::DMatrix;

use crate::error::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConstraints {
    n_nodes: usize,
    periods: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LogisticConstraints {
    /// No rows.
    pub fn empty(n_nodes: usize, periods: usize) -> Self {
        Self {
            n_nodes,
            periods,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn from_matrix(n_nodes: usize, periods: usize, h: &DMatrix<f64>, rhs: &[f64]) -> Result<Self, CoreError> {
        if h.nrows() != rhs.len() {
            return Err(CoreError::Dimension(format!(
                "H has {} rows but h has length {}",
                h.nrows(),
                rhs.len()
            )));
        }
        if h.nrows() > 0 && h.ncols() != n_nodes * periods {
            return Err(CoreError::Dimension(format!(
                "H has {} columns, expected {}",
                h.ncols(),
                n_nodes * periods
            )));
        }
        let rows = (0..h.nrows())
            .map(|r| (0..h.ncols()).map(|c| h[(r, c)]).collect())
            .collect();
        let out = Self {
            n_nodes,
            periods,
            rows,
            rhs: rhs.to_vec(),
        };
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.rows.iter().flatten().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(CoreError::Dimension("non-finite logistic data".into()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn width(&self) -> usize {
        self.n_nodes * self.periods
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.rows.iter().map(|r| r.as_slice()).zip(self.rhs.iter().copied())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.width(), |r, c| self.rows[r][c])
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn index(&self, node: usize, period: usize) -> Result<usize, CoreError> {
        if node >= self.n_nodes || period >= self.periods {
            return Err(CoreError::Index(format!(
                "node {node}, period {period} outside {} nodes x {} periods",
                self.n_nodes, self.periods
            )));
        }
        Ok(period * self.n_nodes + node)
    }

    pub fn push_row(&mut self, row: Vec<f64>, rhs: f64) -> Result<(), CoreError> {
        if row.len() != self.width() {
            return Err(CoreError::Dimension(format!(
                "row of length {} for width {}",
                row.len(),
                self.width()
            )));
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        self.validate()
    }

    pub fn extend(&mut self, other: &LogisticConstraints) -> Result<(), CoreError> {
        if other.n_nodes != self.n_nodes || other.periods != self.periods {
            return Err(CoreError::Dimension("logistic shapes differ".into()));
        }
        self.rows.extend(other.rows.iter().cloned());
        self.rhs.extend(other.rhs.iter().copied());
        Ok(())
    }

    /// `Hπ ≤ h` on a real vector, with absolute slack `tol`.
    pub fn satisfied_by(&self, pi: &[f64], tol: f64) -> bool {
        self.rows()
            .all(|(r, h)| r.iter().zip(pi).map(|(a, b)| a * b).sum::<f64>() <= h + tol)
    }

    /// `Hπ ≤ h` on a binary vector. Sums only the selected columns, which is
    /// exact for integer-valued rows.
    pub fn satisfied_by_binary(&self, pi: &[bool]) -> bool {
        self.rows().all(|(r, h)| {
            let lhs: f64 = r.iter().zip(pi).filter(|(_, &on)| on).map(|(a, _)| *a).sum();
            lhs <= h + 1e-9 * (1.0 + h.abs())
        })
    }

    /// Largest `Hπ − h` over the rows (`-∞` with no rows).
    pub fn max_violation(&self, pi: &[f64]) -> f64 {
        self.rows()
            .map(|(r, h)| r.iter().zip(pi).map(|(a, b)| a * b).sum::<f64>() - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Σ_i π_i^j ≥ lower` for every period `j`, as `−1ᵀπ^j ≤ −lower`.
pub fn min_count_constraint(n_nodes: usize, periods: usize, lower: usize) -> Result<LogisticConstraints, CoreError> {
    if lower > n_nodes {
        return Err(CoreError::InfeasibleSpec(format!(
            "at least {lower} of {n_nodes} nodes requested"
        )));
    }
    let mut out = LogisticConstraints::empty(n_nodes, periods);
    for j in 0..periods {
        let mut row = vec![0.0; n_nodes * periods];
        if lower > 0 {
            row[j * n_nodes..(j + 1) * n_nodes].iter_mut().for_each(|v| *v = -1.0);
        }
        out.push_row(row, -(lower as f64))?;
    }
    Ok(out)
}

fn check_pair(c: &LogisticConstraints, k: usize, i: usize, j: usize) -> Result<(usize, usize), CoreError> {
    if j + 1 >= c.periods {
        return Err(CoreError::Index(format!(
            "period {j} has no successor among {} periods",
            c.periods
        )));
    }
    Ok((c.index(k, j + 1)?, c.index(i, j)?))
}

/// `π_k^{j+1} ≤ π_i^j`: node `k` may be selected in period `j+1` only if
/// node `i` was selected in period `j`.
pub fn precedence_constraint(
    n_nodes: usize,
    periods: usize,
    k: usize,
    i: usize,
    j: usize,
) -> Result<LogisticConstraints, CoreError> {
    let mut out = LogisticConstraints::empty(n_nodes, periods);
    let (a, b) = check_pair(&out, k, i, j)?;
    let mut row = vec![0.0; out.width()];
    row[a] += 1.0;
    row[b] -= 1.0;
    out.push_row(row, 0.0)?;
    Ok(out)
}

/// `π_k^{j+1} ≤ 1 − π_i^j`: node `k` must be off in period `j+1` if node `i`
/// was on in period `j`.
pub fn exclusion_constraint(
    n_nodes: usize,
    periods: usize,
    k: usize,
    i: usize,
    j: usize,
) -> Result<LogisticConstraints, CoreError> {
    let mut out = LogisticConstraints::empty(n_nodes, periods);
    let (a, b) = check_pair(&out, k, i, j)?;
    let mut row = vec![0.0; out.width()];
    row[a] += 1.0;
    row[b] += 1.0;
    out.push_row(row, 1.0)?;
    Ok(out)
}

/// Pins `π_i^j` to `value`: `π ≤ 0` for 0, `−π ≤ −1` for 1.
pub fn fix_constraint(
    n_nodes: usize,
    periods: usize,
    i: usize,
    j: usize,
    value: bool,
) -> Result<LogisticConstraints, CoreError> {
    let mut out = LogisticConstraints::empty(n_nodes, periods);
    let idx = out.index(i, j)?;
    let mut row = vec![0.0; out.width()];
    if value {
        row[idx] = -1.0;
        out.push_row(row, -1.0)?;
    } else {
        row[idx] = 1.0;
        out.push_row(row, 0.0)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_rows() {
        let c = min_count_constraint(5, 1, 5 / 4).unwrap();
        assert_eq!(c.rhs(), &[-1.0]);
        assert!(c.rows().next().unwrap().0.iter().all(|&v| v == -1.0));
        let c8 = min_count_constraint(8, 1, 8 / 4).unwrap();
        assert_eq!(c8.rhs(), &[-2.0]);
        let zero = min_count_constraint(3, 1, 0).unwrap();
        let (row, h) = zero.rows().next().unwrap();
        assert!(row.iter().all(|&v| v == 0.0));
        assert_eq!(h, 0.0);
        assert!(matches!(
            min_count_constraint(3, 1, 4),
            Err(CoreError::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn precedence_and_exclusion_patterns() {
        // nodes and periods are zero-based: node 2 / period 2 is (1, 1)
        let p = precedence_constraint(2, 2, 1, 0, 0).unwrap();
        let (row, h) = p.rows().next().unwrap();
        assert_eq!(row, &[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(h, 0.0);
        let e = exclusion_constraint(2, 2, 1, 0, 0).unwrap();
        let (row, h) = e.rows().next().unwrap();
        assert_eq!(row, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(h, 1.0);
        assert!(precedence_constraint(2, 2, 1, 0, 1).is_err());
        assert!(precedence_constraint(2, 2, 2, 0, 0).is_err());
    }

    #[test]
    fn fix_row() {
        let f = fix_constraint(4, 1, 2, 0, false).unwrap();
        let (row, h) = f.rows().next().unwrap();
        assert_eq!(row, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(h, 0.0);
        assert!(!f.satisfied_by_binary(&[false, false, true, false]));
        assert!(f.satisfied_by_binary(&[true, true, false, true]));
    }
}
