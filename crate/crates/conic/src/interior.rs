//! Strictly feasible points via a maximum-margin auxiliary problem.

use crate::cone::{Cone, ConeSpec};
use crate::error::ConicError;
use crate::linalg::svec_index;
use crate::problem::ConicProblem;
use crate::solution::{ConicSolution, SolveStatus, SolverSettings};
use crate::sparse::CscMatrix;

/// Default required margin.
pub const EPS_INTERIOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum InteriorResult {
    /// `x` whose inequality slacks contain `margin·e`.
    Point { x: Vec<f64>, margin: f64 },
    /// No point with margin at least the requested one exists.
    Infeasible { best_margin: Option<f64> },
}

/// Solves `max t s.t. A x + t·e + s' = b, s' ∈ K, t ≤ 1`, where `e` is the
/// identity of every nonnegative and PSD cone (zero cones untouched).
pub fn strict_interior(
    problem: &ConicProblem,
    settings: &SolverSettings,
    margin: f64,
) -> Result<InteriorResult, ConicError> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_rows();
    let t = n;
    let mut trip = Vec::with_capacity(problem.a.nnz() + m + 1);
    for j in 0..n {
        for (i, v) in problem.a.col(j) {
            trip.push((i, j, v));
        }
    }
    for (cone, off) in problem.cones.blocks() {
        match cone {
            Cone::Zero(_) => {}
            Cone::NonNeg(k) => (0..k).for_each(|i| trip.push((off + i, t, 1.0))),
            Cone::Psd(k) => (0..k).for_each(|i| trip.push((off + svec_index(i, i), t, 1.0))),
        }
    }
    // t ≤ 1
    trip.push((m, t, 1.0));
    let a = CscMatrix::from_triplets(m + 1, n + 1, &trip)?;
    let mut b = problem.b.clone();
    b.push(1.0);
    let mut cones = problem.cones.cones().to_vec();
    cones.push(Cone::NonNeg(1));
    let mut c = vec![0.0; n + 1];
    c[t] = -1.0;
    let aux = ConicProblem::new(c, a, b, ConeSpec::new(cones)?)?;
    let sol: ConicSolution = crate::solve(&aux, settings)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::MaxIter => {
            let x = sol.x[..n].to_vec();
            let ax = problem.a.mul_vec(&x);
            let s: Vec<f64> = (0..m).map(|i| problem.b[i] - ax[i]).collect();
            let eq_ok = equality_residual(&problem.cones, &s) <= 1e-6 * (1.0 + crate::problem::norm2(&problem.b));
            let measured = measured_margin(&problem.cones, &s);
            if eq_ok && measured >= margin {
                Ok(InteriorResult::Point { x, margin: measured })
            } else {
                Ok(InteriorResult::Infeasible {
                    best_margin: Some(sol.x[t]),
                })
            }
        }
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible | SolveStatus::NumericalFailure => {
            Ok(InteriorResult::Infeasible { best_margin: None })
        }
    }
}

fn equality_residual(cones: &ConeSpec, s: &[f64]) -> f64 {
    cones
        .blocks()
        .filter(|(c, _)| matches!(c, Cone::Zero(_)))
        .flat_map(|(c, off)| s[off..off + c.dim()].iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue or entry over the inequality cones of `s`
/// (`+∞` if there are none).
pub fn measured_margin(cones: &ConeSpec, s: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for (cone, off) in cones.blocks() {
        let blk = &s[off..off + cone.dim()];
        match cone {
            Cone::Zero(_) => {}
            Cone::NonNeg(_) => {
                worst = blk.iter().copied().fold(worst, f64::min);
            }
            Cone::Psd(k) => {
                worst = worst.min(crate::linalg::min_eigenvalue(&crate::linalg::smat_dense(blk, k)));
            }
        }
    }
    worst
}
