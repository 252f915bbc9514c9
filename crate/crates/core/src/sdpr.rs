//! One-shot lower bounds: the lifted SDP relaxation and its nuclear-norm
//! tightened variant.
//!
//! The product `ΠZ` is replaced by a free matrix `G`. For every input row
//! `r` (of node `i`) and state column `m`, with `v = (G_rm, Z_rm, π_i)`,
//! the lifted block `[[V, v],[vᵀ, 1]] ⪰ 0` stands in for `V = vvᵀ` and the
//! row `trace(EV) = eᵀv`, i.e. `V₂₃ = G_rm`, for `G = πZ`.

use std::time::Instant;

use nalgebra::DMatrix;
use saa_conic::linalg::{min_eigenvalue, sym_eig_dense};
use saa_conic::{solve, ConicProblem, LinExpr, MatExpr, Model, SolverSettings};

use crate::error::CoreError;
use crate::lmi::{
    add_period_vars, add_selection_rows, main_lmi, objective_expr, status_error, usable, BoundDirection, BoundValue,
    LinfDecision, Point, SelectionProblem,
};

/// Index of one lifted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub period: usize,
    pub node: usize,
    /// Input row of `Z` (global within the period).
    pub row: usize,
    /// State column.
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct RelaxationDecision {
    pub base: LinfDecision,
    pub g: Vec<MatExpr>,
    pub triples: Vec<(Triple, MatExpr)>,
}

/// The relaxation with `trace(V) ≤ 1` added per block when `nuclear` is set.
/// `V` is PSD through the lifted block, so its nuclear norm is its trace.
pub fn build_relaxation(
    prob: &SelectionProblem,
    nuclear: bool,
) -> Result<(ConicProblem, RelaxationDecision), CoreError> {
    prob.validate()?;
    let mut model = Model::new();
    let pi: Vec<LinExpr> = (0..prob.len()).map(|_| model.scalar()).collect();
    add_selection_rows(&mut model, &prob.logistics, &pi);
    let n = prob.n_nodes();
    let mut periods = Vec::with_capacity(prob.n_periods());
    let mut gs = Vec::with_capacity(prob.n_periods());
    let mut triples = Vec::new();
    for (j, p) in prob.periods.iter().enumerate() {
        let v = add_period_vars(&mut model, p, None);
        let g = model.matrix(p.n_u(), p.n_x());
        model.add_nsd(&main_lmi(p, &v, &g.left_mul(&p.b)));
        for (node, range) in p.node_ranges().into_iter().enumerate() {
            let pi_e = &pi[j * n + node];
            for row in range {
                for col in 0..p.n_x() {
                    let vm = model.sym_matrix(3);
                    let vec = [g.get(row, col).clone(), v.z.get(row, col).clone(), pi_e.clone()];
                    // V₂₃ = G
                    model.add_eq(vm.get(1, 2).clone() - vec[0].clone());
                    let lifted = MatExpr::from_fn(4, 4, |a, b| match (a, b) {
                        (3, 3) => LinExpr::constant(1.0),
                        (3, k) | (k, 3) => vec[k].clone(),
                        (a, b) => vm.get(a, b).clone(),
                    });
                    model.add_psd(&lifted);
                    if nuclear {
                        let tr = vm.get(0, 0).clone() + vm.get(1, 1).clone() + vm.get(2, 2).clone();
                        model.add_le(tr - LinExpr::constant(1.0));
                    }
                    triples.push((
                        Triple {
                            period: j,
                            node,
                            row,
                            col,
                        },
                        vm,
                    ));
                }
            }
        }
        periods.push(v);
        gs.push(g);
    }
    let base = LinfDecision { periods, pi };
    model.minimize(objective_expr(prob, &base));
    Ok((model.build()?, RelaxationDecision { base, g: gs, triples }))
}

pub fn build_sdpr(prob: &SelectionProblem) -> Result<(ConicProblem, RelaxationDecision), CoreError> {
    build_relaxation(prob, false)
}

pub fn build_sdprn(prob: &SelectionProblem) -> Result<(ConicProblem, RelaxationDecision), CoreError> {
    build_relaxation(prob, true)
}

#[derive(Debug, Clone)]
pub struct LiftedBlock {
    pub triple: Triple,
    pub v: DMatrix<f64>,
    /// `(G_rm, Z_rm, π_i)`.
    pub vec: [f64; 3],
}

impl LiftedBlock {
    /// `|trace(EV) − eᵀv|` with `E` the symmetric selector of `V₂₃`.
    pub fn trace_residual(&self) -> f64 {
        (self.v[(1, 2)] - self.vec[0]).abs()
    }

    /// Smallest eigenvalue of `[[V, v],[vᵀ, 1]]`.
    pub fn lifted_min_eig(&self) -> f64 {
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (3, 3)).copy_from(&self.v);
        for k in 0..3 {
            m[(k, 3)] = self.vec[k];
            m[(3, k)] = self.vec[k];
        }
        m[(3, 3)] = 1.0;
        min_eigenvalue(&m)
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub bound: BoundValue,
    pub nuclear: bool,
    pub point: Point,
    pub g: Vec<DMatrix<f64>>,
    pub blocks: Vec<LiftedBlock>,
    /// Largest `λ₂/λ₁` over the blocks.
    pub tightness: f64,
    pub iterations: usize,
    pub seconds: f64,
}

pub fn solve_relaxation(
    prob: &SelectionProblem,
    nuclear: bool,
    settings: &SolverSettings,
) -> Result<RelaxationResult, CoreError> {
    let t0 = Instant::now();
    let (cp, d) = build_relaxation(prob, nuclear)?;
    let sol = solve(&cp, settings)?;
    if !usable(&sol) {
        return Err(status_error(sol.status, if nuclear { "SDP-RN" } else { "SDP-R" }));
    }
    let x = &sol.x;
    let point = d.base.extract(x);
    let blocks: Vec<LiftedBlock> = d
        .triples
        .iter()
        .map(|(t, vm)| {
            let pi = point.pi[t.period * prob.n_nodes() + t.node];
            LiftedBlock {
                triple: *t,
                v: vm.eval(x),
                vec: [
                    d.g[t.period].get(t.row, t.col).eval(x),
                    point.z[t.period][(t.row, t.col)],
                    pi,
                ],
            }
        })
        .collect();
    let tightness = blocks.iter().map(|b| rank1_ratio(&b.v)).fold(0.0, f64::max);
    Ok(RelaxationResult {
        bound: BoundValue {
            value: prob.objective(&point.pi, &point.perf),
            direction: BoundDirection::Lower,
        },
        nuclear,
        g: d.g.iter().map(|g| g.eval(x)).collect(),
        point,
        blocks,
        tightness,
        iterations: sol.iterations,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// `λ₂/λ₁` of a PSD matrix, eigenvalues in decreasing order (0 for `V = 0`).
pub fn rank1_ratio(v: &DMatrix<f64>) -> f64 {
    let (ev, _) = sym_eig_dense(v);
    let k = ev.len();
    let l1 = ev[k - 1];
    if l1 <= 0.0 {
        return 0.0;
    }
    (ev[k - 2].max(0.0)) / l1
}

pub const TIGHT_RATIO: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub tight: bool,
}

pub fn certify_rank1(result: &RelaxationResult) -> TightnessReport {
    certify_blocks(result.blocks.iter().map(|b| &b.v))
}

pub fn certify_blocks<'a>(vs: impl Iterator<Item = &'a DMatrix<f64>>) -> TightnessReport {
    let ratios: Vec<f64> = vs.map(rank1_ratio).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    TightnessReport {
        tight: max_ratio <= TIGHT_RATIO,
        max_ratio,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::assemble_multiperiod;
    use crate::system::benchmark_spec;

    fn lifted(v: [f64; 3], vm: DMatrix<f64>) -> LiftedBlock {
        LiftedBlock {
            triple: Triple {
                period: 0,
                node: 0,
                row: 0,
                col: 0,
            },
            v: vm,
            vec: v,
        }
    }

    #[test]
    fn trace_identity_examples() {
        let v = nalgebra::DVector::from_vec(vec![2.0, 1.0, 2.0]);
        let b = lifted([2.0, 1.0, 2.0], &v * v.transpose());
        assert!(b.trace_residual() < 1e-15);
        let w = nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0]);
        let b = lifted([1.0, 1.0, 2.0], &w * w.transpose());
        assert!((b.trace_residual() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank1_ratio_examples() {
        let v = nalgebra::DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let r = certify_blocks([&v * v.transpose()].iter());
        assert!(r.tight && r.max_ratio < 1e-12);
        let r = certify_blocks([DMatrix::identity(3, 3)].iter());
        assert!(!r.tight && (r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relaxation_algebra_on_benchmark() {
        let prob = assemble_multiperiod(&benchmark_spec(3, 1).unwrap()).unwrap();
        let s = SolverSettings::with_tolerance(1e-9);
        let r = solve_relaxation(&prob, false, &s).unwrap();
        let rn = solve_relaxation(&prob, true, &s).unwrap();
        assert!(rn.bound.value >= r.bound.value - 1e-6);
        for res in [&r, &rn] {
            assert_eq!(res.blocks.len(), 3 * 6);
            for b in &res.blocks {
                assert!(b.trace_residual() <= 1e-7);
                assert!(b.lifted_min_eig() >= -1e-7);
            }
        }
        for b in &rn.blocks {
            assert!(b.v.trace() <= 1.0 + 1e-7);
        }
    }
}
