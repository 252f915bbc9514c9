//! Operator splitting on the homogeneous self-dual embedding, with Ruiz
//! equilibration and over-relaxation.

use nalgebra::DVector;

use crate::cone::Cone;
use crate::linalg::{project_psd_from_eig, smat_dense, svec_dense, sym_eig_dense};
use crate::problem::{dot, norm2, ConicProblem};
use crate::solution::{ConicSolution, SolveStatus, SolverSettings};
use crate::sparse::CscMatrix;

pub(crate) struct Equilibration {
    pub(crate) d: Vec<f64>,
    pub(crate) e: Vec<f64>,
}

pub(crate) fn equilibrate(p: &ConicProblem, enabled: bool) -> (CscMatrix, Equilibration) {
    let m = p.num_rows();
    let n = p.num_vars();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let mut a = p.a.clone();
    if !enabled {
        return (a, Equilibration { d, e });
    }
    for _ in 0..15 {
        let mut row_max = vec![0.0f64; m];
        let mut col_max = vec![0.0f64; n];
        for j in 0..n {
            for (i, v) in a.col(j) {
                row_max[i] = row_max[i].max(v.abs());
                col_max[j] = col_max[j].max(v.abs());
            }
        }
        let mut dr: Vec<f64> = row_max
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        // PSD blocks need one scale per block to preserve the cone.
        for (cone, off) in p.cones.blocks() {
            if let Cone::Psd(_) = cone {
                let blk = &mut dr[off..off + cone.dim()];
                let g = (blk.iter().map(|v| v.ln()).sum::<f64>() / blk.len() as f64).exp();
                blk.iter_mut().for_each(|v| *v = g);
            }
        }
        let ec: Vec<f64> = col_max
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        for j in 0..n {
            for k in a.col_ptr[j]..a.col_ptr[j + 1] {
                let i = a.row_idx[k];
                a.values[k] *= dr[i] * ec[j];
            }
        }
        for i in 0..m {
            d[i] *= dr[i];
        }
        for j in 0..n {
            e[j] *= ec[j];
        }
    }
    (a, Equilibration { d, e })
}

fn project_dual_cone(p: &ConicProblem, y: &mut [f64]) {
    for (cone, off) in p.cones.blocks() {
        let blk = &mut y[off..off + cone.dim()];
        match cone {
            Cone::Zero(_) => {}
            Cone::NonNeg(_) => blk.iter_mut().for_each(|v| *v = v.max(0.0)),
            Cone::Psd(n) => {
                let m = smat_dense(blk, n);
                let (vals, vecs) = sym_eig_dense(&m);
                let r = svec_dense(&project_psd_from_eig(&vals, &vecs));
                blk.copy_from_slice(&r);
            }
        }
    }
}

/// Projects onto the primal cone (zero cones map to zero).
fn project_primal_cone(p: &ConicProblem, s: &mut [f64]) {
    for (cone, off) in p.cones.blocks() {
        if let Cone::Zero(_) = cone {
            s[off..off + cone.dim()].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut tmp = s.to_vec();
    project_dual_cone(p, &mut tmp);
    for (cone, off) in p.cones.blocks() {
        if !matches!(cone, Cone::Zero(_)) {
            s[off..off + cone.dim()].copy_from_slice(&tmp[off..off + cone.dim()]);
        }
    }
}

pub(crate) fn solve_admm(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    let (a, eq) = equilibrate(p, settings.scaling);
    let b: Vec<f64> = (0..m).map(|i| p.b[i] * eq.d[i]).collect();
    let c: Vec<f64> = (0..n).map(|j| p.c[j] * eq.e[j]).collect();

    // (I + AᵀA) factorization
    let ad = a.to_dense();
    let mut k = ad.transpose() * &ad;
    for i in 0..n {
        k[(i, i)] += 1.0;
    }
    let chol = nalgebra::Cholesky::new(k).expect("I + AᵀA is positive definite");
    let solve_m = |wx: &[f64], wy: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let atwy = a.tmul_vec(wy);
        let rhs: Vec<f64> = (0..n).map(|i| wx[i] - atwy[i]).collect();
        let x = chol.solve(&DVector::from_column_slice(&rhs));
        let ax = a.mul_vec(x.as_slice());
        let y: Vec<f64> = (0..m).map(|i| wy[i] + ax[i]).collect();
        (x.as_slice().to_vec(), y)
    };
    let (gx, gy) = solve_m(&c, &b);
    let hg = dot(&c, &gx) + dot(&b, &gy);

    let alpha = settings.over_relaxation;
    let mut ux = vec![0.0; n];
    let mut uy = vec![0.0; m];
    let mut ut = 1.0;
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; m];
    let mut vt = 1.0;

    let unscale = |ux: &[f64], uy: &[f64], vy: &[f64], tau: f64| {
        let x: Vec<f64> = (0..n).map(|j| ux[j] * eq.e[j] / tau).collect();
        let y: Vec<f64> = (0..m).map(|i| uy[i] * eq.d[i] / tau).collect();
        let s: Vec<f64> = (0..m).map(|i| vy[i] / eq.d[i] / tau).collect();
        (x, y, s)
    };
    let eps_inf = settings.eps_infeas.max(settings.eps_rel);
    let mut best: Option<(f64, ConicSolution)> = None;

    for iter in 0..settings.max_iter {
        let wx: Vec<f64> = (0..n).map(|i| ux[i] + vx[i]).collect();
        let wy: Vec<f64> = (0..m).map(|i| uy[i] + vy[i]).collect();
        let wt = ut + vt;
        let (px, py) = solve_m(&wx, &wy);
        let tt = (wt + dot(&c, &px) + dot(&b, &py)) / (1.0 + hg);
        let tx: Vec<f64> = (0..n).map(|i| px[i] - tt * gx[i]).collect();
        let ty: Vec<f64> = (0..m).map(|i| py[i] - tt * gy[i]).collect();

        let rx: Vec<f64> = (0..n).map(|i| alpha * tx[i] + (1.0 - alpha) * ux[i]).collect();
        let ry: Vec<f64> = (0..m).map(|i| alpha * ty[i] + (1.0 - alpha) * uy[i]).collect();
        let rt = alpha * tt + (1.0 - alpha) * ut;

        let nx: Vec<f64> = (0..n).map(|i| rx[i] - vx[i]).collect();
        let mut ny: Vec<f64> = (0..m).map(|i| ry[i] - vy[i]).collect();
        project_dual_cone(p, &mut ny);
        let nt = (rt - vt).max(0.0);

        for i in 0..n {
            vx[i] += nx[i] - rx[i];
        }
        for i in 0..m {
            vy[i] += ny[i] - ry[i];
        }
        vt += nt - rt;
        ux = nx;
        uy = ny;
        ut = nt;

        if !(ut.is_finite() && ux.iter().all(|v| v.is_finite())) {
            return numerical_failure(p, iter);
        }

        if iter % 10 == 0 || iter + 1 == settings.max_iter {
            if ut > 1e-12 {
                let (x, y, mut s) = unscale(&ux, &uy, &vy, ut);
                project_primal_cone(p, &mut s);
                let r = p.residuals(&x, &y, &s);
                let merit = r.primal.max(r.dual).max(r.gap);
                let done = r.primal <= settings.eps_rel
                    && r.dual <= settings.eps_rel
                    && r.gap <= settings.eps_rel
                    && r.objective + dot(&p.b, &y) >= -settings.eps_abs * (1.0 + r.objective.abs());
                let sol = ConicSolution {
                    status: if done {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::MaxIter
                    },
                    objective: r.objective,
                    primal_residual: r.primal,
                    dual_residual: r.dual,
                    gap: r.gap,
                    x,
                    y,
                    s,
                    iterations: iter + 1,
                    certificate: None,
                };
                if done {
                    return sol;
                }
                if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                    best = Some((merit, sol));
                }
            }
            // infeasibility checks on unnormalized iterates
            let (x, y, s) = unscale(&ux, &uy, &vy, 1.0);
            let by = dot(&p.b, &y);
            if by < 0.0 {
                let aty = p.a.tmul_vec(&y);
                if norm2(&aty) / (-by) <= eps_inf {
                    let cert: Vec<f64> = y.iter().map(|v| v / (-by)).collect();
                    return certificate(p, SolveStatus::PrimalInfeasible, cert, iter);
                }
            }
            let cx = dot(&p.c, &x);
            if cx < 0.0 {
                let ax = p.a.mul_vec(&x);
                let mut sp = s.clone();
                project_primal_cone(p, &mut sp);
                let r: Vec<f64> = (0..m).map(|i| ax[i] + sp[i]).collect();
                if norm2(&r) / (-cx) <= eps_inf {
                    let cert: Vec<f64> = x.iter().map(|v| v / (-cx)).collect();
                    return certificate(p, SolveStatus::DualInfeasible, cert, iter);
                }
            }
        }
    }
    match best {
        Some((_, sol)) => sol,
        None => numerical_failure(p, settings.max_iter),
    }
}

fn certificate(p: &ConicProblem, status: SolveStatus, cert: Vec<f64>, iter: usize) -> ConicSolution {
    let (x, y) = if status == SolveStatus::PrimalInfeasible {
        (vec![0.0; p.num_vars()], cert.clone())
    } else {
        (cert.clone(), vec![0.0; p.num_rows()])
    };
    ConicSolution {
        status,
        objective: dot(&p.c, &x),
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        x,
        y,
        s: vec![0.0; p.num_rows()],
        iterations: iter + 1,
        certificate: Some(cert),
    }
}

fn numerical_failure(p: &ConicProblem, iter: usize) -> ConicSolution {
    ConicSolution {
        status: SolveStatus::NumericalFailure,
        objective: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        x: vec![0.0; p.num_vars()],
        y: vec![0.0; p.num_rows()],
        s: vec![0.0; p.num_rows()],
        iterations: iter,
        certificate: None,
    }
}
