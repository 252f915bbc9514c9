//! Homogeneous self-dual primal-dual interior-point method with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//!
//! Internally the problem is split into equality rows `A x = b` (zero cones)
//! and conic rows `G x + s = h`, `s ∈ K` (nonnegative and PSD cones).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::cone::Cone;
use crate::linalg::{min_eigenvalue, smat_dense, svec_dense, SQRT2};
use crate::problem::{dot, norm2, ConicProblem};
use crate::solution::{ConicSolution, SolveStatus, SolverSettings};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy)]
enum Blk {
    Lin { off: usize, len: usize },
    Psd { off: usize, n: usize },
}

struct Structure {
    n: usize,
    a: CscMatrix,
    g: CscMatrix,
    gt: CscMatrix,
    b: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
    blocks: Vec<Blk>,
    eq_rows: Vec<usize>,
    in_rows: Vec<usize>,
    /// Per PSD block: variables touching it with their `(local svec index, coef)`.
    psd_vars: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
    degree: usize,
}

impl Structure {
    fn new(p: &ConicProblem) -> Self {
        let mut eq_rows = Vec::new();
        let mut in_rows = Vec::new();
        let mut blocks = Vec::new();
        for (cone, off) in p.cones.blocks() {
            let d = cone.dim();
            match cone {
                Cone::Zero(_) => eq_rows.extend(off..off + d),
                Cone::NonNeg(m) => {
                    if m > 0 {
                        blocks.push(Blk::Lin {
                            off: in_rows.len(),
                            len: m,
                        });
                    }
                    in_rows.extend(off..off + d);
                }
                Cone::Psd(n) => {
                    blocks.push(Blk::Psd { off: in_rows.len(), n });
                    in_rows.extend(off..off + d);
                }
            }
        }
        let a = p.a.select_rows(&eq_rows);
        let g = p.a.select_rows(&in_rows);
        let gt = g.transpose();
        let mut psd_vars = Vec::new();
        let mut degree = 0;
        for blk in &blocks {
            match *blk {
                Blk::Lin { len, .. } => degree += len,
                Blk::Psd { off, n } => {
                    degree += n;
                    let mut map: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
                    for local in 0..n * (n + 1) / 2 {
                        for (var, v) in gt.col(off + local) {
                            map.entry(var).or_default().push((local, v));
                        }
                    }
                    psd_vars.push(map.into_iter().collect());
                }
            }
        }
        Self {
            n: p.num_vars(),
            b: eq_rows.iter().map(|&r| p.b[r]).collect(),
            h: in_rows.iter().map(|&r| p.b[r]).collect(),
            c: p.c.clone(),
            a,
            g,
            gt,
            blocks,
            eq_rows,
            in_rows,
            psd_vars,
            degree,
        }
    }

    fn m_eq(&self) -> usize {
        self.eq_rows.len()
    }

    fn m_in(&self) -> usize {
        self.in_rows.len()
    }
}

/// `(i, j)` with `i <= j` for a packed index.
#[inline]
fn svec_pos(idx: usize) -> (usize, usize) {
    let mut c = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while c * (c + 1) / 2 > idx {
        c -= 1;
    }
    while (c + 1) * (c + 2) / 2 <= idx {
        c += 1;
    }
    (idx - c * (c + 1) / 2, c)
}

enum Scale {
    Lin {
        d: Vec<f64>,
        lam: Vec<f64>,
    },
    Psd {
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
        qi: DMatrix<f64>,
        lam: Vec<f64>,
        ls: DMatrix<f64>,
        lz: DMatrix<f64>,
    },
}

fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}

fn build_scaling(st: &Structure, s: &[f64], z: &[f64]) -> Option<Vec<Scale>> {
    let mut out = Vec::with_capacity(st.blocks.len());
    for blk in &st.blocks {
        match *blk {
            Blk::Lin { off, len } => {
                let mut d = Vec::with_capacity(len);
                let mut lam = Vec::with_capacity(len);
                for i in off..off + len {
                    if !(s[i] > 0.0 && z[i] > 0.0) {
                        return None;
                    }
                    d.push((s[i] / z[i]).sqrt());
                    lam.push((s[i] * z[i]).sqrt());
                }
                out.push(Scale::Lin { d, lam });
            }
            Blk::Psd { off, n } => {
                let dim = n * (n + 1) / 2;
                let sm = smat_dense(&s[off..off + dim], n);
                let zm = smat_dense(&z[off..off + dim], n);
                let ls = cholesky_lower(&sm)?;
                let lz = cholesky_lower(&zm)?;
                let m = lz.transpose() * &ls;
                let svd = m.svd(true, true);
                let u = svd.u?;
                let vt = svd.v_t?;
                let sig = svd.singular_values;
                if sig.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return None;
                }
                let mut r = &ls * vt.transpose();
                let mut rinv = u.transpose() * lz.transpose();
                for j in 0..n {
                    let f = sig[j].sqrt();
                    for i in 0..n {
                        r[(i, j)] /= f;
                        rinv[(j, i)] /= f;
                    }
                }
                let qi = rinv.transpose() * &rinv;
                let lam = sig.iter().copied().collect();
                out.push(Scale::Psd {
                    r,
                    rinv,
                    qi,
                    lam,
                    ls,
                    lz,
                });
            }
        }
    }
    Some(out)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Applies a per-cone linear map to an inequality-space vector.
fn map_cones(
    st: &Structure,
    sc: &[Scale],
    v: &[f64],
    lin: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
    psd: impl Fn(&Scale, DMatrix<f64>) -> DMatrix<f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (blk, scale) in st.blocks.iter().zip(sc) {
        match (*blk, scale) {
            (Blk::Lin { off, len }, Scale::Lin { d, lam }) => {
                let r = lin(&v[off..off + len], d, lam);
                out[off..off + len].copy_from_slice(&r);
            }
            (Blk::Psd { off, n }, s @ Scale::Psd { .. }) => {
                let dim = n * (n + 1) / 2;
                let m = smat_dense(&v[off..off + dim], n);
                let r = svec_dense(&sym(psd(s, m)));
                out[off..off + dim].copy_from_slice(&r);
            }
            _ => unreachable!(),
        }
    }
    out
}

fn apply_w(st: &Structure, sc: &[Scale], v: &[f64]) -> Vec<f64> {
    map_cones(
        st,
        sc,
        v,
        |x, d, _| x.iter().zip(d).map(|(a, b)| a * b).collect(),
        |s, m| match s {
            Scale::Psd { r, .. } => r.transpose() * m * r,
            _ => unreachable!(),
        },
    )
}

fn apply_wt(st: &Structure, sc: &[Scale], v: &[f64]) -> Vec<f64> {
    map_cones(
        st,
        sc,
        v,
        |x, d, _| x.iter().zip(d).map(|(a, b)| a * b).collect(),
        |s, m| match s {
            Scale::Psd { r, .. } => r * m * r.transpose(),
            _ => unreachable!(),
        },
    )
}

fn apply_winv_t(st: &Structure, sc: &[Scale], v: &[f64]) -> Vec<f64> {
    map_cones(
        st,
        sc,
        v,
        |x, d, _| x.iter().zip(d).map(|(a, b)| a / b).collect(),
        |s, m| match s {
            Scale::Psd { rinv, .. } => rinv * m * rinv.transpose(),
            _ => unreachable!(),
        },
    )
}

/// `Φ = WᵀW`, mapping the dual space into the primal slack space.
fn apply_phi(st: &Structure, sc: &[Scale], v: &[f64]) -> Vec<f64> {
    let w = apply_w(st, sc, v);
    apply_wt(st, sc, &w)
}

fn apply_phi_inv(st: &Structure, sc: &[Scale], v: &[f64]) -> Vec<f64> {
    map_cones(
        st,
        sc,
        v,
        |x, d, _| x.iter().zip(d).map(|(a, b)| a / (b * b)).collect(),
        |s, m| match s {
            Scale::Psd { qi, .. } => qi * m * qi,
            _ => unreachable!(),
        },
    )
}

/// Scaled point `λ` as a packed vector.
fn lambda(st: &Structure, sc: &[Scale]) -> Vec<f64> {
    let mut out = vec![0.0; st.m_in()];
    for (blk, scale) in st.blocks.iter().zip(sc) {
        match (*blk, scale) {
            (Blk::Lin { off, len }, Scale::Lin { lam, .. }) => out[off..off + len].copy_from_slice(lam),
            (Blk::Psd { off, n }, Scale::Psd { lam, .. }) => {
                for i in 0..n {
                    out[off + i * (i + 1) / 2 + i] = lam[i];
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

fn identity(st: &Structure) -> Vec<f64> {
    let mut out = vec![0.0; st.m_in()];
    for blk in &st.blocks {
        match *blk {
            Blk::Lin { off, len } => out[off..off + len].iter_mut().for_each(|x| *x = 1.0),
            Blk::Psd { off, n } => {
                for i in 0..n {
                    out[off + i * (i + 1) / 2 + i] = 1.0;
                }
            }
        }
    }
    out
}

/// Jordan product `u ∘ v`.
fn jordan(st: &Structure, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for blk in &st.blocks {
        match *blk {
            Blk::Lin { off, len } => {
                for i in off..off + len {
                    out[i] = u[i] * v[i];
                }
            }
            Blk::Psd { off, n } => {
                let dim = n * (n + 1) / 2;
                let a = smat_dense(&u[off..off + dim], n);
                let b = smat_dense(&v[off..off + dim], n);
                let p = &a * &b;
                let r = svec_dense(&((&p + p.transpose()) * 0.5));
                out[off..off + dim].copy_from_slice(&r);
            }
        }
    }
    out
}

/// Solves `λ ∘ x = t` for `x`.
fn lambda_solve(st: &Structure, sc: &[Scale], t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.len()];
    for (blk, scale) in st.blocks.iter().zip(sc) {
        match (*blk, scale) {
            (Blk::Lin { off, len }, Scale::Lin { lam, .. }) => {
                for i in 0..len {
                    out[off + i] = t[off + i] / lam[i];
                }
            }
            (Blk::Psd { off, n }, Scale::Psd { lam, .. }) => {
                let mut k = off;
                for j in 0..n {
                    for i in 0..=j {
                        out[k] = 2.0 * t[k] / (lam[i] + lam[j]);
                        k += 1;
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Largest `α` keeping `v + α dv` in the cone, given the lower Cholesky
/// factors of the current PSD blocks.
fn max_step(st: &Structure, v: &[f64], dv: &[f64], factors: &[Option<&DMatrix<f64>>]) -> f64 {
    let mut alpha = f64::INFINITY;
    let mut psd = 0;
    for blk in &st.blocks {
        match *blk {
            Blk::Lin { off, len } => {
                for i in off..off + len {
                    if dv[i] < 0.0 {
                        alpha = alpha.min(-v[i] / dv[i]);
                    }
                }
            }
            Blk::Psd { off, n } => {
                let l = factors[psd].expect("factor of PSD block");
                psd += 1;
                let dim = n * (n + 1) / 2;
                let dm = smat_dense(&dv[off..off + dim], n);
                let Some(x) = l.solve_lower_triangular(&dm) else {
                    return 0.0;
                };
                let Some(y) = l.solve_lower_triangular(&x.transpose()) else {
                    return 0.0;
                };
                let lmin = min_eigenvalue(&sym(y));
                if lmin < 0.0 {
                    alpha = alpha.min(-1.0 / lmin);
                }
            }
        }
    }
    alpha
}

/// Smallest `t` such that `v + t e` lies in the cone.
fn identity_shift(st: &Structure, v: &[f64]) -> f64 {
    let mut t = f64::NEG_INFINITY;
    for blk in &st.blocks {
        match *blk {
            Blk::Lin { off, len } => {
                for &x in &v[off..off + len] {
                    t = t.max(-x);
                }
            }
            Blk::Psd { off, n } => {
                let dim = n * (n + 1) / 2;
                t = t.max(-min_eigenvalue(&smat_dense(&v[off..off + dim], n)));
            }
        }
    }
    t
}

struct Kkt {
    chol: DMatrix<f64>,
    /// Lower factor of `A K⁻¹ Aᵀ`.
    schur: Option<DMatrix<f64>>,
}

fn chol_regularized(mut m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(m);
    }
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut reg = 1e-13 * scale;
    for _ in 0..8 {
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
            log::trace!("chol n {n} reg {reg:.2e}");
            return Some(c.l());
        }
        for i in 0..n {
            m[(i, i)] -= reg;
        }
        reg *= 100.0;
    }
    None
}

fn lower_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.solve_lower_triangular_mut(b);
}

fn upper_solve_t(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.tr_solve_lower_triangular_mut(b);
}

fn chol_solve(l: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let mut v = DVector::from_column_slice(rhs);
    lower_solve(l, &mut v);
    upper_solve_t(l, &mut v);
    v.as_slice().to_vec()
}

fn form_h(st: &Structure, sc: &[Scale]) -> DMatrix<f64> {
    let n = st.n;
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut psd_idx = 0;
    for (blk, scale) in st.blocks.iter().zip(sc) {
        match (*blk, scale) {
            (Blk::Lin { off, len }, Scale::Lin { d, .. }) => {
                for i in 0..len {
                    let w = 1.0 / (d[i] * d[i]);
                    let row: Vec<(usize, f64)> = st.gt.col(off + i).collect();
                    for &(k, vk) in &row {
                        for &(l, vl) in &row {
                            h[(k, l)] += w * vk * vl;
                        }
                    }
                }
            }
            (Blk::Psd { n: dim, .. }, Scale::Psd { qi, .. }) => {
                let vars = &st.psd_vars[psd_idx];
                psd_idx += 1;
                let mut nk = DMatrix::<f64>::zeros(dim, dim);
                for (k, entries) in vars {
                    nk.fill(0.0);
                    for &(idx, coef) in entries {
                        let (i, j) = svec_pos(idx);
                        if i == j {
                            let q = qi.column(i);
                            nk.ger(coef, &q, &q, 1.0);
                        } else {
                            let m = coef / SQRT2;
                            let qa = qi.column(i);
                            let qb = qi.column(j);
                            nk.ger(m, &qa, &qb, 1.0);
                            nk.ger(m, &qb, &qa, 1.0);
                        }
                    }
                    for (l, entries_l) in vars {
                        let mut acc = 0.0;
                        for &(idx, coef) in entries_l {
                            let (i, j) = svec_pos(idx);
                            acc += if i == j {
                                coef * nk[(i, i)]
                            } else {
                                coef * SQRT2 * nk[(i, j)]
                            };
                        }
                        h[(*l, *k)] += acc;
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    h
}

fn factor_kkt(st: &Structure, h: DMatrix<f64>) -> Option<Kkt> {
    let mut k = h;
    // + AᵀA
    let at = st.a.transpose();
    for r in 0..st.m_eq() {
        let row: Vec<(usize, f64)> = at.col(r).collect();
        for &(i, vi) in &row {
            for &(j, vj) in &row {
                k[(i, j)] += vi * vj;
            }
        }
    }
    let chol = chol_regularized(k)?;
    let schur = if st.m_eq() > 0 {
        // Y = L⁻¹ Aᵀ, A K⁻¹ Aᵀ = YᵀY
        let mut y = st.a.transpose().to_dense();
        chol.solve_lower_triangular_mut(&mut y);
        let s = y.transpose() * &y;
        Some(chol_regularized(sym(s))?)
    } else {
        None
    };
    Some(Kkt { chol, schur })
}

/// Solves `Aᵀdy + Gᵀdz = r1`, `A dx = r2`, `G dx − Φ dz = r3`.
fn kkt_solve_once(
    st: &Structure,
    sc: &[Scale],
    kkt: &Kkt,
    r1: &[f64],
    r2: &[f64],
    r3: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pr3 = apply_phi_inv(st, sc, r3);
    let gt_pr3 = st.g.tmul_vec(&pr3);
    let at_r2 = st.a.tmul_vec(r2);
    let rhs: Vec<f64> = (0..st.n).map(|i| r1[i] + gt_pr3[i] + at_r2[i]).collect();
    let w = chol_solve(&kkt.chol, &rhs);
    let (dx, dy) = if let Some(schur) = &kkt.schur {
        // A K⁻¹ Aᵀ dy = A K⁻¹ rhs − r2
        let aw = st.a.mul_vec(&w);
        let t: Vec<f64> = aw.iter().zip(r2).map(|(a, b)| a - b).collect();
        let dy = chol_solve(schur, &t);
        let aty = st.a.tmul_vec(&dy);
        let corr = chol_solve(&kkt.chol, &aty);
        let dx: Vec<f64> = w.iter().zip(&corr).map(|(a, b)| a - b).collect();
        (dx, dy)
    } else {
        (w, Vec::new())
    };
    let gdx = st.g.mul_vec(&dx);
    let t: Vec<f64> = gdx.iter().zip(r3).map(|(a, b)| a - b).collect();
    let dz = apply_phi_inv(st, sc, &t);
    (dx, dy, dz)
}

fn kkt_solve(
    st: &Structure,
    sc: &[Scale],
    kkt: &Kkt,
    r1: &[f64],
    r2: &[f64],
    r3: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut dx, mut dy, mut dz) = kkt_solve_once(st, sc, kkt, r1, r2, r3);
    let scale = 1.0 + norm2(r1).max(norm2(r2)).max(norm2(r3));
    let mut prev = f64::INFINITY;
    for _ in 0..REFINE_ROUNDS {
        let aty = st.a.tmul_vec(&dy);
        let gtz = st.g.tmul_vec(&dz);
        let e1: Vec<f64> = (0..st.n).map(|i| r1[i] - aty[i] - gtz[i]).collect();
        let adx = st.a.mul_vec(&dx);
        let e2: Vec<f64> = r2.iter().zip(&adx).map(|(a, b)| a - b).collect();
        let gdx = st.g.mul_vec(&dx);
        let pdz = apply_phi(st, sc, &dz);
        let e3: Vec<f64> = (0..st.m_in()).map(|i| r3[i] - gdx[i] + pdz[i]).collect();
        let err = norm2(&e1).max(norm2(&e2)).max(norm2(&e3));
        log::trace!("refine err {:.2e} scale {:.2e}", err, scale);
        if err <= 1e-15 * scale || err > 0.5 * prev {
            break;
        }
        prev = err;
        let (cx, cy, cz) = kkt_solve_once(st, sc, kkt, &e1, &e2, &e3);
        for (a, b) in dx.iter_mut().zip(&cx) {
            *a += b;
        }
        for (a, b) in dy.iter_mut().zip(&cy) {
            *a += b;
        }
        for (a, b) in dz.iter_mut().zip(&cz) {
            *a += b;
        }
    }
    (dx, dy, dz)
}

const REFINE_ROUNDS: usize = 20;

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

fn assemble_solution(
    p: &ConicProblem,
    st: &Structure,
    it: &Iterate,
    status: SolveStatus,
    iterations: usize,
    certificate: Option<Vec<f64>>,
) -> ConicSolution {
    let scale = if status == SolveStatus::Optimal
        || status == SolveStatus::MaxIter
        || status == SolveStatus::NumericalFailure
    {
        1.0 / it.tau
    } else {
        1.0
    };
    let x: Vec<f64> = it.x.iter().map(|v| v * scale).collect();
    let mut y = vec![0.0; p.num_rows()];
    let mut s = vec![0.0; p.num_rows()];
    for (k, &r) in st.eq_rows.iter().enumerate() {
        y[r] = it.y[k] * scale;
    }
    for (k, &r) in st.in_rows.iter().enumerate() {
        y[r] = it.z[k] * scale;
        s[r] = it.s[k] * scale;
    }
    let res = p.residuals(&x, &y, &s);
    ConicSolution {
        status,
        objective: res.objective,
        primal_residual: res.primal,
        dual_residual: res.dual,
        gap: res.gap,
        x,
        y,
        s,
        iterations,
        certificate,
    }
}

/// Runs the interior-point method on the equilibrated problem and maps the
/// result back. Status and residuals refer to the original data.
pub(crate) fn solve_ipm(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    if !settings.scaling || p.num_rows() == 0 {
        return solve_ipm_raw(p, settings, None);
    }
    let (a, eq) = crate::admm::equilibrate(p, true);
    let m = p.num_rows();
    let n = p.num_vars();
    let scaled = ConicProblem {
        c: (0..n).map(|j| p.c[j] * eq.e[j]).collect(),
        a,
        b: (0..m).map(|i| p.b[i] * eq.d[i]).collect(),
        cones: p.cones.clone(),
    };
    let orig = Unscale {
        d: &eq.d,
        e: &eq.e,
        bnorm: norm2(&p.b),
        cnorm: norm2(&p.c),
    };
    let mut sol = solve_ipm_raw(&scaled, settings, Some(&orig));
    let certificate = sol.certificate.take();
    match sol.status {
        SolveStatus::PrimalInfeasible => {
            let y: Vec<f64> = (0..m).map(|i| sol.y[i] * eq.d[i]).collect();
            sol.certificate = certificate.map(|_| y.clone());
            sol.y = y;
            return sol;
        }
        SolveStatus::DualInfeasible => {
            let x: Vec<f64> = (0..n).map(|j| sol.x[j] * eq.e[j]).collect();
            sol.certificate = certificate.map(|_| x.clone());
            sol.x = x;
            return sol;
        }
        _ => {}
    }
    let x: Vec<f64> = (0..n).map(|j| sol.x[j] * eq.e[j]).collect();
    let y: Vec<f64> = (0..m).map(|i| sol.y[i] * eq.d[i]).collect();
    let s: Vec<f64> = (0..m).map(|i| sol.s[i] / eq.d[i]).collect();
    let res = p.residuals(&x, &y, &s);
    log::trace!(
        "unscaled residuals {:.2e} {:.2e} {:.2e} (status {:?})",
        res.primal,
        res.dual,
        res.gap,
        sol.status
    );
    ConicSolution {
        status: sol.status,
        objective: res.objective,
        primal_residual: res.primal,
        dual_residual: res.dual,
        gap: res.gap,
        x,
        y,
        s,
        iterations: sol.iterations,
        certificate: None,
    }
}

/// Row and column scalings applied to the data, so termination can be
/// judged on the original residuals.
struct Unscale<'a> {
    d: &'a [f64],
    e: &'a [f64],
    bnorm: f64,
    cnorm: f64,
}

fn solve_ipm_raw(p: &ConicProblem, settings: &SolverSettings, orig: Option<&Unscale>) -> ConicSolution {
    let st = Structure::new(p);
    let n = st.n;
    let m_in = st.m_in();
    let eps = settings.eps_rel;
    let bnorm = (norm2(&st.b).powi(2) + norm2(&st.h).powi(2)).sqrt();
    let cnorm = norm2(&st.c);

    // Starting point from two least-squares problems with identity scaling.
    let e = identity(&st);
    let unit_s = e.clone();
    let unit_sc = build_scaling(&st, &unit_s, &unit_s).expect("identity scaling");
    let fail = |it: &Iterate| assemble_solution(p, &st, it, SolveStatus::NumericalFailure, 0, None);
    let mut it = Iterate {
        x: vec![0.0; n],
        y: vec![0.0; st.m_eq()],
        z: e.clone(),
        s: e.clone(),
        tau: 1.0,
        kappa: 1.0,
    };
    let Some(kkt0) = factor_kkt(&st, form_h(&st, &unit_sc)) else {
        return fail(&it);
    };
    let zeros_n = vec![0.0; n];
    let (x0, _, z0) = kkt_solve(&st, &unit_sc, &kkt0, &zeros_n, &st.b, &st.h);
    let mut s0: Vec<f64> = z0.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = st.c.iter().map(|v| -v).collect();
    let (_, y0, mut zz) = kkt_solve(&st, &unit_sc, &kkt0, &neg_c, &vec![0.0; st.m_eq()], &vec![0.0; m_in]);
    if m_in > 0 {
        let ts = identity_shift(&st, &s0);
        if ts >= -1e-8 * norm2(&s0).max(1.0) {
            axpy(&mut s0, 1.0 + ts, &e);
        }
        let tz = identity_shift(&st, &zz);
        if tz >= -1e-8 * norm2(&zz).max(1.0) {
            axpy(&mut zz, 1.0 + tz, &e);
        }
    }
    it.x = x0;
    it.y = y0;
    it.s = s0;
    it.z = zz;

    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut small_steps = 0;

    for iter in 0..settings.ipm_max_iter {
        // residuals of the homogeneous embedding
        let aty = st.a.tmul_vec(&it.y);
        let gtz = st.g.tmul_vec(&it.z);
        let rx: Vec<f64> = (0..n).map(|i| aty[i] + gtz[i] + st.c[i] * it.tau).collect();
        let ax = st.a.mul_vec(&it.x);
        let ry: Vec<f64> = ax.iter().zip(&st.b).map(|(a, b)| a - b * it.tau).collect();
        let gx = st.g.mul_vec(&it.x);
        let rz: Vec<f64> = (0..m_in).map(|i| it.s[i] + gx[i] - st.h[i] * it.tau).collect();
        let cx = dot(&st.c, &it.x);
        let by_hz = dot(&st.b, &it.y) + dot(&st.h, &it.z);
        let rt = it.kappa + cx + by_hz;

        if !(rx.iter().chain(&rz).chain(&ry).all(|v| v.is_finite()) && rt.is_finite()) {
            return match best {
                Some((_, b, k)) => assemble_solution(p, &st, &b, SolveStatus::NumericalFailure, k, None),
                None => fail(&it),
            };
        }

        let (pres_raw, dres_raw, bn, cn) = match orig {
            None => (
                (norm2(&ry).powi(2) + norm2(&rz).powi(2)).sqrt(),
                norm2(&rx),
                bnorm,
                cnorm,
            ),
            Some(u) => {
                let p2: f64 = ry
                    .iter()
                    .zip(&st.eq_rows)
                    .chain(rz.iter().zip(&st.in_rows))
                    .map(|(v, &r)| (v / u.d[r]).powi(2))
                    .sum();
                let d2: f64 = rx.iter().zip(u.e).map(|(v, e)| (v / e).powi(2)).sum();
                (p2.sqrt(), d2.sqrt(), u.bnorm, u.cnorm)
            }
        };
        let m = Metrics {
            pres: pres_raw / it.tau / (1.0 + bn),
            dres: dres_raw / it.tau / (1.0 + cn),
            gap: (cx + by_hz).abs() / it.tau / (1.0 + cx.abs() / it.tau + by_hz.abs() / it.tau),
            pobj: cx / it.tau,
        };
        log::trace!(
            "ipm {iter}: pobj {:.9e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
            m.pobj,
            m.pres,
            m.dres,
            m.gap,
            it.tau,
            it.kappa
        );
        let merit = m.pres.max(m.dres).max(m.gap);
        if best.as_ref().is_none_or(|(b, _, _)| merit < *b) {
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    z: it.z.clone(),
                    s: it.s.clone(),
                    tau: it.tau,
                    kappa: it.kappa,
                },
                iter,
            ));
        }
        let sandwich = (cx + by_hz) / it.tau >= -settings.eps_abs * (1.0 + m.pobj.abs());
        if m.pres <= eps && m.dres <= eps && m.gap <= eps && sandwich {
            return assemble_solution(p, &st, &it, SolveStatus::Optimal, iter, None);
        }

        // infeasibility certificates
        if by_hz < 0.0 {
            let atyz: Vec<f64> = match orig {
                None => (0..n).map(|i| aty[i] + gtz[i]).collect(),
                Some(u) => (0..n).map(|i| (aty[i] + gtz[i]) / u.e[i]).collect(),
            };
            let pinf = norm2(&atyz) / (-by_hz) * cn.max(1.0);
            if pinf <= settings.eps_infeas {
                let f = 1.0 / (-by_hz);
                let mut cert = vec![0.0; p.num_rows()];
                for (k, &r) in st.eq_rows.iter().enumerate() {
                    cert[r] = it.y[k] * f;
                }
                for (k, &r) in st.in_rows.iter().enumerate() {
                    cert[r] = it.z[k] * f;
                }
                let mut out = assemble_solution(p, &st, &it, SolveStatus::PrimalInfeasible, iter, Some(cert.clone()));
                out.y = cert;
                return out;
            }
        }
        if cx < 0.0 {
            let (axn, gxs) = match orig {
                None => (norm2(&ax), (0..m_in).map(|i| gx[i] + it.s[i]).collect::<Vec<f64>>()),
                Some(u) => (
                    norm2(
                        &ax.iter()
                            .zip(&st.eq_rows)
                            .map(|(v, &r)| v / u.d[r])
                            .collect::<Vec<f64>>(),
                    ),
                    (0..m_in).map(|i| (gx[i] + it.s[i]) / u.d[st.in_rows[i]]).collect(),
                ),
            };
            let dinf = axn.max(norm2(&gxs)) / (-cx) * bn.max(1.0);
            if dinf <= settings.eps_infeas {
                let f = 1.0 / (-cx);
                let cert: Vec<f64> = it.x.iter().map(|v| v * f).collect();
                let mut out = assemble_solution(p, &st, &it, SolveStatus::DualInfeasible, iter, Some(cert.clone()));
                out.x = cert;
                return out;
            }
        }

        let Some(sc) = build_scaling(&st, &it.s, &it.z) else {
            log::debug!("ipm {iter}: scaling failed");
            break;
        };
        let Some(kkt) = factor_kkt(&st, form_h(&st, &sc)) else {
            log::debug!("ipm {iter}: KKT factorization failed");
            break;
        };
        let lam = lambda(&st, &sc);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (st.degree as f64 + 1.0);

        let neg_c: Vec<f64> = st.c.iter().map(|v| -v).collect();
        let (qx, qy, qz) = kkt_solve(&st, &sc, &kkt, &neg_c, &st.b, &st.h);
        let q_den = dot(&st.c, &qx) + dot(&st.b, &qy) + dot(&st.h, &qz) - it.kappa / it.tau;

        let ls_f: Vec<&DMatrix<f64>> = sc
            .iter()
            .filter_map(|s| match s {
                Scale::Psd { ls, .. } => Some(ls),
                _ => None,
            })
            .collect();
        let lz_f: Vec<&DMatrix<f64>> = sc
            .iter()
            .filter_map(|s| match s {
                Scale::Psd { lz, .. } => Some(lz),
                _ => None,
            })
            .collect();
        let ls_o: Vec<Option<&DMatrix<f64>>> = ls_f.iter().map(|m| Some(*m)).collect();
        let lz_o: Vec<Option<&DMatrix<f64>>> = lz_f.iter().map(|m| Some(*m)).collect();

        // One Newton direction for target `sigma*mu` and correction terms.
        let direction = |eta: f64, t_cone: &[f64], t_tau: f64| {
            let u = lambda_solve(&st, &sc, t_cone);
            let wtu = apply_wt(&st, &sc, &u);
            let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let r2: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
            let r3: Vec<f64> = (0..m_in).map(|i| -eta * rz[i] - wtu[i]).collect();
            let (px, py, pz) = kkt_solve(&st, &sc, &kkt, &r1, &r2, &r3);
            let num = -eta * rt - t_tau / it.tau - (dot(&st.c, &px) + dot(&st.b, &py) + dot(&st.h, &pz));
            let dtau = num / q_den;
            let mut dx = px;
            axpy(&mut dx, dtau, &qx);
            let mut dy = py;
            axpy(&mut dy, dtau, &qy);
            let mut dz = pz;
            axpy(&mut dz, dtau, &qz);
            let gdx = st.g.mul_vec(&dx);
            let ds: Vec<f64> = (0..m_in).map(|i| -eta * rz[i] - gdx[i] + st.h[i] * dtau).collect();
            let dkappa = (t_tau - it.kappa * dtau) / it.tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };
        let step_len = |ds: &[f64], dz: &[f64], dtau: f64, dkappa: f64| {
            let mut a = max_step(&st, &it.s, ds, &ls_o).min(max_step(&st, &it.z, dz, &lz_o));
            if dtau < 0.0 {
                a = a.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-it.kappa / dkappa);
            }
            a
        };

        // predictor
        let lam_sq = jordan(&st, &lam, &lam);
        let t_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &t_aff, -it.tau * it.kappa);
        let alpha_aff = step_len(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let dsw = apply_winv_t(&st, &sc, &ds_a);
        let dzw = apply_w(&st, &sc, &dz_a);
        let corr = jordan(&st, &dsw, &dzw);
        let t_cone: Vec<f64> = (0..m_in).map(|i| sigma * mu * e[i] - lam_sq[i] - corr[i]).collect();
        let t_tau = sigma * mu - it.tau * it.kappa - dtau_a * dkappa_a;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(1.0 - sigma, &t_cone, t_tau);
        let amax = step_len(&ds, &dz, dtau, dkappa);
        let alpha = (0.99 * amax).min(1.0);
        if !alpha.is_finite() {
            break;
        }
        if alpha < 1e-10 {
            small_steps += 1;
            if small_steps >= 3 {
                log::debug!("ipm {iter}: stalled");
                break;
            }
        } else {
            small_steps = 0;
        }
        axpy(&mut it.x, alpha, &dx);
        axpy(&mut it.y, alpha, &dy);
        axpy(&mut it.z, alpha, &dz);
        axpy(&mut it.s, alpha, &ds);
        it.tau += alpha * dtau;
        it.kappa += alpha * dkappa;
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            break;
        }
    }

    match best {
        Some((_, b, k)) => assemble_solution(p, &st, &b, SolveStatus::MaxIter, k, None),
        None => fail(&it),
    }
}
