//! Successive convex approximations of the bilinear term `B̃ΠZ`.
//!
//! Both variants solve a sequence of SDPs whose feasible sets lie inside
//! the box-relaxed nonconvex problem and contain the previous iterate, so
//! the objective is nonincreasing and every bound is an upper bound.
//!
//! * SCA-1 splits `−(XZ + ZᵀXᵀ)`, `X = B̃Π`, into `½DDᵀ − ½WWᵀ` with
//!   `D = X − Zᵀ`, `W = X + Zᵀ`, and replaces the concave `−WWᵀ` by its
//!   tangent [`h_lin`].
//! * SCA-2 expands around `(Π_k, Z_k)` and bounds the remaining product
//!   `−(B̃ΔΠΔZ + ·ᵀ) ⪯ B̃ΔΠ Q ΔΠB̃ᵀ + ΔZᵀQ⁻¹ΔZ` with a matrix variable `Q`,
//!   linearized in `Q⁻¹` around `Q_k`.

use std::time::Instant;

use nalgebra::DMatrix;
use saa_conic::linalg::max_eigenvalue;
use saa_conic::{solve, ConicProblem, LinExpr, MatExpr, Model, SolverSettings};

use crate::error::CoreError;
use crate::lmi::{
    add_period_vars, add_selection_rows, build_fixed, lyap_block, lyap_value, psi12, psi22, psi_values, status_error,
    usable, BoundDirection, BoundValue, LinfDecision, Period, PeriodVars, Point, SelectionProblem,
};
use crate::method::{MethodKind, MethodResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaVariant {
    Sca1,
    Sca2,
}

impl ScaVariant {
    pub fn method(self) -> MethodKind {
        match self {
            ScaVariant::Sca1 => MethodKind::Sca1,
            ScaVariant::Sca2 => MethodKind::Sca2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaSettings {
    /// Weight of the proximal term `J_k`.
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Stop when consecutive subproblem values differ by less.
    pub tol: f64,
    pub max_iter: usize,
    /// Secondary stop on the step norm.
    pub step_tol: f64,
    /// Blend weight toward the previous iterate when a subproblem solution
    /// is not strictly feasible.
    pub shrink: f64,
    pub solver: SolverSettings,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            rho: 1e-3,
            c1: 1e-3,
            c2: 1e3,
            c3: 1e-3,
            tol: 1e-6,
            max_iter: 100,
            step_tol: 1e-8,
            shrink: 1e-6,
            solver: SolverSettings::with_tolerance(1e-9),
        }
    }
}

impl ScaSettings {
    pub fn validate(&self) -> Result<(), CoreError> {
        let pos = [self.c1, self.c2, self.c3, self.tol, self.step_tol];
        if self.rho < 0.0 || pos.iter().any(|v| !(*v > 0.0)) || !(0.0..1.0).contains(&self.shrink) {
            return Err(CoreError::InvalidArgument("SCA constants must be positive".into()));
        }
        if self.c1 > self.c2 {
            return Err(CoreError::InvalidArgument(format!(
                "c1 = {} exceeds c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.max_iter == 0 {
            return Err(CoreError::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linearization point of one SCA step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub k: usize,
    pub point: Point,
    /// One `n_u × n_u` matrix per period (SCA-2 only; identity otherwise).
    pub q: Vec<DMatrix<f64>>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaStatus {
    /// Subproblem values settled within `tol`.
    Converged,
    /// The step norm fell below `step_tol`.
    Stalled,
    MaxIter,
    /// A subproblem could not be solved; the trace holds the iterations
    /// completed before it.
    SubproblemFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaTrace {
    /// `f(p_k)` for `k = 0, 1, ...` (the starting point first).
    pub objectives: Vec<f64>,
    /// Optimal value of subproblem `k` (regularizer included).
    pub subproblem_values: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub status: ScaStatus,
    /// Rise `f(p) − f(p_{k−1})` of a subproblem solution that was rejected
    /// because the previous iterate, feasible for the same subproblem with
    /// `J = 0`, is better.
    pub rejected_rise: Option<f64>,
}

impl ScaTrace {
    /// Largest increase `f(p_k) − f(p_{k−1})` relative to `1 + |f(p_{k−1})|`
    /// (negative when the trace strictly decreases).
    pub fn max_relative_increase(&self) -> f64 {
        self.objectives
            .windows(2)
            .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `B̃Π` for per-node values `pi_node`.
pub fn b_pi(p: &Period, pi_node: &[f64]) -> DMatrix<f64> {
    let diag = p.expand(pi_node);
    DMatrix::from_fn(p.n_x(), p.n_u(), |r, c| p.b[(r, c)] * diag[c])
}

fn check_dims(b: &DMatrix<f64>, pi: &[f64], z: &DMatrix<f64>) -> Result<(), CoreError> {
    if pi.len() != b.ncols() || z.nrows() != b.ncols() || z.ncols() != b.nrows() {
        return Err(CoreError::Dimension(format!(
            "B̃ {}x{}, Π of length {}, Z {}x{}",
            b.nrows(),
            b.ncols(),
            pi.len(),
            z.nrows(),
            z.ncols()
        )));
    }
    Ok(())
}

fn w_matrix(b: &DMatrix<f64>, pi: &[f64], z: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] * pi[c]) + z.transpose()
}

/// The concave part `H(Π, Z) = −(B̃Π + Zᵀ)(B̃Π + Zᵀ)ᵀ`; `pi` is the diagonal
/// of `Π` (one entry per input).
pub fn concave_term(b: &DMatrix<f64>, pi: &[f64], z: &DMatrix<f64>) -> Result<DMatrix<f64>, CoreError> {
    check_dims(b, pi, z)?;
    let w = w_matrix(b, pi, z);
    Ok(-(&w * w.transpose()))
}

/// First-order expansion of [`concave_term`] at `(Π₀, Z₀)`:
/// `W₀W₀ᵀ − WW₀ᵀ − W₀Wᵀ` with `W = B̃Π + Zᵀ`. It over-estimates `H`
/// everywhere and equals it at the base point.
pub fn h_lin(
    b: &DMatrix<f64>,
    pi: &[f64],
    z: &DMatrix<f64>,
    pi0: &[f64],
    z0: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CoreError> {
    check_dims(b, pi, z)?;
    check_dims(b, pi0, z0)?;
    let w = w_matrix(b, pi, z);
    let w0 = w_matrix(b, pi0, z0);
    let cross = &w * w0.transpose();
    Ok(&w0 * w0.transpose() - &cross - cross.transpose())
}

/// Symmetric block matrix with block sizes `sizes`; each `(i, j, m)` with
/// `i < j` also fills `(j, i)` with `mᵀ`.
fn sym_blocks(sizes: &[usize], entries: &[(usize, usize, DMatrix<f64>)]) -> DMatrix<f64> {
    let off: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &k| {
            *acc += k;
            Some(*acc - k)
        })
        .collect();
    let n = sizes.iter().sum();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, blk) in entries {
        m.view_mut((off[*i], off[*j]), (sizes[*i], sizes[*j])).copy_from(blk);
        if i != j {
            m.view_mut((off[*j], off[*i]), (sizes[*j], sizes[*i]))
                .copy_from(&blk.transpose());
        }
    }
    m
}

/// Numeric value of the SCA-1 matrix `C_s` at `(S, Z, perf, π)` for the
/// base point `(π₀, Z₀)`; per-node selections.
#[allow(clippy::too_many_arguments)]
pub fn sca1_lmi_value(
    p: &Period,
    s: &DMatrix<f64>,
    z: &DMatrix<f64>,
    perf: f64,
    pi_node: &[f64],
    pi0_node: &[f64],
    z0: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CoreError> {
    let hl = h_lin(&p.b, &p.expand(pi_node), z, &p.expand(pi0_node), z0)?;
    let top = lyap_value(p, s, perf) + hl * 0.5;
    let d = (b_pi(p, pi_node) - z.transpose()) * std::f64::consts::FRAC_1_SQRT_2;
    let (p12, p22) = psi_values(p, s, perf);
    let nu = p.n_u();
    Ok(sym_blocks(
        &[p.n_x(), nu, p12.ncols()],
        &[
            (0, 0, top),
            (0, 1, d),
            (0, 2, p12),
            (1, 1, -DMatrix::identity(nu, nu)),
            (2, 2, p22),
        ],
    ))
}

/// Numeric value of the SCA-2 matrix `K_s` at `(S, Z, perf, π, Q)` for the
/// previous iterate `(π_k, Z_k, Q_k)`; per-node selections.
#[allow(clippy::too_many_arguments)]
pub fn sca2_lmi_value(
    p: &Period,
    s: &DMatrix<f64>,
    z: &DMatrix<f64>,
    perf: f64,
    q: &DMatrix<f64>,
    pi_node: &[f64],
    pik_node: &[f64],
    zk: &DMatrix<f64>,
    qk: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CoreError> {
    let nu = p.n_u();
    if z.shape() != (nu, p.n_x()) || zk.shape() != z.shape() || q.shape() != (nu, nu) || qk.shape() != q.shape() {
        return Err(CoreError::Dimension("SCA-2 blocks".into()));
    }
    let x = b_pi(p, pi_node);
    let xk = b_pi(p, pik_node);
    let l = &xk * z + &x * zk - &xk * zk;
    let om = lyap_value(p, s, perf) - &l - l.transpose();
    let (p12, p22) = psi_values(p, s, perf);
    Ok(sym_blocks(
        &[p.n_x(), p12.ncols(), nu, nu],
        &[
            (0, 0, om),
            (0, 1, p12),
            (0, 2, (x - xk) * qk),
            (0, 3, (z - zk).transpose()),
            (1, 1, p22),
            (2, 2, q - qk * 2.0),
            (3, 3, -q),
        ],
    ))
}

/// `B̃Π` with `Π` the stacked selection variables of one period.
fn b_pi_expr(p: &Period, pi: &[LinExpr]) -> MatExpr {
    let mut node_of = Vec::with_capacity(p.n_u());
    for (node, &k) in p.partition.iter().enumerate() {
        node_of.extend(std::iter::repeat_n(node, k));
    }
    MatExpr::from_fn(p.n_x(), p.n_u(), |r, c| {
        let f = p.b[(r, c)];
        if f == 0.0 {
            LinExpr::zero()
        } else {
            pi[node_of[c]].scaled(f)
        }
    })
}

/// Adds `t ≥ (e − target)²` through `[[t, e − target],[·, 1]] ⪰ 0` and
/// returns `t`.
fn sq_epigraph(model: &mut Model, e: &LinExpr, target: f64) -> LinExpr {
    let t = model.scalar();
    let d = e.clone() - LinExpr::constant(target);
    let blk = MatExpr::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => t.clone(),
        (1, 1) => LinExpr::constant(1.0),
        _ => d.clone(),
    });
    model.add_psd(&blk);
    t
}

/// `J_k`: squared distances of `(ζ, S, Z, Π)` to the previous iterate.
fn add_regularizer(model: &mut Model, prob: &SelectionProblem, d: &LinfDecision, prev: &Point) -> LinExpr {
    let mut j = LinExpr::zero();
    for (jj, (p, v)) in prob.periods.iter().zip(&d.periods).enumerate() {
        j.add_scaled(&sq_epigraph(model, &v.perf, prev.perf[jj]), 1.0);
        let n = p.n_x();
        for r in 0..n {
            for c in r..n {
                let t = sq_epigraph(model, v.s.get(r, c), prev.s[jj][(r, c)]);
                j.add_scaled(&t, if r == c { 1.0 } else { 2.0 });
            }
        }
        for r in 0..p.n_u() {
            for c in 0..n {
                let t = sq_epigraph(model, v.z.get(r, c), prev.z[jj][(r, c)]);
                j.add_scaled(&t, 1.0);
            }
        }
    }
    let nn = prob.n_nodes();
    for (i, e) in d.pi.iter().enumerate() {
        let t = sq_epigraph(model, e, prev.pi[i]);
        // Π repeats a node's entry once per input of the node
        j.add_scaled(&t, prob.periods[i / nn].partition[i % nn] as f64);
    }
    j
}

/// An SCA subproblem with the handles needed to read its solution.
#[derive(Debug, Clone)]
pub struct ScaSubproblem {
    pub problem: ConicProblem,
    pub decision: LinfDecision,
    /// `Q` per period (SCA-2).
    pub q: Vec<MatExpr>,
    /// Full subproblem objective, regularizer included.
    pub objective: LinExpr,
    /// The convexified matrix inequality of each period (`⪯ 0`).
    pub lmis: Vec<MatExpr>,
}

fn base_model(prob: &SelectionProblem) -> (Model, Vec<LinExpr>) {
    let mut model = Model::new();
    let pi: Vec<LinExpr> = (0..prob.len()).map(|_| model.scalar()).collect();
    add_selection_rows(&mut model, &prob.logistics, &pi);
    (model, pi)
}

fn finish(
    mut model: Model,
    prob: &SelectionProblem,
    decision: LinfDecision,
    q: Vec<MatExpr>,
    lmis: Vec<MatExpr>,
    state: &ScaState,
    rho: f64,
) -> Result<ScaSubproblem, CoreError> {
    let mut obj = crate::lmi::objective_expr(prob, &decision);
    if rho > 0.0 {
        let j = add_regularizer(&mut model, prob, &decision, &state.point);
        obj.add_scaled(&j, rho);
    }
    model.minimize(obj.clone());
    Ok(ScaSubproblem {
        problem: model.build()?,
        decision,
        q,
        objective: obj,
        lmis,
    })
}

fn check_state(prob: &SelectionProblem, state: &ScaState) -> Result<(), CoreError> {
    prob.validate()?;
    let t = prob.n_periods();
    let pt = &state.point;
    if pt.s.len() != t || pt.z.len() != t || pt.perf.len() != t || pt.pi.len() != prob.len() || state.q.len() != t {
        return Err(CoreError::Dimension("SCA state does not match the problem".into()));
    }
    for (j, p) in prob.periods.iter().enumerate() {
        if pt.s[j].shape() != (p.n_x(), p.n_x())
            || pt.z[j].shape() != (p.n_u(), p.n_x())
            || state.q[j].shape() != (p.n_u(), p.n_u())
        {
            return Err(CoreError::Dimension(format!("SCA state blocks of period {j}")));
        }
    }
    if pt.pi.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CoreError::InvalidArgument("state Π outside [0, 1]".into()));
    }
    Ok(())
}

/// SCA-1 step: `C_s ⪯ 0` per period,
///
/// ```text
/// [ ÃS + SÃᵀ + αS + Ψ₁₁ + ½h_lin   (X − Zᵀ)/√2   Ψ₁₂ ]
/// [ ·                             −I            0   ]
/// [ Ψ₁₂ᵀ                          0             Ψ₂₂ ]
/// ```
pub fn build_sca1_subproblem(
    prob: &SelectionProblem,
    state: &ScaState,
    settings: &ScaSettings,
) -> Result<ScaSubproblem, CoreError> {
    check_state(prob, state)?;
    let (mut model, pi) = base_model(prob);
    let mut periods = Vec::with_capacity(prob.n_periods());
    let mut lmis = Vec::with_capacity(prob.n_periods());
    for (j, p) in prob.periods.iter().enumerate() {
        let v = add_period_vars(&mut model, p, None);
        let x = b_pi_expr(p, prob.period_slice(j, &pi));
        let zt = v.z.transpose();
        let w0 = b_pi(p, prob.period_slice(j, &state.point.pi)) + state.point.z[j].transpose();
        let hl = x
            .add(&zt)
            .right_mul(&w0.transpose())
            .sym_sum()
            .scale(-1.0)
            .add_constant(&(&w0 * w0.transpose()));
        let top = lyap_block(p, &v).add(&hl.scale(0.5));
        let dd = x.sub(&zt).scale(std::f64::consts::FRAC_1_SQRT_2);
        let ddt = dd.transpose();
        let neg_i = MatExpr::constant(&(-DMatrix::identity(p.n_u(), p.n_u())));
        let p12 = psi12(p, &v);
        let p21 = p12.transpose();
        let p22 = psi22(p, &v);
        let lmi = MatExpr::blocks(&[
            vec![Some(&top), Some(&dd), Some(&p12)],
            vec![Some(&ddt), Some(&neg_i), None],
            vec![Some(&p21), None, Some(&p22)],
        ]);
        model.add_nsd(&lmi);
        lmis.push(lmi);
        periods.push(v);
    }
    let d = LinfDecision { periods, pi };
    finish(model, prob, d, Vec::new(), lmis, state, settings.rho)
}

/// `Ω = ÃS + SÃᵀ + αS + Ψ₁₁ − (L + Lᵀ)`, `L = B̃Π_kZ + B̃ΠZ_k − B̃Π_kZ_k`.
fn omega(p: &Period, v: &PeriodVars, x: &MatExpr, bpi_k: &DMatrix<f64>, z_k: &DMatrix<f64>) -> MatExpr {
    let l =
        v.z.left_mul(bpi_k)
            .add(&x.right_mul(z_k))
            .add_constant(&(-(bpi_k * z_k)));
    lyap_block(p, v).sub(&l.sym_sum())
}

/// SCA-2 step: per period
///
/// ```text
/// [ Ω         Ψ₁₂   B̃ΔΠ Q_k      ΔZᵀ ]
/// [ Ψ₁₂ᵀ      Ψ₂₂   0            0   ]
/// [ Q_kΔΠB̃ᵀ   0     −2Q_k + Q    0   ]  ⪯ 0
/// [ ΔZ        0     0            −Q  ]
/// ```
///
/// with `c₁I ⪯ Q ⪯ c₂I` and `−2Q_k + Q ⪯ −c₃I`.
pub fn build_sca2_subproblem(
    prob: &SelectionProblem,
    state: &ScaState,
    settings: &ScaSettings,
) -> Result<ScaSubproblem, CoreError> {
    check_state(prob, state)?;
    let (mut model, pi) = base_model(prob);
    let mut periods = Vec::with_capacity(prob.n_periods());
    let mut qs = Vec::with_capacity(prob.n_periods());
    let mut lmis = Vec::with_capacity(prob.n_periods());
    for (j, p) in prob.periods.iter().enumerate() {
        let nu = p.n_u();
        let v = add_period_vars(&mut model, p, None);
        let q = model.sym_matrix(nu);
        let qk = &state.q[j];
        let eye = DMatrix::<f64>::identity(nu, nu);
        model.add_psd(&q.add_constant(&(-settings.c1 * &eye)));
        model.add_nsd(&q.add_constant(&(-settings.c2 * &eye)));
        model.add_nsd(&q.add_constant(&(settings.c3 * &eye - 2.0 * qk)));

        let bpi_k = b_pi(p, prob.period_slice(j, &state.point.pi));
        let z_k = &state.point.z[j];
        let x = b_pi_expr(p, prob.period_slice(j, &pi));
        let om = omega(p, &v, &x, &bpi_k, z_k);
        let u = x.add_constant(&(-&bpi_k)).right_mul(qk);
        let ut = u.transpose();
        let dz = v.z.add_constant(&(-z_k));
        let dzt = dz.transpose();
        let p12 = psi12(p, &v);
        let p21 = p12.transpose();
        let p22 = psi22(p, &v);
        let b33 = q.add_constant(&(-2.0 * qk));
        let b44 = q.scale(-1.0);
        let lmi = MatExpr::blocks(&[
            vec![Some(&om), Some(&p12), Some(&u), Some(&dzt)],
            vec![Some(&p21), Some(&p22), None, None],
            vec![Some(&ut), None, Some(&b33), None],
            vec![Some(&dz), None, None, Some(&b44)],
        ]);
        model.add_nsd(&lmi);
        lmis.push(lmi);
        periods.push(v);
        qs.push(q);
    }
    let d = LinfDecision { periods, pi };
    finish(model, prob, d, qs, lmis, state, settings.rho)
}

pub fn build_subproblem(
    variant: ScaVariant,
    prob: &SelectionProblem,
    state: &ScaState,
    settings: &ScaSettings,
) -> Result<ScaSubproblem, CoreError> {
    match variant {
        ScaVariant::Sca1 => build_sca1_subproblem(prob, state, settings),
        ScaVariant::Sca2 => build_sca2_subproblem(prob, state, settings),
    }
}

/// Smallest uniform `θ ∈ {0.1, 0.2, ..., 1}` allowed by the logistic rows.
pub fn initial_theta(prob: &SelectionProblem) -> Option<f64> {
    (1..=10)
        .map(|i| i as f64 / 10.0)
        .find(|&t| prob.logistics.satisfied_by(&vec![t; prob.len()], 1e-12))
}

/// Starting point: `Π₀ = θI` with the smallest admissible grid `θ` and the
/// interior-point solution `(S, Z, ζ)` of the fixed-`Π₀` SDP, which is
/// strictly feasible up to the solver's centrality margin.
pub fn initial_state(prob: &SelectionProblem, settings: &ScaSettings) -> Result<ScaState, CoreError> {
    let first =
        initial_theta(prob).ok_or_else(|| CoreError::Initialization("no uniform selection satisfies Hπ ≤ h".into()))?;
    let mut last_err = None;
    for i in (first * 10.0).round() as usize..=10 {
        let theta = i as f64 / 10.0;
        let pi0 = vec![theta; prob.len()];
        if !prob.logistics.satisfied_by(&pi0, 1e-12) {
            continue;
        }
        let (cp, d) = build_fixed(prob, &pi0)?;
        let sol = solve(&cp, &settings.solver)?;
        if !usable(&sol) {
            last_err = Some(status_error(sol.status, &format!("fixed SDP at Π₀ = {theta}I")));
            continue;
        }
        let point = d.extract(&sol.x);
        let q = prob
            .periods
            .iter()
            .map(|p| DMatrix::identity(p.n_u(), p.n_u()))
            .collect();
        return Ok(ScaState {
            k: 0,
            objective: prob.objective(&point.pi, &point.perf),
            point,
            q,
        });
    }
    Err(CoreError::Initialization(format!(
        "no strictly feasible uniform start: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Largest eigenvalue of the BMI blocks, unnormalized; a point is strictly
/// feasible when this is negative.
fn max_bmi_eig(prob: &SelectionProblem, pt: &Point) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (j, p) in prob.periods.iter().enumerate() {
        let pin = prob.period_slice(j, &pt.pi);
        let m = crate::lmi::main_lmi_value(p, &pt.s[j], &pt.z[j], pin, pt.perf[j]);
        worst = worst.max(max_eigenvalue(&m));
        if let Some(q) = crate::lmi::perf_lmi_value(p, &pt.s[j], pt.perf[j]) {
            worst = worst.max(max_eigenvalue(&q));
        }
    }
    worst
}

/// Runs SCA from [`initial_state`].
pub fn run_sca(
    variant: ScaVariant,
    prob: &SelectionProblem,
    settings: &ScaSettings,
) -> Result<(MethodResult, ScaTrace), CoreError> {
    settings.validate()?;
    let t0 = Instant::now();
    let state = initial_state(prob, settings)?;
    let (state, trace, iters) = iterate(variant, prob, state, settings)?;
    let result = MethodResult {
        method: variant.method(),
        bound: BoundValue {
            value: state.objective,
            direction: BoundDirection::Upper,
        },
        point: state.point,
        iterations: iters,
        seconds: t0.elapsed().as_secs_f64(),
        trace: trace.objectives.clone(),
    };
    Ok((result, trace))
}

/// The SCA loop from a given state; returns the last accepted state, the
/// trace and the total interior-point iterations.
pub fn iterate(
    variant: ScaVariant,
    prob: &SelectionProblem,
    mut state: ScaState,
    settings: &ScaSettings,
) -> Result<(ScaState, ScaTrace, usize), CoreError> {
    settings.validate()?;
    let mut trace = ScaTrace {
        objectives: vec![state.objective],
        subproblem_values: Vec::new(),
        step_norms: Vec::new(),
        status: ScaStatus::MaxIter,
        rejected_rise: None,
    };
    let mut ipm_iters = 0;
    let mut prev_value: Option<f64> = None;
    for k in 1..=settings.max_iter {
        let sub = build_subproblem(variant, prob, &state, settings)?;
        let sol = match solve(&sub.problem, &settings.solver) {
            Ok(s) => s,
            Err(e) => {
                trace.status = ScaStatus::SubproblemFailed(e.to_string());
                break;
            }
        };
        ipm_iters += sol.iterations;
        if !usable(&sol) {
            log::warn!("SCA subproblem {k} returned {:?}", sol.status);
            if k == 1 {
                return Err(match status_error(sol.status, "first SCA subproblem") {
                    CoreError::Infeasible(m) => CoreError::Initialization(m),
                    e => e,
                });
            }
            trace.status = ScaStatus::SubproblemFailed(format!("{:?}", sol.status));
            break;
        }
        let value = sub.objective.eval(&sol.x);
        let mut next = sub.decision.extract(&sol.x);
        // keep Π inside the box against round-off
        next.pi.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        if max_bmi_eig(prob, &next) >= 0.0 {
            next = next.blend(&state.point, settings.shrink);
        }
        let q = if sub.q.is_empty() {
            state.q.clone()
        } else {
            sub.q
                .iter()
                .map(|q| {
                    let m = q.eval(&sol.x);
                    (&m + m.transpose()) * 0.5
                })
                .collect()
        };
        let step = next.distance(&state.point);
        let f = prob.objective(&next.pi, &next.perf);
        let rise = f - state.objective;
        if rise > 0.0 {
            // an inexact subproblem solve; the current point is a better
            // solution of this subproblem, so it is a fixed point
            if rise > 1e-8 * (1.0 + state.objective.abs()) {
                log::warn!("SCA step {k} would raise the objective by {rise:.3e} (solver accuracy); keeping the previous iterate");
            }
            trace.rejected_rise = Some(rise);
            trace.status = ScaStatus::Stalled;
            break;
        }
        state = ScaState {
            k,
            point: next,
            q,
            objective: f,
        };
        trace.objectives.push(f);
        trace.subproblem_values.push(value);
        trace.step_norms.push(step);
        log::debug!("SCA {variant:?} k={k} f={f:.9} L={value:.9} step={step:.3e}");
        if let Some(pv) = prev_value {
            if (value - pv).abs() < settings.tol {
                trace.status = ScaStatus::Converged;
                break;
            }
        }
        if step <= settings.step_tol {
            trace.status = ScaStatus::Stalled;
            break;
        }
        prev_value = Some(value);
    }
    Ok((state, trace, ipm_iters))
}
