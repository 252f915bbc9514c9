//! Selection problems in a common form and their fixed-selection LMIs.
//!
//! Every period carries `(Ã, B̃, partition, metric)` and the matrix
//! inequality
//!
//! ```text
//! [ ÃS + SÃᵀ + αS − B̃ΠZ − ZᵀΠB̃ᵀ + Ψ₁₁   Ψ₁₂ ]
//! [ Ψ₁₂ᵀ                                Ψ₂₂ ] ⪯ 0
//! ```
//!
//! For L∞ control `Ã = A`, `B̃ = B_u`, `Ψ₁₁ = 0`, `Ψ₁₂ = B_w`, `Ψ₂₂ = −αηI`,
//! with the extra performance LMI on `(S, ζ)`. For the Lipschitz observer
//! `Ã = Aᵀ`, `B̃ = Cᵀ`, `S = P`, `Z = Yᵀ`, `Ψ₁₁ = κβ²I`, `Ψ₁₂ = P`,
//! `Ψ₂₂ = −κI`; then `Ã − B̃ΓK` with `K = ZS⁻¹` is the transpose of the
//! error dynamics `A − LΓC`, `L = P⁻¹Y`.

use nalgebra::DMatrix;
use saa_conic::linalg::{max_eigenvalue, min_eigenvalue, right_solve_spd};
use saa_conic::{solve, ConicProblem, ConicSolution, LinExpr, MatExpr, Model, SolveStatus, SolverSettings};

use crate::error::CoreError;
use crate::logistics::LogisticConstraints;
use crate::system::{CpsSystem, MultiPeriodSpec, SelectionWeights};

/// Lower bound on `S` and `ζ` in every solve.
pub const EPS1: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Linf {
        b_w: DMatrix<f64>,
        c_z: DMatrix<f64>,
        d_wz: DMatrix<f64>,
        alpha: f64,
        eta: f64,
    },
    Lipschitz {
        beta: f64,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Actuator,
    Sensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub partition: Vec<usize>,
    pub metric: Metric,
}

impl Period {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn alpha(&self) -> f64 {
        match self.metric {
            Metric::Linf { alpha, .. } | Metric::Lipschitz { alpha, .. } => alpha,
        }
    }

    /// Coefficient of the performance scalar in the objective.
    pub fn perf_weight(&self) -> f64 {
        match self.metric {
            Metric::Linf { eta, .. } => eta + 1.0,
            Metric::Lipschitz { .. } => 0.0,
        }
    }

    /// Expands per-node values to the diagonal of `Π`.
    pub fn expand(&self, node_values: &[f64]) -> Vec<f64> {
        self.partition
            .iter()
            .zip(node_values)
            .flat_map(|(&k, &v)| std::iter::repeat_n(v, k))
            .collect()
    }

    /// Input index ranges of each node.
    pub fn node_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut off = 0;
        self.partition
            .iter()
            .map(|&k| {
                off += k;
                off - k..off
            })
            .collect()
    }
}

/// A (possibly multi-period) selection problem in common form.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    pub kind: ProblemKind,
    pub periods: Vec<Period>,
    pub logistics: LogisticConstraints,
    /// One weight per stacked selection entry.
    pub weights: Vec<f64>,
}

fn linf_period(s: &CpsSystem, w: &SelectionWeights) -> Period {
    Period {
        a: s.a.clone(),
        b: s.b_u.clone(),
        partition: s.partition.clone(),
        metric: Metric::Linf {
            b_w: s.b_w.clone(),
            c_z: s.c_z.clone(),
            d_wz: s.d_wz.clone(),
            alpha: w.alpha,
            eta: w.eta,
        },
    }
}

/// Stacks the periods of `spec` into one L∞ actuator-selection problem:
/// per-period `(S^j, Z^j, ζ^j, π^j)` blocks coupled only through `Hπ ≤ h`.
pub fn assemble_multiperiod(spec: &MultiPeriodSpec) -> Result<SelectionProblem, CoreError> {
    spec.validate()?;
    let p = SelectionProblem {
        kind: ProblemKind::Actuator,
        periods: spec.systems.iter().map(|s| linf_period(s, &spec.weights)).collect(),
        logistics: spec.logistics.clone(),
        weights: spec.weights.alpha_pi.clone(),
    };
    p.validate()?;
    Ok(p)
}

impl SelectionProblem {
    /// Sensor selection for the Lipschitz observer. `logistics` and
    /// `weights` range over sensor nodes.
    pub fn observer(
        systems: &[CpsSystem],
        logistics: LogisticConstraints,
        weights: Vec<f64>,
        alpha: f64,
    ) -> Result<Self, CoreError> {
        let mut periods = Vec::with_capacity(systems.len());
        for s in systems {
            s.validate()?;
            let c =
                s.c.as_ref()
                    .ok_or_else(|| CoreError::InvalidArgument("observer selection needs C".into()))?;
            let beta = s
                .beta
                .ok_or_else(|| CoreError::InvalidArgument("observer selection needs beta".into()))?;
            periods.push(Period {
                a: s.a.transpose(),
                b: c.transpose(),
                partition: s.sensor_partition_or_default()?,
                metric: Metric::Lipschitz { beta, alpha },
            });
        }
        let p = Self {
            kind: ProblemKind::Sensor,
            periods,
            logistics,
            weights,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn observer_from_spec(spec: &MultiPeriodSpec) -> Result<Self, CoreError> {
        Self::observer(
            &spec.systems,
            spec.logistics.clone(),
            spec.weights.alpha_pi.clone(),
            spec.weights.alpha,
        )
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let first = self
            .periods
            .first()
            .ok_or_else(|| CoreError::InvalidArgument("no periods".into()))?;
        match &first.metric {
            Metric::Linf { alpha, eta, .. } if !(*alpha > 0.0 && *eta > 0.0) => {
                return Err(CoreError::InvalidArgument("alpha and eta must be positive".into()))
            }
            Metric::Lipschitz { alpha, beta } if !(*alpha > 0.0 && *beta > 0.0) => {
                return Err(CoreError::InvalidArgument("alpha and beta must be positive".into()))
            }
            _ => {}
        }
        for p in &self.periods {
            if p.partition != first.partition || p.n_x() != first.n_x() || p.b.nrows() != p.n_x() {
                return Err(CoreError::Dimension("periods have incompatible dimensions".into()));
            }
            if p.partition.iter().sum::<usize>() != p.n_u() || p.partition.contains(&0) {
                return Err(CoreError::Dimension("partition does not match input count".into()));
            }
        }
        if self.logistics.n_nodes() != self.n_nodes() || self.logistics.periods() != self.periods.len() {
            return Err(CoreError::Dimension(
                "logistic rows do not match the selection vector".into(),
            ));
        }
        if self.weights.len() != self.len() || self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(CoreError::Dimension(
                "weights must be finite, nonnegative, one per entry".into(),
            ));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.periods[0].partition.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    /// Length of the stacked selection vector.
    pub fn len(&self) -> usize {
        self.n_nodes() * self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn period_slice<'a, T>(&self, j: usize, pi: &'a [T]) -> &'a [T] {
        let n = self.n_nodes();
        &pi[j * n..(j + 1) * n]
    }

    /// `Σ_j w_j·perf_j + weightsᵀπ`.
    pub fn objective(&self, pi: &[f64], perf: &[f64]) -> f64 {
        let a: f64 = self.periods.iter().zip(perf).map(|(p, v)| p.perf_weight() * v).sum();
        a + self.weights.iter().zip(pi).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// `(η+1)ζ + α_πᵀπ`.
pub fn evaluate_objective(pi: &[f64], zeta: f64, weights: &SelectionWeights) -> f64 {
    (weights.eta + 1.0) * zeta + weights.alpha_pi.iter().zip(pi).map(|(a, p)| a * p).sum::<f64>()
}

/// `√((η+1)ζ)`: the gain from `‖w‖_∞` to `‖z‖₂`.
pub fn performance_index(zeta: f64, eta: f64) -> f64 {
    ((eta + 1.0) * zeta).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundDirection {
    Lower,
    Upper,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub direction: BoundDirection,
}

/// Conic variables of one period.
#[derive(Debug, Clone)]
pub struct PeriodVars {
    pub s: MatExpr,
    pub z: MatExpr,
    /// `ζ` (L∞) or `κ` (observer).
    pub perf: LinExpr,
}

/// Named decision variables with their position in the conic `x`.
#[derive(Debug, Clone)]
pub struct LinfDecision {
    pub periods: Vec<PeriodVars>,
    /// Stacked selection; constants when fixed.
    pub pi: Vec<LinExpr>,
}

/// Values of `(S, Z, perf, π)` for every period.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub s: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub perf: Vec<f64>,
    pub pi: Vec<f64>,
}

impl LinfDecision {
    pub fn extract(&self, x: &[f64]) -> Point {
        Point {
            s: self.periods.iter().map(|v| v.s.eval(x)).collect(),
            z: self.periods.iter().map(|v| v.z.eval(x)).collect(),
            perf: self.periods.iter().map(|v| v.perf.eval(x)).collect(),
            pi: self.pi.iter().map(|e| e.eval(x)).collect(),
        }
    }
}

impl Point {
    /// Convex combination `(1−t)·self + t·other`.
    pub fn blend(&self, other: &Point, t: f64) -> Point {
        let mix = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * (1.0 - t) + b * t;
        Point {
            s: self.s.iter().zip(&other.s).map(|(a, b)| mix(a, b)).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| mix(a, b)).collect(),
            perf: self
                .perf
                .iter()
                .zip(&other.perf)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
            pi: self
                .pi
                .iter()
                .zip(&other.pi)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }

    /// Euclidean distance over all coordinates.
    pub fn distance(&self, other: &Point) -> f64 {
        let mut d = 0.0;
        for (a, b) in self.s.iter().zip(&other.s).chain(self.z.iter().zip(&other.z)) {
            d += (a - b).norm_squared();
        }
        for (a, b) in self.perf.iter().zip(&other.perf).chain(self.pi.iter().zip(&other.pi)) {
            d += (a - b) * (a - b);
        }
        d.sqrt()
    }
}

/// Creates `S`, `Z` and the performance scalar for `p`, with `S ⪰ ε₁I`
/// (`P ⪰ I` for the observer, equivalent by homogeneity), `perf ≥ ε₁` and,
/// for L∞, the performance LMI. Rows of `Z` for inputs flagged inactive
/// are the constant zero.
pub(crate) fn add_period_vars(model: &mut Model, p: &Period, active: Option<&[bool]>) -> PeriodVars {
    let n = p.n_x();
    let s = model.sym_matrix(n);
    let mut z = MatExpr::zeros(p.n_u(), n);
    for r in 0..p.n_u() {
        if active.is_none_or(|a| a[r]) {
            for c in 0..n {
                z.set(r, c, model.scalar());
            }
        }
    }
    let perf = model.scalar();
    let floor = match p.metric {
        Metric::Linf { .. } => EPS1,
        Metric::Lipschitz { .. } => 1.0,
    };
    model.add_psd(&s.add_constant(&(-floor * DMatrix::identity(n, n))));
    model.add_ge(perf.clone() - LinExpr::constant(EPS1));
    if let Metric::Linf { c_z, d_wz, .. } = &p.metric {
        let nz = c_z.nrows();
        let nw = d_wz.ncols();
        let neg_s = s.scale(-1.0);
        let neg_i = MatExpr::constant(&(-DMatrix::identity(nw, nw)));
        let cs = s.left_mul(c_z);
        let sc = cs.transpose();
        let dt = MatExpr::constant(&d_wz.transpose());
        let d = MatExpr::constant(d_wz);
        let mz = MatExpr::from_fn(nz, nz, |i, j| if i == j { -perf.clone() } else { LinExpr::zero() });
        let blk = MatExpr::blocks(&[
            vec![Some(&neg_s), None, Some(&sc)],
            vec![None, Some(&neg_i), Some(&dt)],
            vec![Some(&cs), Some(&d), Some(&mz)],
        ]);
        model.add_nsd(&blk);
    }
    PeriodVars { s, z, perf }
}

/// `ÃS + SÃᵀ + αS + Ψ₁₁`.
pub(crate) fn lyap_block(p: &Period, v: &PeriodVars) -> MatExpr {
    let mut out = v.s.left_mul(&p.a).sym_sum().add(&v.s.scale(p.alpha()));
    if let Metric::Lipschitz { beta, .. } = p.metric {
        for i in 0..p.n_x() {
            out.get_mut(i, i).add_scaled(&v.perf, beta * beta);
        }
    }
    out
}

pub(crate) fn psi12(p: &Period, v: &PeriodVars) -> MatExpr {
    match &p.metric {
        Metric::Linf { b_w, .. } => MatExpr::constant(b_w),
        Metric::Lipschitz { .. } => v.s.clone(),
    }
}

pub(crate) fn psi22(p: &Period, v: &PeriodVars) -> MatExpr {
    match &p.metric {
        Metric::Linf { b_w, alpha, eta, .. } => {
            let k = b_w.ncols();
            MatExpr::constant(&(-alpha * eta * DMatrix::identity(k, k)))
        }
        Metric::Lipschitz { .. } => {
            let n = p.n_x();
            MatExpr::from_fn(n, n, |i, j| if i == j { -v.perf.clone() } else { LinExpr::zero() })
        }
    }
}

/// Main LMI with the bilinear product `B̃ΠZ` supplied as `bz`.
pub(crate) fn main_lmi(p: &Period, v: &PeriodVars, bz: &MatExpr) -> MatExpr {
    let top = lyap_block(p, v).sub(&bz.sym_sum());
    let p12 = psi12(p, v);
    let p21 = p12.transpose();
    let p22 = psi22(p, v);
    MatExpr::blocks(&[vec![Some(&top), Some(&p12)], vec![Some(&p21), Some(&p22)]])
}

/// Adds `0 ≤ π ≤ 1` and `Hπ ≤ h` for variable selections.
pub(crate) fn add_selection_rows(model: &mut Model, logistics: &LogisticConstraints, pi: &[LinExpr]) {
    for e in pi {
        model.add_ge(e.clone());
        model.add_le(e.clone() - LinExpr::constant(1.0));
    }
    for (row, h) in logistics.rows() {
        let mut e = LinExpr::constant(-h);
        for (c, e_pi) in row.iter().zip(pi) {
            e.add_scaled(e_pi, *c);
        }
        e.compact();
        if e.terms.is_empty() {
            // constant row; infeasible constants are caught by the caller
            continue;
        }
        model.add_le(e);
    }
}

/// Objective `Σ w_j perf_j + weightsᵀπ` as an expression.
pub(crate) fn objective_expr(prob: &SelectionProblem, d: &LinfDecision) -> LinExpr {
    let mut obj = LinExpr::zero();
    for (p, v) in prob.periods.iter().zip(&d.periods) {
        obj.add_scaled(&v.perf, p.perf_weight());
    }
    for (w, e) in prob.weights.iter().zip(&d.pi) {
        obj.add_scaled(e, *w);
    }
    obj
}

/// Fixed-selection SDP: the bilinear term is linear once `Π` is constant.
/// The objective is the performance part only (`(η+1)ζ` summed over
/// periods; zero for the observer).
pub fn build_fixed(prob: &SelectionProblem, pi: &[f64]) -> Result<(ConicProblem, LinfDecision), CoreError> {
    if pi.len() != prob.len() {
        return Err(CoreError::Dimension(format!(
            "selection of length {} for {} entries",
            pi.len(),
            prob.len()
        )));
    }
    if pi.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CoreError::InvalidArgument(
            "fixed selection entries must lie in [0, 1]".into(),
        ));
    }
    let mut model = Model::new();
    let mut periods = Vec::with_capacity(prob.n_periods());
    let mut obj = LinExpr::zero();
    for (j, p) in prob.periods.iter().enumerate() {
        let diag = p.expand(prob.period_slice(j, pi));
        let active: Vec<bool> = diag.iter().map(|&v| v != 0.0).collect();
        let v = add_period_vars(&mut model, p, Some(&active));
        let bpi = DMatrix::from_fn(p.n_x(), p.n_u(), |r, c| p.b[(r, c)] * diag[c]);
        let bz = v.z.left_mul(&bpi);
        model.add_nsd(&main_lmi(p, &v, &bz));
        obj.add_scaled(&v.perf, p.perf_weight());
        periods.push(v);
    }
    model.minimize(obj);
    let d = LinfDecision {
        periods,
        pi: pi.iter().map(|&v| LinExpr::constant(v)).collect(),
    };
    Ok((model.build()?, d))
}

/// Single-period L∞ synthesis with `Π = diag(pi_diag)` fixed (one entry per
/// input).
pub fn build_linf_fixed_pi(
    system: &CpsSystem,
    pi_diag: &[f64],
    weights: &SelectionWeights,
) -> Result<(ConicProblem, LinfDecision), CoreError> {
    system.validate()?;
    if pi_diag.len() != system.n_u() {
        return Err(CoreError::Dimension(format!(
            "Π diagonal of length {} for {} inputs",
            pi_diag.len(),
            system.n_u()
        )));
    }
    // one node per input so arbitrary diagonals are representable
    let mut p = linf_period(system, weights);
    p.partition = vec![1; system.n_u()];
    let prob = SelectionProblem {
        kind: ProblemKind::Actuator,
        periods: vec![p],
        logistics: LogisticConstraints::empty(system.n_u(), 1),
        weights: vec![0.0; system.n_u()],
    };
    build_fixed(&prob, pi_diag)
}

/// Sensor-fixed observer SDP over `(P, Y, κ)` with `Γ = diag(gamma_diag)`
/// (one entry per output).
pub fn build_lipschitz_observer(
    system: &CpsSystem,
    gamma_diag: &[f64],
    alpha: f64,
) -> Result<(ConicProblem, LinfDecision), CoreError> {
    let mut s = system.clone();
    let ny =
        s.c.as_ref()
            .ok_or_else(|| CoreError::InvalidArgument("observer needs C".into()))?
            .nrows();
    s.sensor_partition = Some(vec![1; ny]);
    let prob = SelectionProblem::observer(&[s], LogisticConstraints::empty(ny, 1), vec![0.0; ny], alpha)?;
    build_fixed(&prob, gamma_diag)
}

/// Find `S ≻ 0` with `AS + SAᵀ ⪯ B_uB_uᵀ`, posed homogeneously as
/// `S ⪰ I`, `AS + SAᵀ ⪯ t·B_uB_uᵀ`, `t ≥ 0` (divide by `t` to go back;
/// with `t = 0` any small multiple of `S` works). The unit margin keeps
/// the infeasibility certificate well scaled.
pub fn build_stabilization_feasibility(system: &CpsSystem) -> Result<ConicProblem, CoreError> {
    system.validate()?;
    let n = system.n_x();
    let mut model = Model::new();
    let s = model.sym_matrix(n);
    let t = model.scalar();
    model.add_ge(t.clone());
    model.add_psd(&s.add_constant(&(-DMatrix::identity(n, n))));
    let bb = &system.b_u * system.b_u.transpose();
    let tbb = MatExpr::from_fn(n, n, |i, j| t.clone() * bb[(i, j)]);
    model.add_nsd(&s.left_mul(&system.a).sym_sum().sub(&tbb));
    Ok(model.build()?)
}

/// A solved fixed-selection SDP.
#[derive(Debug, Clone)]
pub struct FixedSolution {
    pub point: Point,
    /// Full objective, selection weights included.
    pub objective: f64,
    /// `K = ZS⁻¹` per period.
    pub gains: Vec<DMatrix<f64>>,
    pub iterations: usize,
}

/// Residual level at which a stalled solve (`MaxIter`, best iterate) is
/// still used. Degenerate instances stall a little above the requested
/// tolerance, and the downstream comparisons are at the 1e-5 level or looser.
pub const ACCEPT_TOL: f64 = 1e-6;

pub fn usable(sol: &ConicSolution) -> bool {
    match sol.status {
        SolveStatus::Optimal => true,
        SolveStatus::MaxIter => {
            let ok = sol.primal_residual.max(sol.dual_residual).max(sol.gap) <= ACCEPT_TOL;
            if ok {
                log::debug!(
                    "accepting stalled iterate (pres {:.1e} dres {:.1e} gap {:.1e})",
                    sol.primal_residual,
                    sol.dual_residual,
                    sol.gap
                );
            }
            ok
        }
        _ => false,
    }
}

pub(crate) fn status_error(status: SolveStatus, context: &str) -> CoreError {
    match status {
        SolveStatus::PrimalInfeasible => CoreError::Infeasible(context.to_string()),
        s => CoreError::Solver {
            status: s,
            context: context.to_string(),
        },
    }
}

pub fn solve_fixed(prob: &SelectionProblem, pi: &[f64], settings: &SolverSettings) -> Result<FixedSolution, CoreError> {
    let (cp, d) = build_fixed(prob, pi)?;
    let sol = solve(&cp, settings)?;
    if !usable(&sol) {
        return Err(status_error(sol.status, "fixed-selection SDP"));
    }
    let point = d.extract(&sol.x);
    let gains = gains(&point)?;
    Ok(FixedSolution {
        objective: prob.objective(&point.pi, &point.perf),
        point,
        gains,
        iterations: sol.iterations,
    })
}

pub fn gains(point: &Point) -> Result<Vec<DMatrix<f64>>, CoreError> {
    point
        .z
        .iter()
        .zip(&point.s)
        .map(|(z, s)| Ok(right_solve_spd(z, s)?))
        .collect()
}

/// `Ã − B̃ΠK` for period `p`.
pub fn closed_loop(p: &Period, pi_node: &[f64], k: &DMatrix<f64>) -> DMatrix<f64> {
    let diag = p.expand(pi_node);
    let bpi = DMatrix::from_fn(p.n_x(), p.n_u(), |r, c| p.b[(r, c)] * diag[c]);
    &p.a - bpi * k
}

/// Numeric `ÃS + SÃᵀ + αS + Ψ₁₁`.
pub fn lyap_value(p: &Period, s: &DMatrix<f64>, perf: f64) -> DMatrix<f64> {
    let as_ = &p.a * s;
    let mut top = &as_ + as_.transpose() + s * p.alpha();
    if let Metric::Lipschitz { beta, .. } = p.metric {
        top += DMatrix::identity(p.n_x(), p.n_x()) * (perf * beta * beta);
    }
    top
}

/// Numeric `(Ψ₁₂, Ψ₂₂)`.
pub fn psi_values(p: &Period, s: &DMatrix<f64>, perf: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    match &p.metric {
        Metric::Linf { b_w, alpha, eta, .. } => {
            (b_w.clone(), -alpha * eta * DMatrix::identity(b_w.ncols(), b_w.ncols()))
        }
        Metric::Lipschitz { .. } => (s.clone(), -perf * DMatrix::identity(p.n_x(), p.n_x())),
    }
}

/// `[[top, Ψ₁₂],[Ψ₁₂ᵀ, Ψ₂₂]]`.
pub(crate) fn bordered(top: &DMatrix<f64>, p12: &DMatrix<f64>, p22: &DMatrix<f64>) -> DMatrix<f64> {
    let n = top.nrows();
    let k = p12.ncols();
    let mut m = DMatrix::zeros(n + k, n + k);
    m.view_mut((0, 0), (n, n)).copy_from(top);
    m.view_mut((0, n), (n, k)).copy_from(p12);
    m.view_mut((n, 0), (k, n)).copy_from(&p12.transpose());
    m.view_mut((n, n), (k, k)).copy_from(p22);
    m
}

/// Numeric value of the main matrix inequality at a point.
pub fn main_lmi_value(p: &Period, s: &DMatrix<f64>, z: &DMatrix<f64>, pi_node: &[f64], perf: f64) -> DMatrix<f64> {
    let diag = p.expand(pi_node);
    let bpi = DMatrix::from_fn(p.n_x(), p.n_u(), |r, c| p.b[(r, c)] * diag[c]);
    let x = &bpi * z;
    let top = lyap_value(p, s, perf) - &x - x.transpose();
    let (p12, p22) = psi_values(p, s, perf);
    bordered(&top, &p12, &p22)
}

/// Numeric value of the L∞ performance LMI (`None` for the observer).
pub fn perf_lmi_value(p: &Period, s: &DMatrix<f64>, perf: f64) -> Option<DMatrix<f64>> {
    let Metric::Linf { c_z, d_wz, .. } = &p.metric else {
        return None;
    };
    let n = p.n_x();
    let nw = d_wz.ncols();
    let nz = c_z.nrows();
    let mut m = DMatrix::zeros(n + nw + nz, n + nw + nz);
    m.view_mut((0, 0), (n, n)).copy_from(&(-s));
    m.view_mut((n, n), (nw, nw)).copy_from(&(-DMatrix::identity(nw, nw)));
    let cs = c_z * s;
    m.view_mut((n + nw, 0), (nz, n)).copy_from(&cs);
    m.view_mut((0, n + nw), (n, nz)).copy_from(&cs.transpose());
    m.view_mut((n + nw, n), (nz, nw)).copy_from(d_wz);
    m.view_mut((n, n + nw), (nw, nz)).copy_from(&d_wz.transpose());
    m.view_mut((n + nw, n + nw), (nz, nz))
        .copy_from(&(-perf * DMatrix::identity(nz, nz)));
    Some(m)
}

/// Largest eigenvalue over every period's matrix inequalities, each
/// divided by `1 + ‖·‖_F` of its block; also `−λ_min(S)` and `−perf`.
pub fn bmi_violation(prob: &SelectionProblem, point: &Point) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (j, p) in prob.periods.iter().enumerate() {
        let pin = prob.period_slice(j, &point.pi);
        let m = main_lmi_value(p, &point.s[j], &point.z[j], pin, point.perf[j]);
        worst = worst.max(max_eigenvalue(&m) / (1.0 + m.norm()));
        if let Some(q) = perf_lmi_value(p, &point.s[j], point.perf[j]) {
            worst = worst.max(max_eigenvalue(&q) / (1.0 + q.norm()));
        }
        worst = worst.max(-min_eigenvalue(&point.s[j])).max(-point.perf[j]);
    }
    worst
}
