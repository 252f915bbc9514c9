//! Exact selection: the Big-M mixed-integer SDP by best-first
//! branch-and-bound, and brute-force enumeration as an oracle.
//!
//! With `G = ΠZ` replaced by the rows `|G − Z| ≤ M(1 − π_i)` and
//! `|G| ≤ Mπ_i` for every entry of node `i`'s rows, each node of the tree
//! is an SDP in which unfixed entries of `π` range over `[0, 1]`. Fixed
//! entries are substituted: `π_i = 1` makes `G = Z` with `|Z| ≤ M`,
//! `π_i = 0` makes `G = 0`. Rows of `Z` of nodes not fixed on appear in
//! nothing but the Big-M rows and are projected out exactly, so the node
//! relaxation carries `Z` only for nodes fixed on.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use nalgebra::DMatrix;
use saa_conic::{solve, ConicProblem, LinExpr, MatExpr, Model, SolveStatus, SolverSettings};

use crate::error::CoreError;
use crate::lmi::{
    add_period_vars, add_selection_rows, main_lmi, objective_expr, solve_fixed, usable, LinfDecision, Point,
    SelectionProblem,
};

#[derive(Debug, Clone)]
pub struct BigMDecision {
    pub base: LinfDecision,
    pub g: Vec<MatExpr>,
}

/// Big-M model with `domain[k] = Some(b)` fixing stacked entry `k`.
pub fn build_bigm(
    prob: &SelectionProblem,
    big_m: f64,
    domain: &[Option<bool>],
) -> Result<(ConicProblem, BigMDecision), CoreError> {
    prob.validate()?;
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(CoreError::InvalidArgument(format!("M must be positive, got {big_m}")));
    }
    if domain.len() != prob.len() {
        return Err(CoreError::Dimension(format!(
            "domain of length {} for {} entries",
            domain.len(),
            prob.len()
        )));
    }
    let mut model = Model::new();
    let pi: Vec<LinExpr> = domain
        .iter()
        .map(|d| match d {
            Some(true) => LinExpr::constant(1.0),
            Some(false) => LinExpr::constant(0.0),
            None => model.scalar(),
        })
        .collect();
    if let Some(row) = violated_constant_row(prob, domain) {
        return Err(CoreError::Infeasible(format!(
            "logistic row {row} violated by the fixed entries"
        )));
    }
    add_selection_rows(&mut model, &prob.logistics, &pi);
    let n = prob.n_nodes();
    let mut periods = Vec::with_capacity(prob.n_periods());
    let mut gs = Vec::with_capacity(prob.n_periods());
    let m_const = LinExpr::constant(big_m);
    for (j, p) in prob.periods.iter().enumerate() {
        // Z enters only through G: rows fixed on keep G = Z, |Z| ≤ M. For
        // the other rows some Z with |G − Z| ≤ M(1 − π) always exists
        // (take Z = G), so Z is projected out and only |G| ≤ Mπ remains.
        let mut active = vec![false; p.n_u()];
        for (node, range) in p.node_ranges().into_iter().enumerate() {
            if domain[j * n + node] == Some(true) {
                range.for_each(|r| active[r] = true);
            }
        }
        let v = add_period_vars(&mut model, p, Some(&active));
        let mut g = MatExpr::zeros(p.n_u(), p.n_x());
        for (node, range) in p.node_ranges().into_iter().enumerate() {
            let k = j * n + node;
            for row in range {
                for col in 0..p.n_x() {
                    let ge = match domain[k] {
                        Some(true) => {
                            let z = v.z.get(row, col).clone();
                            bound_abs(&mut model, &z, &m_const);
                            z
                        }
                        Some(false) => LinExpr::zero(),
                        None => {
                            let ge = model.scalar();
                            bound_abs(&mut model, &ge, &(pi[k].clone() * big_m));
                            ge
                        }
                    };
                    g.set(row, col, ge);
                }
            }
        }
        model.add_nsd(&main_lmi(p, &v, &g.left_mul(&p.b)));
        periods.push(v);
        gs.push(g);
    }
    let base = LinfDecision { periods, pi };
    model.minimize(objective_expr(prob, &base));
    Ok((model.build()?, BigMDecision { base, g: gs }))
}

/// `|e| ≤ r` as two rows.
fn bound_abs(model: &mut Model, e: &LinExpr, r: &LinExpr) {
    model.add_le(e.clone() - r.clone());
    model.add_le(-e.clone() - r.clone());
}

/// First logistic row whose every nonzero column is fixed and which the
/// fixed values violate.
fn violated_constant_row(prob: &SelectionProblem, domain: &[Option<bool>]) -> Option<usize> {
    prob.logistics.rows().enumerate().find_map(|(idx, (row, h))| {
        let mut lhs = 0.0;
        for (c, d) in row.iter().zip(domain) {
            if *c != 0.0 {
                match d {
                    Some(true) => lhs += c,
                    Some(false) => {}
                    None => return None,
                }
            }
        }
        (lhs > h + 1e-9 * (1.0 + h.abs())).then_some(idx)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbSettings {
    pub max_nodes: usize,
    pub gap_tol: f64,
    pub big_m: f64,
    /// Threads for solving sibling nodes; results do not depend on it.
    pub workers: usize,
    pub solver: SolverSettings,
}

impl Default for BnbSettings {
    fn default() -> Self {
        Self {
            max_nodes: 300,
            gap_tol: 1e-4,
            big_m: 1e4,
            workers: 1,
            solver: SolverSettings::with_tolerance(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub fixed: Vec<Option<bool>>,
    pub bound: f64,
    pub depth: usize,
    /// Relaxed selection at this node.
    pub pi: Vec<f64>,
}

impl BnbNode {
    pub fn free(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&k| self.fixed[k].is_none()).collect()
    }
}

struct Queued(BnbNode, u64);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // max-heap: smaller bound first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then(other.1.cmp(&self.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbProgress {
    pub nodes: usize,
    pub lower_bound: f64,
    pub incumbent: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub pi: Vec<bool>,
    pub objective: f64,
    pub lower_bound: f64,
    /// `(incumbent − bound)/|incumbent|`.
    pub gap: f64,
    pub nodes: usize,
    pub seconds: f64,
    /// Whether the gap tolerance was reached before the node cap.
    pub converged: bool,
    pub point: Point,
    pub g: Vec<DMatrix<f64>>,
    pub progress: Vec<BnbProgress>,
}

enum NodeOutcome {
    Solved {
        bound: f64,
        pi: Vec<f64>,
        point: Point,
        g: Vec<DMatrix<f64>>,
    },
    Infeasible,
    /// The solver gave no usable point; the parent bound still holds.
    Unsolved,
}

fn solve_node(prob: &SelectionProblem, fixed: &[Option<bool>], s: &BnbSettings) -> Result<NodeOutcome, CoreError> {
    let (cp, d) = match build_bigm(prob, s.big_m, fixed) {
        Ok(v) => v,
        Err(CoreError::Infeasible(_)) => return Ok(NodeOutcome::Infeasible),
        Err(e) => return Err(e),
    };
    let sol = solve(&cp, &s.solver)?;
    if usable(&sol) {
        let point = d.base.extract(&sol.x);
        let bound = prob.objective(&point.pi, &point.perf);
        return Ok(NodeOutcome::Solved {
            bound,
            pi: point.pi.clone(),
            g: d.g.iter().map(|g| g.eval(&sol.x)).collect(),
            point,
        });
    }
    match sol.status {
        SolveStatus::PrimalInfeasible => Ok(NodeOutcome::Infeasible),
        other => {
            log::warn!(
                "branch-and-bound node solve ended with {other:?} (pres {:.1e} dres {:.1e} gap {:.1e})",
                sol.primal_residual,
                sol.dual_residual,
                sol.gap
            );
            Ok(NodeOutcome::Unsolved)
        }
    }
}

const INTEGRAL_TOL: f64 = 1e-6;

fn most_fractional(pi: &[f64], fixed: &[Option<bool>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, (&v, f)) in pi.iter().zip(fixed).enumerate() {
        if f.is_some() {
            continue;
        }
        let frac = v.min(1.0 - v);
        if frac <= INTEGRAL_TOL {
            continue;
        }
        if best.is_none_or(|(_, b)| frac > b) {
            best = Some((k, frac));
        }
    }
    best.map(|(k, _)| k)
}

fn gap_of(inc: f64, lb: f64) -> f64 {
    if inc.is_finite() {
        ((inc - lb) / inc.abs().max(1e-12)).max(0.0)
    } else {
        f64::INFINITY
    }
}

pub fn branch_and_bound(prob: &SelectionProblem, settings: &BnbSettings) -> Result<BnbResult, CoreError> {
    let t0 = Instant::now();
    if settings.max_nodes == 0 || !(settings.gap_tol >= 0.0) {
        return Err(CoreError::InvalidArgument(
            "max_nodes ≥ 1 and gap_tol ≥ 0 required".into(),
        ));
    }
    let len = prob.len();
    let root_fixed = vec![None; len];
    let mut nodes = 0usize;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut progress = Vec::new();
    let mut incumbent: Option<(f64, Vec<bool>, Point, Vec<DMatrix<f64>>)> = None;

    let root = solve_node(prob, &root_fixed, settings)?;
    nodes += 1;
    match root {
        NodeOutcome::Infeasible => {
            return Err(CoreError::Infeasible("root relaxation of the Big-M problem".into()));
        }
        NodeOutcome::Unsolved => {
            return Err(CoreError::Solver {
                status: SolveStatus::MaxIter,
                context: "root relaxation of the Big-M problem".into(),
            });
        }
        NodeOutcome::Solved { bound, pi, point, g } => {
            consider(
                prob,
                settings,
                &root_fixed,
                bound,
                pi,
                point,
                g,
                0,
                &mut incumbent,
                &mut heap,
                &mut seq,
                &mut nodes,
            )?;
        }
    }
    let mut lb = heap.peek().map_or(f64::INFINITY, |q: &Queued| q.0.bound);
    loop {
        let inc_val = incumbent.as_ref().map_or(f64::INFINITY, |i| i.0);
        let open_lb = heap.peek().map_or(f64::INFINITY, |q| q.0.bound);
        // the global bound never decreases: children bounds are at least
        // the parent's up to solver noise
        lb = lb.max(open_lb.min(inc_val)).min(inc_val);
        progress.push(BnbProgress {
            nodes,
            lower_bound: lb,
            incumbent: inc_val,
            gap: gap_of(inc_val, lb),
        });
        log::info!(
            "bnb nodes={nodes} bound={lb:.6} incumbent={inc_val:.6} gap={:.3e}",
            gap_of(inc_val, lb)
        );
        let Some(Queued(node, _)) = heap.pop() else { break };
        if node.bound >= inc_val - settings.gap_tol * inc_val.abs() {
            // best-first: every remaining node is at least as large
            heap.clear();
            lb = lb.max(node.bound.min(inc_val));
            continue;
        }
        if nodes >= settings.max_nodes {
            heap.push(Queued(node, 0));
            break;
        }
        let Some(k) = most_fractional(&node.pi, &node.fixed) else {
            // integral relaxation already handled as a candidate
            continue;
        };
        let children: Vec<Vec<Option<bool>>> = [false, true]
            .iter()
            .map(|&b| {
                let mut f = node.fixed.clone();
                f[k] = Some(b);
                f
            })
            .collect();
        let outcomes = solve_children(prob, &children, settings)?;
        for (fixed, out) in children.into_iter().zip(outcomes) {
            nodes += 1;
            if let NodeOutcome::Unsolved = out {
                if fixed.iter().any(|f| f.is_none()) {
                    // keep it with the parent's bound and branch on its first free entry
                    seq += 1;
                    let pi = fixed.iter().map(|f| f.map_or(0.5, |b| b as u8 as f64)).collect();
                    heap.push(Queued(
                        BnbNode {
                            fixed,
                            bound: node.bound,
                            depth: node.depth + 1,
                            pi,
                        },
                        seq,
                    ));
                }
                continue;
            }
            if let NodeOutcome::Solved { bound, pi, point, g } = out {
                consider(
                    prob,
                    settings,
                    &fixed,
                    bound.max(node.bound),
                    pi,
                    point,
                    g,
                    node.depth + 1,
                    &mut incumbent,
                    &mut heap,
                    &mut seq,
                    &mut nodes,
                )?;
            }
        }
    }
    let (obj, pi, point, g) =
        incumbent.ok_or_else(|| CoreError::Infeasible("no binary selection found within the node cap".into()))?;
    let open_lb = heap.peek().map_or(obj, |q| q.0.bound.min(obj));
    let lower_bound = lb.max(open_lb.min(obj)).min(obj);
    let gap = gap_of(obj, lower_bound);
    Ok(BnbResult {
        converged: gap <= settings.gap_tol || heap.is_empty(),
        pi,
        objective: obj,
        lower_bound,
        gap,
        nodes,
        seconds: t0.elapsed().as_secs_f64(),
        point,
        g,
        progress,
    })
}

fn solve_children(
    prob: &SelectionProblem,
    children: &[Vec<Option<bool>>],
    settings: &BnbSettings,
) -> Result<Vec<NodeOutcome>, CoreError> {
    if settings.workers <= 1 {
        return children.iter().map(|f| solve_node(prob, f, settings)).collect();
    }
    std::thread::scope(|sc| {
        let handles: Vec<_> = children
            .iter()
            .map(|f| sc.spawn(move || solve_node(prob, f, settings)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("node solver thread panicked"))
            .collect()
    })
}

/// Queues a solved node, or turns an integral one into an incumbent
/// candidate evaluated on the Big-M model with every entry fixed.
#[allow(clippy::too_many_arguments)]
fn consider(
    prob: &SelectionProblem,
    settings: &BnbSettings,
    fixed: &[Option<bool>],
    bound: f64,
    pi: Vec<f64>,
    point: Point,
    g: Vec<DMatrix<f64>>,
    depth: usize,
    incumbent: &mut Option<(f64, Vec<bool>, Point, Vec<DMatrix<f64>>)>,
    heap: &mut BinaryHeap<Queued>,
    seq: &mut u64,
    nodes: &mut usize,
) -> Result<(), CoreError> {
    if most_fractional(&pi, fixed).is_none() {
        let bin: Vec<bool> = pi.iter().map(|&v| v > 0.5).collect();
        let full: Vec<Option<bool>> = bin.iter().map(|&b| Some(b)).collect();
        let leaf = if fixed.iter().all(|f| f.is_some()) {
            Some((bound, point, g))
        } else {
            *nodes += 1;
            match solve_node(prob, &full, settings)? {
                NodeOutcome::Solved { bound, point, g, .. } => Some((bound, point, g)),
                NodeOutcome::Infeasible | NodeOutcome::Unsolved => None,
            }
        };
        if let Some((val, point, g)) = leaf {
            if incumbent.as_ref().is_none_or(|i| val < i.0) {
                *incumbent = Some((val, bin, point, g));
            }
        }
        // an integral relaxation needs no further branching
        return Ok(());
    }
    *seq += 1;
    heap.push(Queued(
        BnbNode {
            fixed: fixed.to_vec(),
            bound,
            depth,
            pi,
        },
        *seq,
    ));
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub pi: Vec<bool>,
    pub objective: f64,
    pub point: Point,
    /// Patterns passing the logistic rows.
    pub admissible: usize,
    /// Admissible patterns whose SDP was feasible.
    pub feasible: usize,
    pub seconds: f64,
}

/// Largest stacked length enumerated.
pub const BRUTE_FORCE_GUARD: usize = 12;

/// Enumerates every binary selection passing `Hπ ≤ h` and solves the
/// fixed-selection SDP for each.
pub fn brute_force(prob: &SelectionProblem, solver: &SolverSettings) -> Result<BruteForceResult, CoreError> {
    let t0 = Instant::now();
    let len = prob.len();
    if len > BRUTE_FORCE_GUARD {
        return Err(CoreError::InvalidArgument(format!(
            "brute force limited to {BRUTE_FORCE_GUARD} entries, got {len}"
        )));
    }
    let mut best: Option<(f64, Vec<bool>, Point)> = None;
    let mut admissible = 0;
    let mut feasible = 0;
    for mask in 0u32..(1u32 << len) {
        let bin: Vec<bool> = (0..len).map(|k| mask >> k & 1 == 1).collect();
        if !prob.logistics.satisfied_by_binary(&bin) {
            continue;
        }
        admissible += 1;
        let pi: Vec<f64> = bin.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        match solve_fixed(prob, &pi, solver) {
            Ok(fs) => {
                feasible += 1;
                if best.as_ref().is_none_or(|b| fs.objective < b.0) {
                    best = Some((fs.objective, bin, fs.point));
                }
            }
            Err(CoreError::Infeasible(_)) => {}
            Err(CoreError::Solver { status, .. }) => {
                log::warn!("pattern {bin:?}: fixed-selection solve ended with {status:?}; treated as infeasible");
            }
            Err(e) => return Err(e),
        }
    }
    let (objective, pi, point) =
        best.ok_or_else(|| CoreError::Infeasible("no admissible selection has a feasible SDP".into()))?;
    Ok(BruteForceResult {
        pi,
        objective,
        point,
        admissible,
        feasible,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
