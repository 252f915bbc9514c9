//! Slicing: from a real-valued selection to a binary one with a certified
//! stabilizing gain.
//!
//! Entries are ranked by value (ties to the smaller index). Starting from
//! the smallest admissible activation count `s`, the best-ranked admissible
//! `s`-subset is fixed, the fixed-selection SDP is solved for `K = ZS⁻¹`,
//! and the closed loop is checked; `s` grows until a candidate passes.

use nalgebra::DMatrix;
use saa_conic::linalg::spectral_abscissa;
use saa_conic::SolverSettings;

use crate::error::CoreError;
use crate::lmi::{closed_loop, performance_index, solve_fixed, Metric, Point, SelectionProblem};
use crate::logistics::LogisticConstraints;

/// Largest stacked selection for which admissible subsets are enumerated.
pub const ENUMERATION_LIMIT: usize = 20;

/// Interior-point solutions meet the box only to solver accuracy; entries
/// this far outside `[0, 1]` are clamped.
pub const BOX_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SliceOptions {
    /// Accept only closed loops with spectral abscissa at most this
    /// (in addition to `λ_m < 0`).
    pub max_abscissa: Option<f64>,
    /// Accept only candidates whose performance scalar (every period)
    /// is at most this.
    pub max_perf: Option<f64>,
    pub solver: SolverSettings,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            max_abscissa: None,
            max_perf: None,
            solver: SolverSettings::with_tolerance(1e-8),
        }
    }
}

/// A binary selection with its controller and certificates.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// Stacked binary selection.
    pub pi: Vec<bool>,
    /// `K = ZS⁻¹` per period.
    pub gains: Vec<DMatrix<f64>>,
    /// Largest closed-loop spectral abscissa over the periods.
    pub abscissa: f64,
    pub abscissas: Vec<f64>,
    /// `ζ` (or `κ` for the observer) per period.
    pub perf: Vec<f64>,
    /// `√((η+1)ζ)` per period: bound on `‖z‖₂/‖w‖_∞` (L∞ only).
    pub performance_index: Vec<Option<f64>>,
    pub f_final: f64,
    /// Number of activated entries.
    pub s: usize,
    /// Smallest admissible activation count.
    pub s_min: usize,
    pub point: Point,
}

impl SelectionOutcome {
    pub fn activated(&self) -> usize {
        self.pi.iter().filter(|&&b| b).count()
    }
}

/// Indices sorted by decreasing value, ties broken by the smaller index.
pub fn ranking(pi_real: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pi_real.len()).collect();
    order.sort_by(|&a, &b| pi_real[b].total_cmp(&pi_real[a]).then(a.cmp(&b)));
    order
}

/// Next `s`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let s = c.len();
    for i in (0..s).rev() {
        if c[i] < n - s + i {
            c[i] += 1;
            for j in i + 1..s {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The best-ranked admissible selection with exactly `s` activations:
/// the top `s` entries if they pass, otherwise the first passing subset in
/// lexicographic order of rank positions (exhaustive up to
/// [`ENUMERATION_LIMIT`] entries, greedy beyond).
pub fn candidate(order: &[usize], logistics: &LogisticConstraints, s: usize) -> Option<Vec<bool>> {
    let n = order.len();
    if s > n {
        return None;
    }
    let pattern = |pos: &[usize]| {
        let mut p = vec![false; n];
        pos.iter().for_each(|&q| p[order[q]] = true);
        p
    };
    let mut pos: Vec<usize> = (0..s).collect();
    let top = pattern(&pos);
    if logistics.satisfied_by_binary(&top) {
        return Some(top);
    }
    if n <= ENUMERATION_LIMIT {
        while next_combination(&mut pos, n) {
            let p = pattern(&pos);
            if logistics.satisfied_by_binary(&p) {
                return Some(p);
            }
        }
        return None;
    }
    greedy(order, logistics, s)
}

/// Walks the ranking, skipping an entry when it breaks a row that further
/// activations cannot repair (all coefficients nonnegative).
fn greedy(order: &[usize], logistics: &LogisticConstraints, s: usize) -> Option<Vec<bool>> {
    let monotone: Vec<(&[f64], f64)> = logistics.rows().filter(|(r, _)| r.iter().all(|&c| c >= 0.0)).collect();
    let mut p = vec![false; order.len()];
    let mut count = 0;
    for &i in order {
        if count == s {
            break;
        }
        p[i] = true;
        let ok = monotone.iter().all(|(r, h)| {
            let lhs: f64 = r.iter().zip(&p).filter(|(_, &b)| b).map(|(c, _)| c).sum();
            lhs <= h + 1e-9
        });
        if ok {
            count += 1;
        } else {
            p[i] = false;
        }
    }
    (count == s && logistics.satisfied_by_binary(&p)).then_some(p)
}

/// Smallest `s` for which [`candidate`] finds an admissible selection.
pub fn min_activation_count(order: &[usize], logistics: &LogisticConstraints) -> Result<usize, CoreError> {
    if order.len() != logistics.width() {
        return Err(CoreError::Dimension(format!(
            "ranking of length {} for {} entries",
            order.len(),
            logistics.width()
        )));
    }
    (0..=order.len())
        .find(|&s| candidate(order, logistics, s).is_some())
        .ok_or_else(|| CoreError::Infeasible("no binary selection satisfies Hπ ≤ h".into()))
}

enum Check {
    Pass(SelectionOutcome),
    Reject(String),
}

fn check(prob: &SelectionProblem, pi: &[bool], s_min: usize, opts: &SliceOptions) -> Result<Check, CoreError> {
    let pf: Vec<f64> = pi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let fs = match solve_fixed(prob, &pf, &opts.solver) {
        Ok(fs) => fs,
        Err(e @ (CoreError::Infeasible(_) | CoreError::Solver { .. } | CoreError::Linalg(_))) => {
            return Ok(Check::Reject(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let mut abscissas = Vec::with_capacity(prob.n_periods());
    for (j, p) in prob.periods.iter().enumerate() {
        let cl = closed_loop(p, prob.period_slice(j, &pf), &fs.gains[j]);
        abscissas.push(spectral_abscissa(&cl)?);
    }
    let abscissa = abscissas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < 0.0) {
        return Ok(Check::Reject(format!("closed loop not Hurwitz (λ_m = {abscissa:.3e})")));
    }
    if let Some(m) = opts.max_abscissa {
        if abscissa > m {
            return Ok(Check::Reject(format!("λ_m = {abscissa:.3e} above {m}")));
        }
    }
    let perf = fs.point.perf.clone();
    if let Some(m) = opts.max_perf {
        if perf.iter().any(|&v| v > m) {
            return Ok(Check::Reject(format!("performance scalar above {m}")));
        }
    }
    let performance_index = prob
        .periods
        .iter()
        .zip(&perf)
        .map(|(p, &z)| match p.metric {
            Metric::Linf { eta, .. } => Some(performance_index(z, eta)),
            Metric::Lipschitz { .. } => None,
        })
        .collect();
    Ok(Check::Pass(SelectionOutcome {
        f_final: prob.objective(&pf, &perf),
        s: pi.iter().filter(|&&b| b).count(),
        s_min,
        pi: pi.to_vec(),
        gains: fs.gains,
        abscissa,
        abscissas,
        perf,
        performance_index,
        point: fs.point,
    }))
}

/// Solves the fixed-selection SDP for a given binary selection and
/// certifies it (used for methods that return binary selections).
pub fn certify_selection(
    prob: &SelectionProblem,
    pi: &[bool],
    opts: &SliceOptions,
) -> Result<SelectionOutcome, CoreError> {
    if pi.len() != prob.len() {
        return Err(CoreError::Dimension(format!(
            "selection of length {} for {} entries",
            pi.len(),
            prob.len()
        )));
    }
    if !prob.logistics.satisfied_by_binary(pi) {
        return Err(CoreError::Infeasible("selection violates Hπ ≤ h".into()));
    }
    let s = pi.iter().filter(|&&b| b).count();
    match check(prob, pi, s, opts)? {
        Check::Pass(o) => Ok(o),
        Check::Reject(why) => Err(CoreError::RecoveryFailed(why)),
    }
}

/// Slicing recovery of a binary selection from `pi_real ∈ [0,1]^{N·T}`.
/// A binary input is tried as is first.
pub fn slice(prob: &SelectionProblem, pi_real: &[f64], opts: &SliceOptions) -> Result<SelectionOutcome, CoreError> {
    prob.validate()?;
    if pi_real.len() != prob.len() {
        return Err(CoreError::Dimension(format!(
            "selection of length {} for {} entries",
            pi_real.len(),
            prob.len()
        )));
    }
    if pi_real
        .iter()
        .any(|v| !v.is_finite() || !(-BOX_SLACK..=1.0 + BOX_SLACK).contains(v))
    {
        return Err(CoreError::InvalidArgument(
            "selection entries must lie in [0, 1]".into(),
        ));
    }
    let clamped: Vec<f64> = pi_real.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let pi_real = &clamped[..];
    let order = ranking(pi_real);
    let s_min = min_activation_count(&order, &prob.logistics)?;
    if pi_real.iter().all(|&v| v == 0.0 || v == 1.0) {
        let b: Vec<bool> = pi_real.iter().map(|&v| v == 1.0).collect();
        if prob.logistics.satisfied_by_binary(&b) {
            if let Check::Pass(o) = check(prob, &b, s_min, opts)? {
                return Ok(o);
            }
        }
    }
    let mut last = String::from("no admissible candidate");
    for s in s_min..=prob.len() {
        let Some(cand) = candidate(&order, &prob.logistics, s) else {
            continue;
        };
        match check(prob, &cand, s_min, opts)? {
            Check::Pass(o) => return Ok(o),
            Check::Reject(why) => {
                log::debug!("slicing: s = {s} rejected: {why}");
                last = why;
            }
        }
    }
    Err(CoreError::RecoveryFailed(format!(
        "no activation count yields a certified controller ({last})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::assemble_multiperiod;
    use crate::logistics::{fix_constraint, min_count_constraint};
    use crate::system::{benchmark_spec, CpsSystem, MultiPeriodSpec, SelectionWeights};

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(ranking(&[0.5, 0.9, 0.5, 1.0, 0.0]), vec![3, 1, 0, 2, 4]);
    }

    #[test]
    fn min_count_examples() {
        let l = min_count_constraint(5, 1, 5 / 4).unwrap();
        assert_eq!(min_activation_count(&ranking(&[0.1; 5]), &l).unwrap(), 1);
        // π₁ ≤ 0 with node 0 ranked first
        let mut l = min_count_constraint(4, 1, 1).unwrap();
        l.extend(&fix_constraint(4, 1, 0, 0, false).unwrap()).unwrap();
        let order = ranking(&[0.9, 0.5, 0.4, 0.1]);
        assert_eq!(min_activation_count(&order, &l).unwrap(), 1);
        assert_eq!(candidate(&order, &l, 1).unwrap(), vec![false, true, false, false]);
        // exclusion pair in the top two
        let mut l = min_count_constraint(4, 1, 2).unwrap();
        l.push_row(vec![1.0, 1.0, 0.0, 0.0], 1.0).unwrap();
        let order = ranking(&[0.9, 0.8, 0.3, 0.1]);
        assert_eq!(min_activation_count(&order, &l).unwrap(), 2);
        assert_eq!(candidate(&order, &l, 2).unwrap(), vec![true, false, true, false]);
        // nothing admissible
        let mut l = min_count_constraint(2, 1, 2).unwrap();
        l.extend(&fix_constraint(2, 1, 0, 0, false).unwrap()).unwrap();
        assert!(matches!(
            min_activation_count(&[0, 1], &l),
            Err(CoreError::Infeasible(_))
        ));
    }

    fn two_node() -> SelectionProblem {
        // node 0 drives the stable state, node 1 the unstable one
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::identity(2, 2);
        let sys = CpsSystem::new(
            a,
            b.clone(),
            b,
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            vec![1, 1],
        )
        .unwrap();
        let spec =
            MultiPeriodSpec::single(sys, LogisticConstraints::empty(2, 1), SelectionWeights::uniform(2)).unwrap();
        assert!(spec.validate().is_ok());
        assemble_multiperiod(&spec).unwrap()
    }

    #[test]
    fn slicing_skips_the_non_stabilizing_node() {
        let prob = two_node();
        let out = slice(&prob, &[0.9, 0.8], &SliceOptions::default()).unwrap();
        assert_eq!(out.pi, vec![true, true]);
        assert_eq!(out.s, 2);
        assert!(out.abscissa < 0.0);
        let out = slice(&prob, &[0.2, 0.8], &SliceOptions::default()).unwrap();
        assert_eq!(out.pi, vec![false, true]);
    }

    #[test]
    fn binary_input_is_kept() {
        let prob = assemble_multiperiod(&benchmark_spec(4, 3).unwrap()).unwrap();
        let pi = [1.0, 0.0, 1.0, 1.0];
        let out = slice(&prob, &pi, &SliceOptions::default()).unwrap();
        assert_eq!(out.pi, vec![true, false, true, true]);
        assert!(out.abscissa < 0.0);
        let f = prob.objective(&pi, &out.perf);
        assert_eq!(out.f_final, f);
        let bound = out.performance_index[0].unwrap();
        assert!((bound * bound - 2.0 * out.perf[0]).abs() <= 1e-12 * (1.0 + bound * bound));
    }

    #[test]
    fn unstabilizable_fails_recovery() {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let sys = CpsSystem::new(m(1.0), m(0.0), m(1.0), m(1.0), m(0.0), vec![1]).unwrap();
        let spec =
            MultiPeriodSpec::single(sys, LogisticConstraints::empty(1, 1), SelectionWeights::uniform(1)).unwrap();
        let prob = assemble_multiperiod(&spec).unwrap();
        assert!(matches!(
            slice(&prob, &[0.5], &SliceOptions::default()),
            Err(CoreError::RecoveryFailed(_))
        ));
    }
}
