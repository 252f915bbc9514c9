//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use saa_conic::linalg::{max_eigenvalue, min_eigenvalue, spectral_abscissa};
use saa_conic::{solve, SolverSettings};
use saa_core::bigm::{branch_and_bound, brute_force, BnbSettings};
use saa_core::lmi::{closed_loop, main_lmi_value, performance_index, Metric};
use saa_core::sca::{run_sca, ScaSettings, ScaVariant};
use saa_core::sdpr::{certify_rank1, solve_relaxation, RelaxationResult};
use saa_core::slicing::{certify_selection, slice, SelectionOutcome, SliceOptions};
use saa_core::{
    assemble_multiperiod, benchmark_spec, build_lipschitz_observer, CpsSystem, LogisticConstraints, SelectionProblem,
};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn relaxation_settings() -> SolverSettings {
    SolverSettings::with_tolerance(1e-7)
}

fn exact_settings() -> SolverSettings {
    SolverSettings::with_tolerance(1e-8)
}

/// One labelled slicing (or certification) outcome.
struct Labelled {
    label: String,
    prob: SelectionProblem,
    outcome: SelectionOutcome,
}

/// Everything computed on one N = 4 instance.
struct Small {
    seed: u64,
    prob: SelectionProblem,
    f_star: f64,
    bnb: f64,
    bnb_converged: bool,
    sdpr: RelaxationResult,
    sdprn: RelaxationResult,
    uppers: Vec<(String, f64)>,
}

fn small_instance(seed: u64, outcomes: &mut Vec<Labelled>) -> Result<Small, String> {
    let prob = assemble_multiperiod(&benchmark_spec(4, seed).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let e = |e: saa_core::CoreError| format!("seed {seed}: {e}");
    let brute = brute_force(&prob, &exact_settings()).map_err(e)?;
    let bnb = branch_and_bound(&prob, &BnbSettings::default()).map_err(e)?;
    let opts = SliceOptions::default();
    let mut uppers = Vec::new();
    let sdpr = solve_relaxation(&prob, false, &relaxation_settings()).map_err(e)?;
    let sdprn = solve_relaxation(&prob, true, &relaxation_settings()).map_err(e)?;
    for (name, r) in [("sdpr", &sdpr), ("sdprn", &sdprn)] {
        let o = slice(&prob, &r.point.pi, &opts).map_err(e)?;
        uppers.push((name.to_string(), o.f_final));
        outcomes.push(Labelled {
            label: format!("N=4 seed {seed} {name}"),
            prob: prob.clone(),
            outcome: o,
        });
    }
    for (name, pi) in [("brute", &brute.pi), ("bigm", &bnb.pi)] {
        let o = certify_selection(&prob, pi, &opts).map_err(e)?;
        outcomes.push(Labelled {
            label: format!("N=4 seed {seed} {name}"),
            prob: prob.clone(),
            outcome: o,
        });
    }
    Ok(Small {
        seed,
        f_star: brute.objective,
        bnb: bnb.objective,
        bnb_converged: bnb.converged,
        prob,
        sdpr,
        sdprn,
        uppers,
    })
}

fn criterion_1(smalls: &[Small], elapsed: Duration) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for s in smalls {
        let rel = (s.bnb - s.f_star).abs() / s.f_star.abs().max(1e-12);
        worst = worst.max(rel);
        if rel > 1e-4 || !s.bnb_converged {
            bad.push(format!(
                "seed {} bnb {} brute {} converged {}",
                s.seed, s.bnb, s.f_star, s.bnb_converged
            ));
        }
    }
    let fast = elapsed < Duration::from_secs(300);
    verdict(
        bad.is_empty() && smalls.len() == SEEDS.len() && fast,
        format!(
            "{} instances, max relative difference {worst:.2e} (tol 1e-4), {:.1}s (budget 300s){}",
            smalls.len(),
            elapsed.as_secs_f64(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    )
}

fn criterion_2(smalls: &[Small], sca_uppers: &[(u64, String, f64)]) -> Verdict {
    const SLACK: f64 = 1e-6;
    let mut bad = Vec::new();
    let mut checked = 0;
    for s in smalls {
        let (l, lr) = (s.sdpr.bound.value, s.sdprn.bound.value);
        if l > lr + SLACK {
            bad.push(format!("seed {}: L̃ {l} > L̆ {lr}", s.seed));
        }
        if lr > s.f_star + SLACK {
            bad.push(format!("seed {}: L̆ {lr} > f* {}", s.seed, s.f_star));
        }
        let scas = sca_uppers
            .iter()
            .filter(|(seed, ..)| *seed == s.seed)
            .map(|(_, n, u)| (n.clone(), *u));
        for (name, u) in s.uppers.iter().cloned().chain(scas) {
            checked += 1;
            if s.f_star > u + SLACK {
                bad.push(format!("seed {}: f* {} > U({name}) {u}", s.seed, s.f_star));
            }
        }
    }
    let summary: Vec<String> = smalls
        .iter()
        .map(|s| {
            format!(
                "seed {}: {:.4} ≤ {:.4} ≤ {:.4}",
                s.seed, s.sdpr.bound.value, s.sdprn.bound.value, s.f_star
            )
        })
        .collect();
    verdict(
        bad.is_empty() && !smalls.is_empty(),
        format!(
            "{}; {checked} upper bounds checked{}",
            summary.join(", "),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    )
}

struct ScaRun {
    n: usize,
    seed: u64,
    variant: ScaVariant,
    max_rise: f64,
    rejected: Option<f64>,
    final_value: f64,
    lower: f64,
}

fn criterion_3(runs: &[ScaRun], errors: &[String], elapsed: Duration) -> Verdict {
    let mut bad: Vec<String> = errors.to_vec();
    let mut worst = f64::NEG_INFINITY;
    for r in runs {
        worst = worst.max(r.max_rise);
        if r.max_rise > 1e-8 {
            bad.push(format!(
                "N={} seed {} {:?}: step up {:.2e}",
                r.n, r.seed, r.variant, r.max_rise
            ));
        }
        if r.final_value < r.lower - 1e-6 {
            bad.push(format!(
                "N={} seed {} {:?}: final {} below L̃ {}",
                r.n, r.seed, r.variant, r.final_value, r.lower
            ));
        }
    }
    let rejected: Vec<f64> = runs.iter().filter_map(|r| r.rejected).collect();
    let fast = elapsed < Duration::from_secs(600);
    verdict(
        bad.is_empty() && runs.len() == 18 && fast,
        format!(
            "{} runs, largest relative step {worst:.2e} (tol 1e-8), {} subproblem rises rejected (largest {:.2e}), {:.1}s (budget 600s){}",
            runs.len(),
            rejected.len(),
            rejected.iter().copied().fold(0.0, f64::max),
            elapsed.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn criterion_4() -> Verdict {
    let t0 = Instant::now();
    let failures: Vec<String> = (0..1000u64)
        .filter_map(|seed| common::check_all(seed).err().map(|e| format!("sample {seed}: {e}")))
        .collect();
    let elapsed = t0.elapsed();
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "1000 samples x 7 checks, {} failures, {:.2}s (budget 60s){}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_5(relaxations: &[(String, &RelaxationResult, Option<f64>)]) -> Verdict {
    let mut worst_res: f64 = 0.0;
    let mut worst_eig = f64::INFINITY;
    let mut blocks = 0;
    let mut bad = Vec::new();
    let mut tight = 0;
    for (label, r, best_upper) in relaxations {
        for b in &r.blocks {
            blocks += 1;
            worst_res = worst_res.max(b.trace_residual());
            worst_eig = worst_eig.min(b.lifted_min_eig());
        }
        let rep = certify_rank1(r);
        if rep.tight {
            tight += 1;
            if let Some(u) = best_upper {
                if (r.bound.value - u).abs() > 1e-4 {
                    bad.push(format!(
                        "{label}: tight but |L̃ − U| = {:.2e}",
                        (r.bound.value - u).abs()
                    ));
                }
            }
        }
    }
    if worst_res > 1e-7 {
        bad.push(format!("trace residual {worst_res:.2e}"));
    }
    if worst_eig < -1e-7 {
        bad.push(format!("lifted eigenvalue {worst_eig:.2e}"));
    }
    verdict(
        bad.is_empty() && blocks > 0,
        format!(
            "{} relaxations, {blocks} blocks, max trace residual {worst_res:.2e}, min lifted eigenvalue {worst_eig:.2e}, {tight} reported tight{}",
            relaxations.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn criterion_6(outcomes: &[Labelled]) -> Verdict {
    let mut bad = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for l in outcomes {
        let o = &l.outcome;
        let pf: Vec<f64> = o.pi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        if !l.prob.logistics.satisfied_by_binary(&o.pi) {
            bad.push(format!("{}: Hπ ≤ h violated", l.label));
        }
        for (j, p) in l.prob.periods.iter().enumerate() {
            let cl = closed_loop(p, l.prob.period_slice(j, &pf), &o.gains[j]);
            match spectral_abscissa(&cl) {
                Ok(a) => {
                    worst = worst.max(a);
                    if !(a < 0.0) {
                        bad.push(format!("{}: λ_m = {a:.3e}", l.label));
                    }
                }
                Err(e) => bad.push(format!("{}: {e}", l.label)),
            }
            if let Metric::Linf { eta, .. } = p.metric {
                let want = ((eta + 1.0) * o.perf[j]).sqrt();
                match o.performance_index[j] {
                    Some(v) if (v - want).abs() <= 1e-12 * (1.0 + want) && v == performance_index(o.perf[j], eta) => {}
                    other => bad.push(format!("{}: gain bound {other:?}, expected {want}", l.label)),
                }
            }
        }
    }
    verdict(
        bad.is_empty() && !outcomes.is_empty(),
        format!(
            "{} outcomes, largest closed-loop abscissa {worst:.3e}{}",
            outcomes.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    )
}

fn criterion_7(smalls: &[Small]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for s in smalls {
        let d = BnbSettings::default();
        let doubled = BnbSettings {
            big_m: 2.0 * d.big_m,
            ..d
        };
        match branch_and_bound(&s.prob, &doubled) {
            Ok(r) => {
                let rel = (r.objective - s.bnb).abs() / (1.0 + s.bnb.abs());
                worst = worst.max(rel);
                if rel > 1e-5 {
                    bad.push(format!("seed {}: {} vs {}", s.seed, s.bnb, r.objective));
                }
            }
            Err(e) => bad.push(format!("seed {}: {e}", s.seed)),
        }
    }
    verdict(
        bad.is_empty() && !smalls.is_empty(),
        format!(
            "M = 1e4 vs 2e4 on {} instances, max |Δf*|/(1+|f*|) = {worst:.2e} (tol 1e-5){}",
            smalls.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    )
}

fn criterion_8() -> Verdict {
    let t0 = Instant::now();
    let run = || -> Result<(f64, usize, f64), String> {
        let prob =
            assemble_multiperiod(&benchmark_spec(10, 0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let r = solve_relaxation(&prob, false, &relaxation_settings()).map_err(|e| e.to_string())?;
        let o = slice(&prob, &r.point.pi, &SliceOptions::default()).map_err(|e| e.to_string())?;
        Ok((r.bound.value, o.activated(), o.f_final))
    };
    let res = run();
    let elapsed = t0.elapsed();
    match res {
        Ok((l, act, f)) => verdict(
            act >= 2 && f.is_finite() && elapsed < Duration::from_secs(600),
            format!(
                "L̃ = {l:.6}, {act} activated (need ≥ 2), f_final = {f:.4}, {:.1}s (budget 600s)",
                elapsed.as_secs_f64()
            ),
        ),
        Err(e) => verdict(false, format!("{e} after {:.1}s", elapsed.as_secs_f64())),
    }
}

/// A 4-state Lipschitz system observable from its first output alone.
fn observer_toy() -> Result<CpsSystem, saa_core::CoreError> {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.5, 1.0, 0.0, 0.0, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, -0.2, 1.0, 0.0, 0.0, 0.0, 0.1,
        ],
    );
    let base = CpsSystem::new(
        a,
        DMatrix::zeros(4, 1),
        DMatrix::zeros(4, 1),
        DMatrix::identity(4, 4),
        DMatrix::zeros(4, 1),
        vec![1],
    )?;
    base.with_observer(DMatrix::identity(4, 4), 0.1, None)
}

fn criterion_9() -> Verdict {
    const ALPHA: f64 = 0.1;
    let run = || -> Result<String, String> {
        let e = |e: saa_core::CoreError| e.to_string();
        let sys = observer_toy().map_err(e)?;
        let prob = SelectionProblem::observer(
            std::slice::from_ref(&sys),
            LogisticConstraints::empty(4, 1),
            vec![1.0, 2.0, 3.0, 4.0],
            ALPHA,
        )
        .map_err(e)?;
        let best = brute_force(&prob, &exact_settings()).map_err(e)?;
        let gamma: Vec<f64> = best.pi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let (cp, d) = build_lipschitz_observer(&sys, &gamma, ALPHA).map_err(e)?;
        let sol = solve(&cp, &exact_settings()).map_err(|e| e.to_string())?;
        if !sol.is_optimal() {
            return Err(format!("fixed-Γ observer SDP: {:?}", sol.status));
        }
        let pt = d.extract(&sol.x);
        let (p, kappa) = (&pt.s[0], pt.perf[0]);
        let m = main_lmi_value(&prob.periods[0], p, &pt.z[0], &gamma, kappa);
        let lam = max_eigenvalue(&m);
        let p_min = min_eigenvalue(p);
        let ok = p_min > 0.0 && kappa > 0.0 && lam <= 1e-7 * (1.0 + m.norm());
        let msg = format!(
            "Γ* = {:?} (weight {}), λ_min(P) = {p_min:.3e}, κ = {kappa:.3e}, λ_max(LMI) = {lam:.3e}",
            gamma, best.objective
        );
        if ok {
            Ok(msg)
        } else {
            Err(msg)
        }
    };
    match run() {
        Ok(m) => verdict(true, m),
        Err(m) => verdict(false, m),
    }
}

fn main() {
    let mut outcomes = Vec::new();
    let t0 = Instant::now();
    let mut smalls = Vec::new();
    let mut setup_errors = Vec::new();
    for seed in SEEDS {
        match small_instance(seed, &mut outcomes) {
            Ok(s) => smalls.push(s),
            Err(e) => setup_errors.push(e),
        }
    }
    let t_small = t0.elapsed();

    let t1 = Instant::now();
    let mut runs = Vec::new();
    let mut sca_errors = Vec::new();
    let mut sca_uppers = Vec::new();
    let mut sca_relax = Vec::new();
    for n in [4usize, 5, 8] {
        for seed in 0..3u64 {
            let prob = match benchmark_spec(n, seed).and_then(|s| assemble_multiperiod(&s)) {
                Ok(p) => p,
                Err(e) => {
                    sca_errors.push(format!("N={n} seed {seed}: {e}"));
                    continue;
                }
            };
            let lower = match smalls.iter().find(|s| n == 4 && s.seed == seed) {
                Some(s) => s.sdpr.bound.value,
                None => match solve_relaxation(&prob, false, &relaxation_settings()) {
                    Ok(r) => {
                        let v = r.bound.value;
                        sca_relax.push((format!("N={n} seed {seed} sdpr"), r));
                        v
                    }
                    Err(e) => {
                        sca_errors.push(format!("N={n} seed {seed} sdpr: {e}"));
                        continue;
                    }
                },
            };
            for variant in [ScaVariant::Sca1, ScaVariant::Sca2] {
                match run_sca(variant, &prob, &ScaSettings::default()) {
                    Ok((res, trace)) => {
                        runs.push(ScaRun {
                            n,
                            seed,
                            variant,
                            max_rise: trace.max_relative_increase(),
                            rejected: trace.rejected_rise,
                            final_value: *trace.objectives.last().unwrap(),
                            lower,
                        });
                        match slice(&prob, &res.point.pi, &SliceOptions::default()) {
                            Ok(o) => {
                                if n == 4 {
                                    sca_uppers.push((seed, format!("{variant:?}"), o.f_final));
                                }
                                outcomes.push(Labelled {
                                    label: format!("N={n} seed {seed} {variant:?}"),
                                    prob: prob.clone(),
                                    outcome: o,
                                });
                            }
                            Err(e) => sca_errors.push(format!("N={n} seed {seed} {variant:?} slicing: {e}")),
                        }
                    }
                    Err(e) => sca_errors.push(format!("N={n} seed {seed} {variant:?}: {e}")),
                }
            }
        }
    }
    let t_sca = t1.elapsed();

    let mut relaxations: Vec<(String, &RelaxationResult, Option<f64>)> = Vec::new();
    for s in &smalls {
        relaxations.push((format!("N=4 seed {} sdpr", s.seed), &s.sdpr, Some(s.f_star)));
        relaxations.push((format!("N=4 seed {} sdprn", s.seed), &s.sdprn, Some(s.f_star)));
    }
    for (label, r) in &sca_relax {
        let best = outcomes
            .iter()
            .filter(|o| o.label.starts_with(label.trim_end_matches(" sdpr")))
            .map(|o| o.outcome.f_final)
            .fold(f64::INFINITY, f64::min);
        relaxations.push((label.clone(), r, best.is_finite().then_some(best)));
    }

    let mut c1 = criterion_1(&smalls, t_small);
    if !setup_errors.is_empty() {
        c1.pass = false;
        c1.detail = format!("{}; {}", c1.detail, setup_errors.join("; "));
    }
    let verdicts = [
        ("oracle exactness", c1),
        ("bound sandwich", criterion_2(&smalls, &sca_uppers)),
        ("SCA monotonicity", criterion_3(&runs, &sca_errors, t_sca)),
        ("matrix-inequality properties", criterion_4()),
        ("SDP-R algebra", criterion_5(&relaxations)),
        ("slicing certificates", criterion_6(&outcomes)),
        ("Big-M sufficiency", criterion_7(&smalls)),
        ("scaling smoke test", criterion_8()),
        ("sensor variant", criterion_9()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in verdicts.iter().enumerate() {
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        verdicts.len() - failed,
        verdicts.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
