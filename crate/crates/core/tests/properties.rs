//! Algebraic invariants of the convexified SCA matrix inequalities.

mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saa_conic::linalg::max_eigenvalue;
use saa_core::sca::{build_subproblem, sca1_lmi_value, sca2_lmi_value, ScaSettings, ScaState, ScaVariant};
use saa_core::{assemble_multiperiod, benchmark_spec, Point};

const CASES: u32 = 1000;

fn ok(r: Result<(), String>) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn h_lin_is_exact_at_base_and_overestimates(seed in any::<u64>()) {
        ok(check_h_lin(&sample(seed)))?;
    }

    #[test]
    fn sca1_dominates_the_bilinear_inequality(seed in any::<u64>()) {
        ok(check_sca1_bound(&sample(seed)))?;
    }

    #[test]
    fn sca1_schur_complement_preserves_sign(seed in any::<u64>(), shift in -8.0f64..4.0) {
        ok(check_sca1_schur(&sample(seed), shift))?;
    }

    #[test]
    fn inverse_tangent_bound(seed in any::<u64>()) {
        ok(check_inverse_tangent(&sample(seed)))?;
    }

    #[test]
    fn sca2_congruence_gap(seed in any::<u64>()) {
        ok(check_sca2_congruence(&sample(seed)))?;
    }

    #[test]
    fn sca2_reduced_block_dominates(seed in any::<u64>()) {
        ok(check_sca2_bound(&sample(seed)))?;
    }

    #[test]
    fn sca2_schur_complement_preserves_sign(seed in any::<u64>(), shift in -8.0f64..4.0) {
        ok(check_sca2_schur(&sample(seed), shift))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The subproblem builders emit exactly the matrices checked above.
    #[test]
    fn builders_match_numeric_values(seed in any::<u64>(), nodes in 2usize..=3) {
        let prob = assemble_multiperiod(&benchmark_spec(nodes, seed % 16).unwrap()).unwrap();
        let p = &prob.periods[0];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, nu) = (p.n_x(), p.n_u());
        let state = ScaState {
            k: 0,
            point: Point {
                s: vec![spd(&mut rng, n, 1e-3)],
                z: vec![gauss(&mut rng, nu, n, 1.0)],
                perf: vec![rng.random_range(0.1..2.0)],
                pi: unit(&mut rng, prob.len()),
            },
            q: vec![spd(&mut rng, nu, 1e-2)],
            objective: 0.0,
        };
        for variant in [ScaVariant::Sca1, ScaVariant::Sca2] {
            let sub = build_subproblem(variant, &prob, &state, &ScaSettings::default()).unwrap();
            let x: Vec<f64> = (0..sub.problem.num_vars()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let pt = sub.decision.extract(&x);
            let got = sub.lmis[0].eval(&x);
            let want = match variant {
                ScaVariant::Sca1 => {
                    sca1_lmi_value(p, &pt.s[0], &pt.z[0], pt.perf[0], &pt.pi, &state.point.pi, &state.point.z[0])
                }
                ScaVariant::Sca2 => sca2_lmi_value(
                    p,
                    &pt.s[0],
                    &pt.z[0],
                    pt.perf[0],
                    &sub.q[0].eval(&x),
                    &pt.pi,
                    &state.point.pi,
                    &state.point.z[0],
                    &state.q[0],
                ),
            }
            .unwrap();
            prop_assert!((&got - &want).norm() <= 1e-9 * (1.0 + want.norm()), "{:?}", variant);
        }
    }
}

#[test]
fn sign_samples_cover_both_cases() {
    let (mut neg, mut pos) = (0, 0);
    for seed in 0..1000u64 {
        let t = sample(seed);
        let mut c = sca1_lmi_value(&t.p, &t.s, &t.z, t.perf, &t.pi, &t.pi0, &t.z0).unwrap();
        for i in 0..t.p.n_x() {
            c[(i, i)] += shift_for(seed);
        }
        if max_eigenvalue(&c) < 0.0 {
            neg += 1;
        } else {
            pos += 1;
        }
    }
    assert!(neg > 20 && pos > 20, "negative {neg}, positive {pos}");
}
