//! Sampled matrix-inequality checks shared by the property suite and the
//! acceptance run. Each check returns `Err` with a description on failure.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saa_conic::linalg::{max_eigenvalue, min_eigenvalue, spd_inverse};
use saa_core::lmi::{main_lmi_value, Metric, Period};
use saa_core::sca::{b_pi, concave_term, h_lin, sca1_lmi_value, sca2_lmi_value};

pub fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = gauss(rng, n, n, 1.0);
    &g * g.transpose() + DMatrix::identity(n, n) * floor
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// A random period with `n_x ≤ 3`, up to three nodes of one or two inputs
/// and either metric; the stacked matrices stay at most 6x6 per block.
fn period(rng: &mut ChaCha8Rng) -> Period {
    let n = rng.random_range(1..=3);
    let nodes = rng.random_range(1..=3);
    let partition: Vec<usize> = (0..nodes).map(|_| rng.random_range(1..=2)).collect();
    let nu = partition.iter().sum();
    let metric = if rng.random_bool(0.5) {
        let nw = rng.random_range(1..=2);
        Metric::Linf {
            b_w: gauss(rng, n, nw, 1.0),
            c_z: DMatrix::identity(n, n),
            d_wz: DMatrix::zeros(n, nw),
            alpha: rng.random_range(0.1..1.0),
            eta: rng.random_range(0.1..1.0),
        }
    } else {
        Metric::Lipschitz {
            beta: rng.random_range(0.1..1.0),
            alpha: rng.random_range(0.1..1.0),
        }
    };
    Period {
        a: gauss(rng, n, n, 1.0),
        b: gauss(rng, n, nu, 1.0),
        partition,
        metric,
    }
}

pub struct Sample {
    pub p: Period,
    pub s: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub perf: f64,
    pub pi: Vec<f64>,
    pub pi0: Vec<f64>,
    pub z0: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub q0: DMatrix<f64>,
}

pub fn sample(seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = period(&mut rng);
    let (n, nu, nodes) = (p.n_x(), p.n_u(), p.partition.len());
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    Sample {
        s: spd(&mut rng, n, 1e-3),
        z: gauss(&mut rng, nu, n, scale),
        perf: rng.random_range(0.01..10.0),
        pi: unit(&mut rng, nodes),
        pi0: unit(&mut rng, nodes),
        z0: gauss(&mut rng, nu, n, scale),
        q: spd(&mut rng, nu, 1e-2),
        q0: spd(&mut rng, nu, 1e-2),
        p,
    }
}

/// Deletes rows and columns `r` of `m`.
fn drop_block(m: &DMatrix<f64>, r: std::ops::Range<usize>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..m.nrows()).filter(|i| !r.contains(i)).collect();
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm() + b.norm())
}

fn psd(m: &DMatrix<f64>) -> bool {
    min_eigenvalue(m) >= -1e-9 * (1.0 + m.norm())
}

macro_rules! ensure {
    ($c:expr, $($fmt:tt)*) => {
        if !$c {
            return Err(format!($($fmt)*));
        }
    };
}

pub fn check_h_lin(t: &Sample) -> Result<(), String> {
    let (pi, pi0) = (t.p.expand(&t.pi), t.p.expand(&t.pi0));
    let h = concave_term(&t.p.b, &pi, &t.z).unwrap();
    let at_base = h_lin(&t.p.b, &pi, &t.z, &pi, &t.z).unwrap();
    ensure!(
        close(&at_base, &h),
        "h_lin differs from H at the base point by {:e}",
        (&at_base - &h).norm()
    );
    let lin = h_lin(&t.p.b, &pi, &t.z, &pi0, &t.z0).unwrap();
    let gap = &lin - &h;
    ensure!(psd(&gap), "h_lin − H has eigenvalue {:e}", min_eigenvalue(&gap));
    // the gap is the square of the displacement of W = B̃Π + Zᵀ
    let dw = b_pi(&t.p, &t.pi) - b_pi(&t.p, &t.pi0) + (&t.z - &t.z0).transpose();
    ensure!(close(&gap, &(&dw * dw.transpose())), "h_lin − H is not ΔWΔWᵀ");
    Ok(())
}

/// `C_s` with its `−I` block eliminated.
fn sca1_reduced(t: &Sample, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, nu) = (t.p.n_x(), t.p.n_u());
    let mut r = drop_block(c, n..n + nu);
    let d = c.view((0, n), (n, nu)).into_owned();
    let top = r.view((0, 0), (n, n)) + &d * d.transpose();
    r.view_mut((0, 0), (n, n)).copy_from(&top);
    r
}

pub fn check_sca1_bound(t: &Sample) -> Result<(), String> {
    let n = t.p.n_x();
    let c = sca1_lmi_value(&t.p, &t.s, &t.z, t.perf, &t.pi, &t.pi0, &t.z0).unwrap();
    let f = main_lmi_value(&t.p, &t.s, &t.z, &t.pi, t.perf);
    let reduced = sca1_reduced(t, &c);
    let pi = t.p.expand(&t.pi);
    let half_gap = (h_lin(&t.p.b, &pi, &t.z, &t.p.expand(&t.pi0), &t.z0).unwrap()
        - concave_term(&t.p.b, &pi, &t.z).unwrap())
        * 0.5;
    let diff = &reduced - &f;
    ensure!(
        close(&diff.view((0, 0), (n, n)).into_owned(), &half_gap),
        "C − F is not ½(h_lin − H)"
    );
    ensure!(
        diff.view((n, 0), (diff.nrows() - n, diff.ncols())).norm() <= 1e-9 * (1.0 + f.norm()),
        "C − F has off-corner entries"
    );
    let scale = 1.0 + reduced.norm() + f.norm();
    ensure!(
        min_eigenvalue(&diff) >= -1e-8 * scale,
        "min eig(C − F) = {:e}",
        min_eigenvalue(&diff)
    );
    Ok(())
}

fn same_sign(a: f64, b: f64, tol: f64) -> bool {
    a.abs() <= tol || b.abs() <= tol || (a < 0.0) == (b < 0.0)
}

/// `C_s ⪯ 0` against its Schur complement, after shifting the top block by
/// `shift·I` so both signs occur.
pub fn check_sca1_schur(t: &Sample, shift: f64) -> Result<(), String> {
    let n = t.p.n_x();
    let mut c = sca1_lmi_value(&t.p, &t.s, &t.z, t.perf, &t.pi, &t.pi0, &t.z0).unwrap();
    for i in 0..n {
        c[(i, i)] += shift;
    }
    let (a, b) = (max_eigenvalue(&c), max_eigenvalue(&sca1_reduced(t, &c)));
    ensure!(
        same_sign(a, b, 1e-9 * (1.0 + c.norm() * c.norm())),
        "λ(C_s) = {a:e}, λ(C) = {b:e}"
    );
    Ok(())
}

pub fn check_inverse_tangent(t: &Sample) -> Result<(), String> {
    let qi = spd_inverse(&t.q).unwrap();
    let qki = spd_inverse(&t.q0).unwrap();
    let lower = &qki * 2.0 - &qki * &t.q * &qki;
    let gap = &qi - &lower;
    ensure!(
        min_eigenvalue(&gap) >= -1e-9,
        "min eig(Q⁻¹ − 2Q_k⁻¹ + Q_k⁻¹QQ_k⁻¹) = {:e}",
        min_eigenvalue(&gap)
    );
    let dv = &qi - &qki;
    ensure!(
        close(&gap, &(&dv * &t.q * &dv)),
        "gap is not (Q⁻¹ − Q_k⁻¹)Q(Q⁻¹ − Q_k⁻¹)"
    );
    Ok(())
}

struct Sca2Parts {
    ks: DMatrix<f64>,
    /// `K`: `K_s` with `B̃ΔΠ` in the third column block and `−Q⁻¹` on its
    /// diagonal.
    k: DMatrix<f64>,
    third: usize,
}

fn sca2_parts(t: &Sample) -> Sca2Parts {
    let (n, nu) = (t.p.n_x(), t.p.n_u());
    let ks = sca2_lmi_value(&t.p, &t.s, &t.z, t.perf, &t.q, &t.pi, &t.pi0, &t.z0, &t.q0).unwrap();
    let third = ks.nrows() - 2 * nu;
    let qki = spd_inverse(&t.q0).unwrap();
    let qi = spd_inverse(&t.q).unwrap();
    let mut k = ks.clone();
    let u = ks.view((0, third), (n, nu)) * &qki;
    k.view_mut((0, third), (n, nu)).copy_from(&u);
    k.view_mut((third, 0), (nu, n)).copy_from(&u.transpose());
    k.view_mut((third, third), (nu, nu)).copy_from(&(-&qi));
    Sca2Parts { ks, k, third }
}

pub fn check_sca2_congruence(t: &Sample) -> Result<(), String> {
    let nu = t.p.n_u();
    let Sca2Parts { ks, k, third } = sca2_parts(t);
    let mut tm = DMatrix::identity(ks.nrows(), ks.nrows());
    tm.view_mut((third, third), (nu, nu)).copy_from(&t.q0);
    let diff = &ks - &tm * &k * &tm;
    let dq = &t.q - &t.q0;
    let mut expect = DMatrix::zeros(ks.nrows(), ks.nrows());
    expect
        .view_mut((third, third), (nu, nu))
        .copy_from(&(&dq * spd_inverse(&t.q).unwrap() * &dq));
    ensure!(
        close(&diff, &expect),
        "K_s − TKT is not (Q − Q_k)Q⁻¹(Q − Q_k) in the third block"
    );
    ensure!(
        min_eigenvalue(&diff) >= -1e-8 * (1.0 + ks.norm()),
        "min eig(K_s − TKT) = {:e}",
        min_eigenvalue(&diff)
    );
    Ok(())
}

/// `K` with its two trailing blocks eliminated.
fn sca2_reduced(t: &Sample, k: &DMatrix<f64>, third: usize) -> DMatrix<f64> {
    let n = t.p.n_x();
    let nu = t.p.n_u();
    let qi = spd_inverse(&t.q).unwrap();
    let u = k.view((0, third), (n, nu)).into_owned();
    let v = k.view((third + nu, 0), (nu, n)).into_owned();
    let mut k1 = drop_block(k, third..k.nrows());
    let top = k1.view((0, 0), (n, n)) + &u * &t.q * u.transpose() + v.transpose() * &qi * &v;
    k1.view_mut((0, 0), (n, n)).copy_from(&top);
    k1
}

pub fn check_sca2_bound(t: &Sample) -> Result<(), String> {
    let n = t.p.n_x();
    let nu = t.p.n_u();
    let Sca2Parts { k, third, .. } = sca2_parts(t);
    let u = k.view((0, third), (n, nu)).into_owned();
    let v = k.view((third + nu, 0), (nu, n)).into_owned();
    ensure!(
        close(&u, &(b_pi(&t.p, &t.pi) - b_pi(&t.p, &t.pi0))),
        "third block of K is not B̃ΔΠ"
    );
    ensure!(close(&v, &(&t.z - &t.z0)), "fourth block of K is not ΔZ");
    let k1 = sca2_reduced(t, &k, third);
    let f = main_lmi_value(&t.p, &t.s, &t.z, &t.pi, t.perf);
    let diff = &k1 - &f;
    let scale = 1.0 + k1.norm() + f.norm();
    ensure!(
        min_eigenvalue(&diff) >= -1e-8 * scale,
        "min eig(K₁ − F₁) = {:e}",
        min_eigenvalue(&diff)
    );
    Ok(())
}

/// `K ⪯ 0` against `K₁`, with the same top-block shift as above.
pub fn check_sca2_schur(t: &Sample, shift: f64) -> Result<(), String> {
    let n = t.p.n_x();
    let Sca2Parts { mut k, third, .. } = sca2_parts(t);
    for i in 0..n {
        k[(i, i)] += shift;
    }
    let (a, b) = (max_eigenvalue(&k), max_eigenvalue(&sca2_reduced(t, &k, third)));
    ensure!(
        same_sign(a, b, 1e-9 * (1.0 + k.norm() * k.norm())),
        "λ(K) = {a:e}, λ(K₁) = {b:e}"
    );
    Ok(())
}

/// Top-block shift used for sample `seed` in the sign checks.
pub fn shift_for(seed: u64) -> f64 {
    -5.0 * (seed % 3) as f64 + 2.0
}

/// Every sampled check on `seed`.
pub fn check_all(seed: u64) -> Result<(), String> {
    let t = sample(seed);
    let s = shift_for(seed);
    check_h_lin(&t)?;
    check_sca1_bound(&t)?;
    check_sca1_schur(&t, s)?;
    check_inverse_tangent(&t)?;
    check_sca2_congruence(&t)?;
    check_sca2_bound(&t)?;
    check_sca2_schur(&t, s)
}
