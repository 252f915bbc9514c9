//! Dense symmetric kernels: eigen-decomposition, PSD projection,
//! spectral abscissa and the scaled (isometric) symmetric vectorization.

use nalgebra::{DMatrix, DVector};

use crate::error::LinalgError;

/// `sqrt(2)`, the off-diagonal weight of the isometric vectorization.
pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Symmetric dense matrix.
///
/// The backing matrix is always exactly symmetric: constructors average the
/// input with its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(LinalgError::DimensionMismatch("empty matrix".into()));
        }
        let t = m.transpose();
        Ok(Self { inner: (m + t) * 0.5 })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// `trace(self * other)`.
    pub fn inner_product(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }
}

/// Packed vector of a symmetric matrix, column-major upper triangle, with the
/// off-diagonal entries scaled by `sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvecVector(pub Vec<f64>);

impl SvecVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &SvecVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Length of the packed vector of an `n x n` symmetric matrix.
pub fn tri_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`tri_dim`]; `None` when `len` is not a triangular number.
pub fn tri_side(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (tri_dim(n) == len).then_some(n)
}

/// Position of entry `(i, j)` (either order) in the packed vector of side `n`.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

pub fn svec(x: &SymMatrix) -> SvecVector {
    SvecVector(svec_dense(x.as_matrix()))
}

/// Packs the upper triangle of a (assumed symmetric) dense matrix.
pub fn svec_dense(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut out = Vec::with_capacity(tri_dim(n));
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                out.push(x[(r, c)]);
            } else {
                out.push(SQRT2 * 0.5 * (x[(r, c)] + x[(c, r)]));
            }
        }
    }
    out
}

pub fn smat(v: &SvecVector) -> Result<SymMatrix, LinalgError> {
    let n = tri_side(v.0.len())
        .ok_or_else(|| LinalgError::DimensionMismatch(format!("{} is not a triangular number", v.0.len())))?;
    Ok(SymMatrix {
        inner: smat_dense(&v.0, n),
    })
}

pub fn smat_dense(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                m[(r, c)] = v[k];
            } else {
                let val = v[k] / SQRT2;
                m[(r, c)] = val;
                m[(c, r)] = val;
            }
            k += 1;
        }
    }
    m
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::InvalidMatrix("non-finite entry".into()))
    }
}

/// Eigen-decomposition with ascending eigenvalues; columns of the returned
/// matrix are the matching orthonormal eigenvectors.
pub fn sym_eig(x: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>), LinalgError> {
    check_finite(x.as_matrix())?;
    Ok(sym_eig_dense(x.as_matrix()))
}

/// Same as [`sym_eig`] on a raw matrix that the caller knows is symmetric.
pub fn sym_eig_dense(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let eig = x.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
pub fn project_psd(x: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let (vals, vecs) = sym_eig(x)?;
    Ok(SymMatrix {
        inner: project_psd_from_eig(&vals, &vecs),
    })
}

pub(crate) fn project_psd_from_eig(vals: &[f64], vecs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let w = v.max(0.0);
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    let out = &scaled * vecs.transpose();
    (&out + out.transpose()) * 0.5
}

/// Maximum real part over the eigenvalues of a square real matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "spectral abscissa needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m)?;
    if m.nrows() == 0 {
        return Err(LinalgError::DimensionMismatch("empty matrix".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| LinalgError::InvalidMatrix("Schur iteration did not converge".into()))?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Cholesky-based inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| LinalgError::InvalidMatrix("matrix is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// Solves `X S = Z` for `X` (i.e. `X = Z S^{-1}`) with `S` symmetric positive
/// definite, via a Cholesky factorization of `S`.
pub fn right_solve_spd(z: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let chol = nalgebra::Cholesky::new(s.clone())
        .ok_or_else(|| LinalgError::InvalidMatrix("matrix is not positive definite".into()))?;
    // X S = Z  <=>  S Xᵀ = Zᵀ
    Ok(chol.solve(&z.transpose()).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(m).unwrap()
    }

    #[test]
    fn eig_diagonal() {
        let (vals, _) = sym_eig(&SymMatrix::from_diagonal(&[3.0, 2.0])).unwrap();
        assert_eq!(vals, vec![2.0, 3.0]);
    }

    #[test]
    fn eig_swap_matrix() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let (vals, _) = sym_eig(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = random_sym(&mut rng, 5);
            let (vals, vecs) = sym_eig(&x).unwrap();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
            let err = (recon - x.as_matrix()).norm();
            assert!(err <= 1e-10 * x.frobenius_norm());
            let orth = (vecs.transpose() * &vecs - DMatrix::identity(5, 5)).norm();
            assert!(orth < 1e-12);
        }
    }

    #[test]
    fn eig_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = f64::NAN;
        let s = SymMatrix { inner: m };
        assert!(matches!(sym_eig(&s), Err(LinalgError::InvalidMatrix(_))));
    }

    #[test]
    fn projection_cases() {
        let p = SymMatrix::from_diagonal(&[1.0, 4.0]);
        let r = project_psd(&p).unwrap();
        assert!((r.as_matrix() - p.as_matrix()).norm() < 1e-14);

        let r = project_psd(&SymMatrix::from_diagonal(&[-1.0, 2.0])).unwrap();
        assert!((r.as_matrix() - SymMatrix::from_diagonal(&[0.0, 2.0]).as_matrix()).norm() < 1e-14);
    }

    #[test]
    fn projection_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..8 {
            let x = random_sym(&mut rng, n);
            let r = project_psd(&x).unwrap();
            assert!(min_eigenvalue(r.as_matrix()) >= -1e-10 * x.frobenius_norm());
            let diff = SymMatrix::new(x.as_matrix() - r.as_matrix()).unwrap();
            assert!(diff.inner_product(&r).abs() < 1e-9);
            // X - R must be NSD for R to be the projection.
            assert!(max_eigenvalue(diff.as_matrix()) < 1e-10);
        }
    }

    #[test]
    fn abscissa_cases() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        assert!((spectral_abscissa(&d).unwrap() + 1.0).abs() < 1e-14);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).unwrap().abs() < 1e-14);
        let mut bad = DMatrix::identity(2, 2);
        bad[(1, 0)] = f64::INFINITY;
        assert!(spectral_abscissa(&bad).is_err());
    }

    /// Builds the companion matrix of `prod (x - r_i)` by polynomial
    /// expansion; the oracle is the list of chosen roots itself.
    #[test]
    fn abscissa_matches_companion_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let n = rng.random_range(2..7);
            let roots: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..-0.1)).collect();
            // coefficients of monic polynomial, highest degree first
            let mut coeffs = vec![1.0];
            for &r in &roots {
                let mut next = vec![0.0; coeffs.len() + 1];
                for (k, &c) in coeffs.iter().enumerate() {
                    next[k] += c;
                    next[k + 1] -= c * r;
                }
                coeffs = next;
            }
            let mut comp = DMatrix::zeros(n, n);
            for j in 0..n {
                comp[(0, j)] = -coeffs[j + 1];
            }
            for i in 1..n {
                comp[(i, i - 1)] = 1.0;
            }
            let expected = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let got = spectral_abscissa(&comp).unwrap();
            // clustered real roots are ill-conditioned; keep roots separated
            let mut sorted = roots.clone();
            sorted.sort_by(f64::total_cmp);
            let sep = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if sep > 0.05 {
                assert!((got - expected).abs() < 1e-8, "got {got}, expected {expected}");
            }
        }
    }

    #[test]
    fn abscissa_similarity_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 4;
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let t = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
            let tinv = t.clone().try_inverse().unwrap();
            let sim = &t * &m * tinv;
            let a = spectral_abscissa(&m).unwrap();
            let b = spectral_abscissa(&sim).unwrap();
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn svec_conventions() {
        assert_eq!(svec(&SymMatrix::identity(2)).0, vec![1.0, 0.0, 1.0]);
        let ones = SymMatrix::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let v = svec(&ones).0;
        assert_eq!(v[0], 1.0);
        assert!((v[1] - SQRT2).abs() < 1e-15);
        assert_eq!(v[2], 1.0);
        assert!(matches!(
            smat(&SvecVector(vec![1.0, 2.0])),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn svec_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..10 {
            let x = random_sym(&mut rng, n);
            let y = random_sym(&mut rng, n);
            let direct = x.inner_product(&y);
            assert!((svec(&x).dot(&svec(&y)) - direct).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(10_000))]
        #[test]
        fn svec_smat_roundtrip(n in 1usize..=20, seed in proptest::prelude::any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_sym(&mut rng, n);
            let back = smat(&svec(&x)).unwrap();
            proptest::prop_assert!((back.as_matrix() - x.as_matrix()).norm() <= 1e-14 * (1.0 + x.frobenius_norm()));
        }
    }
}
