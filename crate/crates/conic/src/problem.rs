use crate::cone::ConeSpec;
use crate::error::ConicError;
use crate::sparse::CscMatrix;

/// `min cᵀx  s.t.  A x + s = b,  s ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn new(c: Vec<f64>, a: CscMatrix, b: Vec<f64>, cones: ConeSpec) -> Result<Self, ConicError> {
        let p = Self { c, a, b, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.a.ncols != self.c.len() {
            return Err(ConicError::Malformed(format!(
                "A has {} columns but c has length {}",
                self.a.ncols,
                self.c.len()
            )));
        }
        if self.a.nrows != self.b.len() {
            return Err(ConicError::Malformed(format!(
                "A has {} rows but b has length {}",
                self.a.nrows,
                self.b.len()
            )));
        }
        if self.cones.dim() != self.b.len() {
            return Err(ConicError::Malformed(format!(
                "cone dimension {} differs from row count {}",
                self.cones.dim(),
                self.b.len()
            )));
        }
        if !self.a.is_finite() || !self.b.iter().all(|v| v.is_finite()) || !self.c.iter().all(|v| v.is_finite()) {
            return Err(ConicError::Malformed("non-finite problem data".into()));
        }
        Ok(())
    }
}

/// Termination measures at a (normalized) primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖Ax + s − b‖ / (1 + ‖b‖)`
    pub primal: f64,
    /// `‖Aᵀy + c‖ / (1 + ‖c‖)`
    pub dual: f64,
    /// `|cᵀx + bᵀy| / (1 + |cᵀx| + |bᵀy|)`
    pub gap: f64,
    pub objective: f64,
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConicProblem {
    pub fn residuals(&self, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
        let mut rp = self.a.mul_vec(x);
        for i in 0..rp.len() {
            rp[i] += s[i] - self.b[i];
        }
        let mut rd = self.a.tmul_vec(y);
        for (r, c) in rd.iter_mut().zip(&self.c) {
            *r += c;
        }
        let pobj = dot(&self.c, x);
        let by = dot(&self.b, y);
        Residuals {
            primal: norm2(&rp) / (1.0 + norm2(&self.b)),
            dual: norm2(&rd) / (1.0 + norm2(&self.c)),
            gap: (pobj + by).abs() / (1.0 + pobj.abs() + by.abs()),
            objective: pobj,
        }
    }
}
