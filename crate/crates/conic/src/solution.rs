use crate::error::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Homogeneous primal-dual interior point with Nesterov-Todd scaling.
    InteriorPoint,
    /// Operator splitting on the homogeneous self-dual embedding.
    Admm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Iteration cap for the splitting method.
    pub max_iter: usize,
    /// Iteration cap for the interior-point method.
    pub ipm_max_iter: usize,
    pub over_relaxation: f64,
    pub scaling: bool,
    pub eps_infeas: f64,
    pub algorithm: Algorithm,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-7,
            eps_rel: 1e-7,
            max_iter: 200_000,
            ipm_max_iter: 120,
            over_relaxation: 1.5,
            scaling: true,
            eps_infeas: 1e-8,
            algorithm: Algorithm::InteriorPoint,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(eps: f64) -> Self {
        Self {
            eps_abs: eps,
            eps_rel: eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0 && self.eps_infeas > 0.0) {
            return Err(ConicError::InvalidSettings("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.ipm_max_iter == 0 {
            return Err(ConicError::InvalidSettings("iteration caps must be at least 1".into()));
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return Err(ConicError::InvalidSettings("over-relaxation must lie in (0, 2)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// `cᵀx` at the returned point.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Normalized `y` (primal infeasible) or `x` (dual infeasible).
    pub certificate: Option<Vec<f64>>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Dual objective `-bᵀy`.
    pub fn dual_objective(&self, b: &[f64]) -> f64 {
        -b.iter().zip(&self.y).map(|(u, v)| u * v).sum::<f64>()
    }
}
