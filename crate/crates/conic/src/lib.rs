//! Linear conic optimization over zero, nonnegative and PSD cones, with the
//! dense symmetric kernels and a small modeling layer used to build LMIs.

mod admm;
pub mod cone;
pub mod error;
pub mod interior;
mod ipm;
pub mod linalg;
pub mod model;
pub mod problem;
pub mod solution;
pub mod sparse;

pub use cone::{Cone, ConeSpec};
pub use error::{ConicError, LinalgError};
pub use interior::{strict_interior, InteriorResult};
pub use linalg::{project_psd, smat, spectral_abscissa, svec, sym_eig, SvecVector, SymMatrix};
pub use model::{LinExpr, MatExpr, Model};
pub use problem::{ConicProblem, Residuals};
pub use solution::{Algorithm, ConicSolution, SolveStatus, SolverSettings};
pub use sparse::CscMatrix;

/// Solves `min cᵀx s.t. Ax + s = b, s ∈ K`.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    settings.validate()?;
    Ok(match settings.algorithm {
        Algorithm::InteriorPoint => ipm::solve_ipm(problem, settings),
        Algorithm::Admm => admm::solve_admm(problem, settings),
    })
}
