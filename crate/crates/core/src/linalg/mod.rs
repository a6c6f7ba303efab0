//! Small dense real-matrix kernel shared by every other module.

mod expm;
mod mat;
mod schur;
mod solve;

use thiserror::Error;

pub use expm::expm;
pub use mat::{norm2, norm_inf, Mat};
pub use schur::{
    eigenvalues, hessenberg, is_hurwitz, real_schur, spectral_abscissa, spectral_radius,
    SchurResult,
};
pub use solve::{
    complex_rank, inverse, lstsq_min_norm, rank, solve_linear, svd, LeastSquares, Svd,
    PIVOT_RELATIVE_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: expected shape {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular: pivot {pivot:e} in column {column}")]
    Singular { pivot: f64, column: usize },
    #[error("iteration did not converge within {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
}
