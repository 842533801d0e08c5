use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("boundary magnitude {measured:.3e} exceeds tolerance {tol:.3e}")]
    Boundary { measured: f64, tol: f64 },
    #[error("CFL number {cfl:.3} exceeds limit {limit:.3}")]
    Cfl { cfl: f64, limit: f64 },
    #[error("Hermite truncation discarded mass {discarded:.3e} > {tol:.3e}")]
    Truncation { discarded: f64, tol: f64 },
    #[error("quadrature did not converge: estimate {estimate:.3e} > tol {tol:.3e}")]
    Quadrature { estimate: f64, tol: f64 },
    #[error("operator not Hermitian: residual {residual:.3e}")]
    NotHermitian { residual: f64 },
    #[error("dense dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },
    #[error("Hamiltonian has no separable potential")]
    MissingPotential,
    #[error("Hamiltonian derivative check failed: {0}")]
    HamiltonianCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
