use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised while building or checking a mesh.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("face adjacency: face {face} references {count} cells (expected 1 or 2)")]
    FaceAdjacency { face: usize, count: usize },
    #[error("face adjacency: face {face} lists cell {cell}, which does not contain it")]
    FaceCellMismatch { face: usize, cell: usize },
    #[error("cell boundary not closed: cell {cell}")]
    OpenCellLoop { cell: usize },
    #[error("index out of range: {what} {index}")]
    IndexOutOfRange { what: &'static str, index: usize },
    #[error("cell {cell}: self-intersecting polygon")]
    SelfIntersecting { cell: usize },
    #[error("degenerate face {face}: zero length")]
    DegenerateFace { face: usize },
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("mesh validation failed: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("voronoi generation failed after {attempts} attempts: {reason}")]
    VoronoiFailed { attempts: usize, reason: String },
}

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cell {cell}: singular local system ({what})")]
    SingularLocal { cell: usize, what: &'static str },
    #[error("cell {cell}: local operator kernel has dimension {found}, expected {expected}")]
    KernelDimension {
        cell: usize,
        expected: usize,
        found: usize,
    },
    #[error("global matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("solver backward error {residual:e} exceeds {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
