use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular {what} on cell {cell}")]
    SingularSystem { what: &'static str, cell: usize },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("problem `{0}` has no exact solution")]
    MissingExactSolution(String),

    #[error("graded quadrature did not converge: tail estimate {tail:e} exceeds {tol:e}")]
    QuadratureNotConverged { tail: f64, tol: f64 },

    #[error("inconsistent degrees of freedom: {0}")]
    Dofs(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mesh file line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("adaptive iteration {iter}: {source}")]
    Iteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the discrete solve, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SingularSystem { .. } | Error::Solver(_) | Error::Dofs(_) => true,
            Error::Iteration { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
