use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop at vertex {vertex}{}", at_line(*.line))]
    SelfLoop { vertex: usize, line: Option<usize> },

    #[error("duplicate edge {{{u}, {v}}}{}", at_line(*.line))]
    DuplicateEdge {
        u: usize,
        v: usize,
        line: Option<usize>,
    },

    #[error("vertex {vertex} out of range for n = {n}{}", at_line(*.line))]
    VertexOutOfRange {
        vertex: usize,
        n: usize,
        line: Option<usize>,
    },

    #[error("invalid pinning: {0}")]
    InvalidPinning(String),

    #[error("vertex {0} is pinned")]
    PinnedVertex(usize),

    #[error("configuration is not an independent set")]
    NotIndependent,

    #[error("not a tree: {0}")]
    NotATree(String),

    #[error("{what} = {size} exceeds limit {limit}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("eigenvalue with imaginary part {0:e}")]
    ComplexEigenvalue(f64),

    #[error("no convergence within {0} steps")]
    NonConvergence(u64),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn at_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

pub(crate) fn check_fugacity(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "fugacity must be positive, got {lambda}"
        )))
    }
}
