use thiserror::Error;

/// Errors raised by the library. Solver non-convergence is reported through
/// flags on the returned solutions, not through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: Gaussian moment error {achieved:.3e} exceeds {limit:.1e}")]
    GridTooCoarse { achieved: f64, limit: f64 },

    #[error(
        "kernel bandwidth {bandwidth:.4} at epsilon {epsilon} is below two grid spacings ({spacing:.4}); refine the grid or raise epsilon"
    )]
    KernelTooNarrow {
        epsilon: f64,
        bandwidth: f64,
        spacing: f64,
    },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("NaN value at node {0}")]
    NotANumber(usize),

    #[error("potential asserted {expected} fails the discrete test at node {node} (second difference {value:.3e})")]
    ShapeViolation {
        expected: &'static str,
        node: usize,
        value: f64,
    },

    #[error("objects live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate fixed point: the map returns +inf everywhere")]
    InfiniteFixedPoint,

    #[error("sinkhorn oscillation at sweep {sweep}: marginal error rose to {error:.3e}")]
    Oscillation { sweep: usize, error: f64 },

    #[error("marginal mismatch {0:.3e}")]
    MarginalMismatch(f64),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
