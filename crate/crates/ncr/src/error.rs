use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("facet ({0}, {1}) has more than two incident cells")]
    NonManifoldFacet(usize, usize),

    #[error("cell {0} is degenerate (zero area)")]
    DegenerateCell(usize),

    #[error("mesh file parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("triplet index ({row}, {col}) outside declared shape {nrows}x{ncols}")]
    IndexOutOfShape {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("near-singular local MPFA system at vertex {vertex} (fan of {fan_size} edges, condition estimate {cond:.3e})")]
    NearSingularLocalSystem {
        vertex: usize,
        fan_size: usize,
        cond: f64,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("linear solve residual too large: {residual:.3e} (tolerance {tol:.3e})")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("inf-sup failure heuristic: pressure multiplier magnitude {0:.3e} exceeds threshold")]
    InfSupFailure(f64),

    #[error("CFL violation: dt = {dt:.3e} is not below C*h = {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("transient blow-up guard: velocity norm {0:.3e} exceeded 1e6")]
    BlowUp(f64),

    #[error("unknown case '{0}'")]
    UnknownCase(String),

    #[error("case '{name}' failed its registration residual check: max residual {residual:.3e}")]
    CaseResidual { name: String, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
