use thiserror::Error;

/// Failures raised while evaluating surface geometry.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("unknown immersion kind `{0}`")]
    UnknownKind(String),
    #[error("missing or invalid immersion parameter `{0}`")]
    BadParameter(String),
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
    #[error("immersion degenerates: |d1 x d2| = {norm:e} below threshold")]
    Degenerate { norm: f64 },
    #[error("immersion degenerates at node ({i}, {j}): |d1 x d2| = {norm:e}")]
    DegenerateAtNode { i: usize, j: usize, norm: f64 },
    #[error("domains differ: ({0}, {1}) vs ({2}, {3})")]
    DomainMismatch(f64, f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("lambda must be >= 0, got {0}")]
    Lambda(f64),
    #[error("mu must be > 0, got {0}")]
    Mu(f64),
    #[error("eps must be > 0, got {0}")]
    Eps(f64),
    #[error("elasticity tensor not positive-definite: smallest eigenvalue {0:e} at node {1}")]
    NotPositive(f64, usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 5 nodes per side, got {0}x{1}")]
    TooCoarse(usize, usize),
    #[error("domain side lengths must be positive, got ({0}, {1})")]
    BadLength(f64, f64),
    #[error("field has {got} values, grid has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "line search stalled after {iterations} iterations (step < 1e-16), residual {residual:e}"
    )]
    Stall {
        iterations: usize,
        residual: f64,
        energy: f64,
    },
    #[error("solver failed at t = {t}: {source}")]
    AtParameter {
        t: f64,
        #[source]
        source: Box<SolveError>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("[{section}] {key}: {message}")]
    Key {
        section: String,
        key: String,
        message: String,
    },
    #[error("[{section}]: {message}")]
    Section { section: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Anything that can stop a driver command.
#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
