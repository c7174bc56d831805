use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuspError {
    #[error("profile evaluation error at x = {x}")]
    ProfileEval { x: f64 },
    #[error("cusp point not mappable (x = {x})")]
    CuspPoint { x: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("beyond truncation: xi = {xi} > {xi_max}")]
    BeyondTruncation { xi: f64, xi_max: f64 },
    #[error("spectral parameter on the branch cut: {0}")]
    BranchCut(String),
    #[error("near-spectrum: mu = {mu} within {dist:e} of eigenvalue {eig}")]
    NearSpectrum { mu: String, eig: f64, dist: f64 },
    #[error("contour collision at node {node}: {what}")]
    ContourCollision { node: usize, what: String },
    #[error("resonant z = {0}")]
    Resonant(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("too few frames: {got} < {need}")]
    TooFewFrames { got: usize, need: usize },
    #[error("size limit exceeded: {got} > {limit}")]
    SizeLimit { got: usize, limit: usize },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("root-finder did not converge in [{lo}, {hi}]")]
    RootFinder { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CuspError>;

impl From<std::io::Error> for CuspError {
    fn from(e: std::io::Error) -> Self {
        CuspError::Io(e.to_string())
    }
}
