use crate::lattice::{EdgeId, VertexId};

/// Errors produced by the forward and inverse machinery.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("vertex {0} is not in the region")]
    NotInRegion(VertexId),

    #[error("ODE integration failed at lambda = {lambda}")]
    IntegrationFailure { lambda: f64 },

    #[error("only {found} of {wanted} eigenvalues found below {upper}")]
    WindowExhausted {
        found: usize,
        wanted: usize,
        upper: f64,
    },

    #[error("lambda = {lambda} is too close to a Dirichlet eigenvalue (psi = {psi:e})")]
    NearEigenvalue { lambda: f64, psi: f64 },

    #[error("lambda = {lambda} is inadmissible: {reason}")]
    Inadmissible { lambda: f64, reason: Reason },

    #[error("linear system is ill-conditioned (cond = {cond:e}); change lambda")]
    IllConditioned { cond: f64 },

    #[error("missing coefficient near vertex {0} where the field is nonzero")]
    IncompleteFrontier(VertexId),

    #[error("no informative samples remain: {0}")]
    Uninformative(String),

    #[error("fit did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        best: Box<crate::edge_ode::SymmetricPotential>,
    },

    #[error("sample families are on different lambda masks")]
    MaskMismatch,

    #[error("invalid input: {0}")]
    Schema(String),

    #[error("reconstruction failed at sweep {sweep}, k = {k}: {message}")]
    Reconstruction {
        sweep: crate::reconstruct::Sweep,
        k: usize,
        message: String,
        snapshot: Box<serde_json::Value>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a spectral parameter was rejected.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    /// Within the exclusion radius of a point where cos(sqrt(lambda)) is 0 or +-1.
    NearT0 { point: f64 },
    /// Some edge has a Dirichlet eigenvalue here.
    EdgeEigenvalue { edge: EdgeId, psi: f64 },
    /// The interior vertex or continuous system is (nearly) singular.
    Singular { cond: f64 },
    /// The region has no boundary vertex where a denominator survives.
    Degenerate { detail: String },
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reason::NearT0 { point } => write!(f, "near exceptional point {point}"),
            Reason::EdgeEigenvalue { edge, psi } => {
                write!(f, "edge {edge} has psi(1) = {psi:e}")
            }
            Reason::Singular { cond } => write!(f, "singular system (cond {cond:e})"),
            Reason::Degenerate { detail } => write!(f, "{detail}"),
        }
    }
}
