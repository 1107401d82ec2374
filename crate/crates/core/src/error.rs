use thiserror::Error;

use crate::fem::SolveReport;
use crate::integrator::StepReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("node index {index} out of range for {count} nodes")]
    NodeOutOfRange { index: usize, count: usize },

    #[error("field lives on a different grid than the particles")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid particle set: {0}")]
    InvalidParticles(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density weight is non-positive at {} node(s), first at node {}", .nodes.len(), .nodes[0])]
    NonPositiveWeight { nodes: Vec<usize> },

    #[error("conjugate gradients did not converge: {0}")]
    NotConverged(SolveReport),

    #[error("singular per-particle momentum system at particle {particle} (det = {det:e})")]
    DegenerateStep { particle: usize, det: f64 },

    #[error("fixed-point iteration did not converge after {} sweeps", .0.fp_iterations)]
    FixedPointDiverged(Box<StepReport>),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("observer failed at step {step}: {message}")]
    Observer { step: usize, message: String },
}
