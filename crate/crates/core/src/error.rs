use thiserror::Error;

/// Quadrature location attached to constitutive failures during assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpLocation {
    pub element: usize,
    pub point: usize,
    pub x: [f64; 3],
}

impl std::fmt::Display for QpLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "element {} qp {} at ({:.4}, {:.4}, {:.4})",
            self.element, self.point, self.x[0], self.x[1], self.x[2]
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive deformation Jacobian det(F) = {det:e}{}", .location.map(|l| format!(" at {l}")).unwrap_or_default())]
    NonPositiveJacobian {
        det: f64,
        location: Option<QpLocation>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate extent along axis {axis}: [{lo}, {hi}]")]
    DegenerateExtent { axis: usize, lo: f64, hi: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("CG did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: p'Ap = {curvature:e} at CG iteration {iteration}")]
    IndefiniteMatrix { iteration: usize, curvature: f64 },

    #[error("Newton iteration diverged at time step {step}, iteration {iteration} (residual {residual:e})")]
    NewtonDiverged {
        step: usize,
        iteration: usize,
        residual: f64,
    },

    #[error("node {0} is not on the boundary")]
    InteriorNode(usize),

    #[error("cannot scale noise relative to an all-zero signal")]
    ZeroSignal,

    #[error("discrepancy parameter tau = {0} must exceed 2")]
    InvalidTau(f64),

    #[error("cone ratio denominator {0:e} is below 1e-14")]
    DegenerateDenominator(f64),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("invalid excitation width: {0}")]
    InvalidWidth(String),

    #[error("coefficient ({row}, {col}) = {value} left the admissible set")]
    InadmissibleCoefficients { row: usize, col: usize, value: f64 },

    #[error("Landweber iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
