use thiserror::Error;

/// Errors raised by grid, form and pipeline operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension must be between 1 and 3, got {actual}")]
    BadDimension { actual: usize },

    #[error("grid resolution must be even and at least 8 per axis, got {actual}")]
    BadResolution { actual: usize },

    #[error("operands live on different grids")]
    DomainMismatch,

    #[error("expected a form of degree {expected}, got degree {actual}")]
    DegreeMismatch { expected: usize, actual: usize },

    #[error("wrong number of components: expected {expected}, got {actual}")]
    ComponentCount { expected: usize, actual: usize },

    #[error("top-degree form: exterior derivative is not defined")]
    TopDegreeForm,

    #[error("degree-0 form has no {op}")]
    DegreeZeroForm { op: &'static str },

    #[error("field contains a non-finite value at grid point {point:?}")]
    NonFiniteValue { point: Vec<usize> },

    #[error("metric is not symmetric at grid point {point:?}")]
    NotSymmetric { point: Vec<usize> },

    #[error("metric is not positive-definite at grid point {point:?}")]
    NotPositiveDefinite { point: Vec<usize> },

    #[error("singular vector field: g(X,X) = {value:.3e} at grid point {point:?}")]
    SingularVectorField { point: Vec<usize>, value: f64 },

    #[error("unsupported norm for (n, k) = ({n}, {k})")]
    UnsupportedNorm { n: usize, k: usize },

    #[error("invalid scenario:\n{report}")]
    InvalidScenario { report: String },

    #[error("chart wraps fully around an axis: not contractible")]
    NotContractible,

    #[error("chart axis {axis} is degenerate or has fewer than 2 samples")]
    BadChart { axis: usize },

    #[error(
        "form not closed enough: axis {axis} mean {mean:.12e} vs loop integral {loop_integral:.12e}"
    )]
    FormNotClosed { axis: usize, mean: f64, loop_integral: f64 },

    #[error("no rational class with q <= {q_max} meets the perturbation budget {budget:.3e}")]
    NoRationalApproximation { q_max: u64, budget: f64 },

    #[error("positivity violated after perturbation: min pairing {min_pairing:.3e} at {point:?}")]
    PositivityViolated { min_pairing: f64, point: Vec<usize> },

    #[error("level set of the primitive is empty at level {level}")]
    EmptyLevelSet { level: f64 },

    #[error("cross section carries no samples")]
    EmptySampleSet,

    #[error("return bound exceeded after {steps} integration steps")]
    ReturnBoundExceeded { steps: usize },

    #[error("lift of the primitive stopped increasing along the flow (dF/dt = {rate:.3e})")]
    MonotonicityLost { rate: f64 },

    #[error("base map is not invertible on the grid (jacobian {jacobian:.3e})")]
    BaseMapNotInvertible { jacobian: f64 },

    #[error("roof function must be positive, min value {min:.3e}")]
    RoofNotPositive { min: f64 },

    #[error("suspension base must have dimension 1 or 2, got {actual}")]
    BadBaseDimension { actual: usize },

    #[error("{0}")]
    Other(String),
}
