use thiserror::Error;

/// Errors raised while building or analysing an oscillator network.
///
/// Vertex numbers carried in messages are 1-indexed, matching the external
/// graph format.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("edge {edge} references vertex {vertex}, outside 1..={n}")]
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge} ({a},{b}) duplicates edge {first}")]
    DuplicateEdge { edge: usize, first: usize, a: usize, b: usize },
    #[error("edge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("{edges} edges but {weights} weights")]
    WeightCountMismatch { edges: usize, weights: usize },
    #[error("graph is disconnected: vertex {vertex} is unreachable from vertex 1")]
    DisconnectedGraph { vertex: usize },
    #[error("gain c_{vertex} = {gain} must be positive")]
    NonPositiveGain { vertex: usize, gain: f64 },
    #[error("invalid range ({lo}, {hi}); need 0 < lo < hi")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("coupling parameter b = {0} outside (0, pi)")]
    BOutOfRange(f64),
    #[error("polynomial degree p = {0} must be at least 2")]
    InvalidDegree(u32),
    #[error("no outer breakpoint in (b, pi) for p = {p}, b = {b}")]
    NoBreakpointRoot { p: u32, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency {value} is outside the open image ({lo}, {hi}) of sigma_{vertex}")]
    OutOfImage { vertex: usize, value: f64, lo: f64, hi: f64 },
    #[error("frequency {value} is outside the common interval J = ({lo}, {hi})")]
    OutOfJ { value: f64, lo: f64, hi: f64 },
    #[error("the oscillator images have empty intersection")]
    EmptyJ,
    #[error("monotone inversion failed to bracket or converge for vertex {vertex}")]
    InversionFailed { vertex: usize },
    #[error("dual controller needs positive domain and images: {0}")]
    DualPositivityViolated(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kuramoto baseline needs affine oscillators and sine coupling")]
    KuramotoRequirements,
    #[error("invalid step: dt = {dt}, t_end = {t_end}")]
    InvalidStep { dt: f64, t_end: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian L_flat at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("point is not an equilibrium: residual {residual:e}")]
    NotAnEquilibrium { residual: f64 },
    #[error("eigenvalue computation failed")]
    EigenFailure,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
