use thiserror::Error;

/// Everything that can go wrong across the solver pipeline.
///
/// Variants are grouped by where they originate; `exit_code` maps them onto
/// the CLI convention (2 = bad configuration/usage, 1 = numerical failure).
#[derive(Debug, Error)]
pub enum Error {
    // ---- configuration / construction -------------------------------------
    #[error("shape parameter must be positive and finite, got {0}")]
    InvalidShape(f64),

    #[error("kernel derivative order {0} unsupported (orders 0..=3 are implemented)")]
    UnsupportedDerivativeOrder(usize),

    #[error("need at least 4 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("interval start {0} must be strictly below end {1}")]
    BadInterval(f64, f64),

    #[error("node coordinates must be strictly increasing (violated at index {0})")]
    NonIncreasingNodes(usize),

    #[error("node coordinate at index {0} is not finite")]
    NonFiniteNode(usize),

    #[error("explicit node list must start/end exactly at the interval endpoints")]
    EndpointMismatch,

    #[error("stencil size {n} invalid for {n_nodes} nodes (need {min} <= n <= N)")]
    BadStencilSize { n: usize, n_nodes: usize, min: usize },

    #[error("coefficient `{name}` = {value} is inactive for family `{family}` and must be zero")]
    InactiveCoefficient { family: &'static str, name: &'static str, value: f64 },

    #[error("coefficient `{name}` = {value} must be non-negative")]
    NegativeCoefficient { name: &'static str, value: f64 },

    #[error("family `{family}` requires mu > 0 (mass matrix degenerates to identity at mu = 0; use the explicit identity-mass constructor if that is intended)")]
    DegenerateMass { family: &'static str },

    #[error("forcing period must be positive, got {0}")]
    BadPeriod(f64),

    #[error("custom forcing table needs at least two samples with strictly increasing times")]
    BadForcingTable,

    #[error("time {t} outside custom forcing table range [{lo}, {hi}]")]
    ForcingOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("soliton speed must be positive, got {0}")]
    BadSolitonSpeed(f64),

    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),

    #[error("t_max = {t_max} is not an integer multiple of dt = {dt} within 1e-9")]
    HorizonNotMultipleOfDt { t_max: f64, dt: f64 },

    #[error("probe at x = {0} lies outside the node interval")]
    ProbeOutsideDomain(f64),

    #[error("family `{family}` needs the order-{order} operator but it was not supplied")]
    MissingOperator { family: &'static str, order: usize },

    #[error("state length {got} does not match node count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    // ---- numerics ----------------------------------------------------------
    #[error("local interpolation matrix at node {node} is numerically singular (cond ~ {cond:.3e}); change the shape-to-spacing ratio (smaller C relative to h)")]
    SingularLocalSystem { node: usize, cond: f64 },

    #[error("global interpolation matrix is singular to working precision")]
    SingularGlobalSystem,

    #[error("dense {what} limited to N <= {limit}, got N = {n}")]
    DenseLimit { what: &'static str, limit: usize, n: usize },

    #[error("mass matrix factorization failed (I - mu*D2 singular)")]
    MassFactorization,

    #[error("right-boundary derivative row has zero weight on the adjacent node; stencil is degenerate for the Neumann constraint")]
    DegenerateBoundaryStencil,

    #[error("non-finite state at t = {t} (first offending node {node})")]
    NonFiniteState { t: f64, node: usize },

    #[error("solution blow-up at t = {t}: max |u| = {max_abs:.3e} exceeds 1e6")]
    BlowUp { t: f64, max_abs: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("record too short for period {period} (need t_max - period >= first recorded time)")]
    RecordTooShort { period: f64 },

    // ---- io ----------------------------------------------------------------
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI process exit code: 2 for configuration/usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidShape(_)
            | UnsupportedDerivativeOrder(_)
            | TooFewNodes(_)
            | BadInterval(..)
            | NonIncreasingNodes(_)
            | NonFiniteNode(_)
            | EndpointMismatch
            | BadStencilSize { .. }
            | InactiveCoefficient { .. }
            | NegativeCoefficient { .. }
            | DegenerateMass { .. }
            | BadPeriod(_)
            | BadForcingTable
            | BadSolitonSpeed(_)
            | BadTimeStep(_)
            | HorizonNotMultipleOfDt { .. }
            | ProbeOutsideDomain(_)
            | MissingOperator { .. }
            | LengthMismatch { .. }
            | Config(_)
            | Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
