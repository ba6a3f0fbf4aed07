use thiserror::Error;

/// Errors raised by the solvers, certifiers and I/O layers.
#[derive(Debug, Error)]
pub enum CarrollError {
    #[error("γ={gamma} is outside the admissible interval (1, 3]")]
    Parameter { gamma: f64 },

    #[error("γ=1 isothermal case out of scope")]
    Isothermal,

    #[error("Carrollian liquescence: σ={sigma} must be strictly positive")]
    Liquescence { sigma: f64 },

    #[error("loss of strict hyperbolicity: β={beta} coincides with ±σ^θ={sigma_theta}")]
    Degenerate { beta: f64, sigma_theta: f64 },

    #[error("cannot invert Riemann invariants: w1={w1} must exceed w2={w2}")]
    Inversion { w1: f64, w2: f64 },

    #[error("non-finite eigenvalue derivative ({lambda1_x}, {lambda2_x})")]
    Classification { lambda1_x: f64, lambda2_x: f64 },

    #[error("invalid initial data: {0}")]
    Data(String),

    #[error("inadmissible initial data: {}", .0.join("; "))]
    Inadmissible(Vec<String>),

    #[error("t={t} is at or beyond the validity horizon T*={horizon}")]
    Horizon { t: f64, horizon: f64 },

    #[error("foot-point bracketing lost at t={t} near x={x}: characteristics have crossed")]
    BracketFailure { t: f64, x: f64 },

    #[error("derivative blows up along the characteristic at t*={t_star}")]
    BlowUp { t_star: f64 },

    #[error("invariant region violated: {what} = {value}")]
    Region { what: &'static str, value: f64 },

    #[error("fixed-point iteration stalled after {sweeps} sweeps (residual {residual:e})")]
    Iteration { sweeps: usize, residual: f64 },

    #[error("time step dt={dt} exceeds the CFL limit {limit}")]
    TimeStep { dt: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CarrollError>;
