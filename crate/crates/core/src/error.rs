use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Division requires `inf (1 + g) > eps`.
    #[error("g is not in U_eps: inf(1 + g) = {inf:.6e} is not above eps = {epsilon:.6e}")]
    OutsideUset { inf: f64, epsilon: f64 },

    #[error("orientation failure: det(d phi) = {det:.6e} at x = {point:?}")]
    Orientation { point: Vec<f64>, det: f64 },

    #[error("degenerate Jacobian: min det(d phi) = {min_det:.6e} is below the floor {floor:.3e}")]
    Degenerate { min_det: f64, floor: f64 },

    #[error("injectivity certificate failure: sup |du|_op = {op_norm:.6e} is not below 1")]
    Injectivity { op_norm: f64 },

    #[error("Newton inversion did not converge: worst residual {residual:.3e} at y = {point:?}")]
    NonConvergence { point: Vec<f64>, residual: f64 },

    #[error("metric is not positive definite at z = {point:?}")]
    MetricNotPositive { point: Vec<f64> },

    #[error("geodesic state became non-finite at t = {t}")]
    GeodesicBlowup { t: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
