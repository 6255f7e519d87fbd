use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{field}` must be strictly positive, got {value}")]
    NonPositiveRate { field: &'static str, value: f64 },

    #[error("gamma1 must equal 1 in canonical units, got {0}")]
    NotNormalized(f64),

    #[error(
        "no stationary state: the cavity is self-pulsing (period ~ {period:.4}, relative modulation {modulation:.3e})"
    )]
    NotStationary { period: f64, modulation: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("not enough samples for pulsing analysis: {0}")]
    InsufficientData(String),

    #[error("no stability threshold in epsilon range [{lo}, {hi}]")]
    NoThresholdInRange { lo: f64, hi: f64 },

    #[error("eigenvalue solver failed")]
    EigenSolverFailure,

    #[error("singular matrix at omega = {omega}")]
    SingularMatrix { omega: f64 },

    #[error("output quadrature matrix has imaginary residue {residue:.3e} at omega = {omega}")]
    NonHermitianResidue { omega: f64, residue: f64 },

    #[error("quadrature matrix asymmetric by {0:.3e}")]
    Asymmetric(f64),

    #[error("degenerate variance {value:.3e} in {context}")]
    DegenerateVariance { context: String, value: f64 },

    #[error("trajectory diverged at t = {t}")]
    NonFinite { t: f64 },

    #[error("{diverged} of {total} trajectories diverged; ensemble unreliable")]
    ExcessiveDivergence { diverged: usize, total: usize },

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
