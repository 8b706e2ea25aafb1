use thiserror::Error;

/// Failure modes of the inverse pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered {0}")]
    NonFinite(String),
    #[error("adaptive quadrature exceeded depth {depth} on [{a}, {b}]")]
    MaxDepthExceeded { depth: usize, a: f64, b: f64 },
    #[error("target {target} not bracketed by f(lo)={f_lo}, f(hi)={f_hi}")]
    NotBracketed { target: f64, f_lo: f64, f_hi: f64 },
    #[error("query ({t}, {w}) outside the tabulated domain")]
    OutOfDomain { t: f64, w: f64 },
    #[error("consumption {value} at or above the frontier c̄(t)={cbar} at t={t}")]
    AboveFrontier { t: f64, value: f64, cbar: f64 },
    #[error("tail beyond the horizon is {tail} (limit {limit})")]
    TailNotNegligible { tail: f64, limit: f64 },
    #[error("investment vanishes or blows up inside the integration segment at w={w}")]
    SingularIntegrand { w: f64 },
    #[error("value {z} outside the image of F(t, ·) at t={t}")]
    OutOfRange { t: f64, z: f64 },
    #[error("strategy pair fails the consistency check: {0}")]
    InconsistentPair(String),
    #[error("investment depends on time (π_t = {pi_t} at t={t}, w={w})")]
    NotTimeHomogeneous { t: f64, w: f64, pi_t: f64 },
    #[error("marginal utility saturated (u_c = {uc}) at c={c}")]
    Saturated { c: f64, uc: f64 },
    #[error("consumption is not strictly increasing in initial wealth at t={t}, x={x}")]
    DegenerateConsumption { t: f64, x: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that reflect bad inputs rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Csv(_) | Error::Io(_) | Error::OutOfDomain { .. }
        )
    }
}

pub type Result<V, E = Error> = std::result::Result<V, E>;
