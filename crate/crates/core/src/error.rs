use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value {value} for parameter `{name}`")]
    Parameter { name: &'static str, value: f64 },

    #[error("particle {name} reached non-finite position {position}")]
    NonFinite { name: usize, position: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(&'static str),

    #[error("requested mass {requested} is not below the total mass {total}")]
    OutOfMass { requested: f64, total: f64 },

    #[error("boundary iteration requires lambda < 2, got {0}")]
    Regime(f64),

    #[error("unsupported query: {0}")]
    Unsupported(&'static str),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    Stability { dt: f64, limit: f64 },

    #[error("negative density {value} at grid node {node} (t = {t})")]
    NegativeDensity { node: usize, value: f64, t: f64 },

    #[error("root finder did not converge: {0}")]
    NoConvergence(&'static str),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter { name, value })
    }
}
