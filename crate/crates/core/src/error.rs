use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fock index {index} is outside the cutoff of {levels} levels")]
    Index { index: usize, levels: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("wrong regime: {0}")]
    Regime(String),
    #[error("memory budget exceeded: need about {required_mb} MB, budget is {budget_mb} MB")]
    Budget { required_mb: u64, budget_mb: u64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_lambda(name: &str, lambda: f64) -> Result<()> {
    if lambda.is_finite() && (0.0..1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {lambda} must lie in [0, 1)")))
    }
}
