use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {name} = {value} ({requirement})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    /// The asymptotic formulas need Q_alpha > 1.
    #[error("asymptotic formula requires Q_alpha > 1, got Q_alpha = {q_alpha}")]
    OddsThresholdTooSmall { q_alpha: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The per-null event has probability zero, so no finite number of nulls
    /// meets the detection criterion.
    #[error("detection criterion unattainable: event probability is zero")]
    Unattainable,

    #[error("family `{0}` has no exact tail representation")]
    NoExactTails(&'static str),

    #[error("simulation budget exceeded: {requested} scalar draws requested, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            requirement: "must lie in (0, 1)",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            requirement: "must be finite and > 0",
        })
    }
}
