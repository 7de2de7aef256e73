use thiserror::Error;

use crate::geometry::PhaseProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Channel(#[from] crate::Error),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("timed out waiting for feedback")]
    Timeout,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("remote error {code}: {text}")]
    Remote { code: u16, text: String },
}

/// Source of received-power feedback for a candidate configuration.
///
/// Every call to [`query`](PowerOracle::query) advances the counter by exactly one,
/// whether or not it succeeds.
pub trait PowerOracle<T> {
    /// Received power in dBm under `profile`.
    fn query(&mut self, profile: &PhaseProfile<T>) -> Result<T, OracleError>;

    fn query_count(&self) -> u64;
}

impl<T, O: PowerOracle<T> + ?Sized> PowerOracle<T> for &mut O {
    fn query(&mut self, profile: &PhaseProfile<T>) -> Result<T, OracleError> {
        (**self).query(profile)
    }

    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
}

impl<T, O: PowerOracle<T> + ?Sized> PowerOracle<T> for Box<O> {
    fn query(&mut self, profile: &PhaseProfile<T>) -> Result<T, OracleError> {
        (**self).query(profile)
    }

    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
}
