use thiserror::Error;

use crate::ledger::LedgerError;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("measurement requested off the SSB grid at t={time_ms} ms (period {period_ms} ms)")]
    OffSsbGrid { time_ms: u64, period_ms: u64 },

    #[error(transparent)]
    Ledger(#[from] LedgerError),

    #[error("report invariant violated: {0}")]
    Invariant(String),
}

impl SimError {
    /// True for errors caused by user input rather than by an internal inconsistency.
    pub fn is_usage(&self) -> bool {
        matches!(self, SimError::Config(_) | SimError::Domain(_))
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
