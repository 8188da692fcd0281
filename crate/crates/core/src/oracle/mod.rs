//! Independent reference model and executable consistency properties.
//!
//! [`NaiveModel`] re-derives every lookup from an [`EventLog`] without the
//! replacement table, so it can arbitrate the fast engines on small
//! instances. The checkers in [`checks`] turn balance, minimal disruption,
//! monotonicity and the lookup-loop bounds into [`PropertyReport`]s, and the
//! suite runners drive them over seeded random histories.

pub mod checks;
mod fault;
mod log;
mod naive;
pub mod stats;

use thiserror::Error;

use crate::error::EngineError;

pub use checks::{
    check_balance, check_iteration_bounds, check_minimal_disruption, check_monotonicity,
    random_keys, random_removals, run_balance, run_equivalence, run_history_properties,
    run_iteration_bounds, run_memory_accounting, HistorySuite, Measurement, PropertyReport,
    Reproduction,
};
pub use fault::FaultInjected;
pub use log::{Event, EventLog};
pub use naive::{naive_lookup, NaiveModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("invalid event log: {0}")]
    InvalidLog(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
