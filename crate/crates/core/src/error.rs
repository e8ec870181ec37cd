use thiserror::Error;

use crate::bench::BenchError;
use crate::belief::BeliefError;
use crate::domain::DomainError;
use crate::edp::EdpError;
use crate::optim::OptimError;
use crate::query::QueryError;
use crate::sim::SimError;
use crate::zones::ZoneError;

/// Any error the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Edp(#[from] EdpError),
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}
