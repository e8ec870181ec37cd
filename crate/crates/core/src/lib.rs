//! Expected divergence points, querying zones and goal queries for ad hoc
//! teamwork in a tool-fetching grid world.
//!
//! The worker moves toward one of several stations; the fetcher must bring
//! the matching tool and can ask the worker about its goal at a price. The
//! modules build up from the domain and policies ([`domain`]) through
//! expected divergence points ([`edp`]), zones ([`zones`]), belief updates
//! ([`belief`]) and query values ([`query`]) to query optimisation
//! ([`optim`]), fetcher planners ([`planners`]), episode simulation ([`sim`])
//! and sweep tooling ([`bench`]).

pub mod bench;
pub mod belief;
pub mod domain;
pub mod edp;
mod error;
pub mod optim;
pub mod planners;
pub mod query;
pub mod sim;
pub mod zones;

pub use error::Error;
