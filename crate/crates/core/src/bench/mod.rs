//! Benchmark tooling: instance generation, the precompute cache, sweeps,
//! plot data and episode replay.

mod cache;
mod config;
mod plots;
mod replay;
mod sweep;

pub use cache::{instance_digest, PrecomputeCache, CACHE_MAGIC, CACHE_VERSION};
pub use config::SweepConfig;
pub use plots::emit_plots;
pub use replay::{replay, EpisodeLog, ReplayOutcome};
pub use sweep::{
    episode_goal, episode_seed, read_histogram, read_summary, run_sweep, sign_test, CellFailure,
    EpisodeRow, HistogramRow, SummaryRow, SweepOutput, SweepTiming,
};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{DomainError, DomainInstance, InstanceLayout};
use crate::sim::SimError;
use crate::zones::ZoneError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precompute failed for instance {instance}: {source}")]
    Precompute { instance: usize, source: ZoneError },
    #[error("cache error: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Mixes `parts` into `master` with the splitmix64 finaliser, giving
/// independent-looking seeds for every sweep coordinate.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of the `index`-th instance of a sweep.
pub fn instance_seed(config: &SweepConfig, index: usize) -> u64 {
    derive_seed(config.seed, &[0x1257, index as u64])
}

/// Random instance: distinct station cells, distinct toolbox cells, every
/// tool in a uniformly chosen toolbox, agents anywhere.
pub fn generate_instance(config: &SweepConfig, seed: u64) -> Result<DomainInstance, BenchError> {
    config.validate()?;
    let cells = config.width * config.height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = |i: usize| crate::domain::Coord::new(i % config.width, i / config.width);
    let stations = sample(&mut rng, cells, config.stations)
        .into_iter()
        .map(coord)
        .collect();
    let toolboxes = sample(&mut rng, cells, config.toolboxes)
        .into_iter()
        .map(coord)
        .collect();
    let tool_of = (0..config.stations)
        .map(|_| rng.gen_range(0..config.toolboxes))
        .collect();
    let worker_start = coord(rng.gen_range(0..cells));
    let fetcher_start = coord(rng.gen_range(0..cells));
    Ok(DomainInstance::new(InstanceLayout {
        width: config.width,
        height: config.height,
        stations,
        toolboxes,
        tool_of,
        worker_start,
        fetcher_start,
    })?)
}
