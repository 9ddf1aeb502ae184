//! Adaptive Metropolis-within-Gibbs sampling, imputation and diagnostics.

mod diagnostics;
mod draws;
mod engine;
mod model_target;
mod replicates;

pub use diagnostics::{central_interval, coverage, histogram, psrf, quantile_sorted, quantiles};
pub use draws::PosteriorDraws;
pub use engine::{
    chain_rng, run_chain, run_chains, BlockKind, ChainRng, ChainStats, McmcConfig, Target,
};
pub use replicates::{draw_subset, posterior_replicates, replicate_observation, sample_tree};
