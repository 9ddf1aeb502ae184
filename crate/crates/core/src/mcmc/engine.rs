use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

pub type ChainRng = ChaCha8Rng;

/// Independent stream for one chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept_scalar: f64,
    pub target_accept_block: f64,
    /// Iterations between proposal-scale adaptations during burn-in.
    pub adapt_interval: usize,
    pub max_init_attempts: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl McmcConfig {
    /// 4 chains of 8,000 iterations, 4,000 burn-in, thinned by 4.
    pub fn desk() -> Self {
        Self {
            chains: 4,
            iterations: 8_000,
            burn_in: 4_000,
            thin: 4,
            seed: 1,
            target_accept_scalar: 0.44,
            target_accept_block: 0.234,
            adapt_interval: 50,
            max_init_attempts: 20,
        }
    }

    /// 4 chains of 80,000 iterations, 40,000 burn-in, thinned by 10.
    pub fn full() -> Self {
        Self {
            iterations: 80_000,
            burn_in: 40_000,
            thin: 10,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.adapt_interval == 0 {
            return Err(Error::Config("adapt_interval must be positive".into()));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// One unconstrained scalar, random-walk proposal.
    Scalar,
    /// A vector updated jointly with a covariance-adapted proposal.
    Joint(usize),
    /// Target-supplied move with a tunable positive scale.
    Custom,
}

/// A density over a state that can be updated block by block.
pub trait Target: Sync {
    type State: Clone + Send;
    type Block: Copy + Debug + Send + Sync;

    fn blocks(&self) -> Vec<(Self::Block, BlockKind)>;
    fn initial_state(&self, chain: usize, rng: &mut ChainRng) -> Self::State;
    fn log_density(&self, state: &Self::State) -> f64;
    /// Every term of `log_density` that depends on `block`.
    fn block_log_density(&self, block: Self::Block, state: &Self::State) -> f64;
    fn get(&self, state: &Self::State, block: Self::Block, out: &mut Vec<f64>);
    fn set(&self, state: &mut Self::State, block: Self::Block, values: &[f64]);

    /// Copies whatever `set` may change, so a rejected proposal can be undone
    /// exactly even when `set` is not numerically invertible.
    fn save(&self, state: &Self::State, block: Self::Block, out: &mut Vec<f64>) {
        self.get(state, block, out);
    }

    fn restore(&self, state: &mut Self::State, block: Self::Block, saved: &[f64]) {
        self.set(state, block, saved);
    }

    fn initial_scale(&self, _block: Self::Block) -> f64 {
        0.1
    }

    /// Metropolis step for [`BlockKind::Custom`] blocks; returns acceptance.
    fn custom_step(
        &self,
        _state: &mut Self::State,
        block: Self::Block,
        _scale: f64,
        _rng: &mut ChainRng,
    ) -> bool {
        unimplemented!("block {block:?} declared custom without a custom_step")
    }

    fn monitor_names(&self) -> Vec<String>;
    fn monitor(&self, state: &Self::State, out: &mut Vec<f64>);
}

/// Proposal state for one block.
#[derive(Debug, Clone)]
struct Proposal {
    kind: BlockKind,
    log_scale: f64,
    batch_tries: usize,
    batch_accepts: usize,
    batches: usize,
    tries: usize,
    accepts: usize,
    chol: Option<DMatrix<f64>>,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    n: usize,
}

impl Proposal {
    fn new(kind: BlockKind, scale: f64) -> Self {
        let d = match kind {
            BlockKind::Joint(d) => d,
            _ => 0,
        };
        Self {
            kind,
            log_scale: scale.ln(),
            batch_tries: 0,
            batch_accepts: 0,
            batches: 0,
            tries: 0,
            accepts: 0,
            chol: None,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            n: 0,
        }
    }

    fn record(&mut self, accepted: bool) {
        self.tries += 1;
        self.batch_tries += 1;
        if accepted {
            self.accepts += 1;
            self.batch_accepts += 1;
        }
    }

    fn observe(&mut self, x: &[f64]) {
        if self.mean.is_empty() {
            return;
        }
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn reset_moments(&mut self) {
        self.mean.fill(0.0);
        self.m2.fill(0.0);
        self.n = 0;
    }

    /// Robbins-Monro step on the log scale; refreshes the joint covariance.
    fn adapt(&mut self, target_scalar: f64, target_block: f64) {
        if self.batch_tries == 0 {
            return;
        }
        let rate = self.batch_accepts as f64 / self.batch_tries as f64;
        let target = match self.kind {
            BlockKind::Joint(_) => target_block,
            _ => target_scalar,
        };
        let gain = (2.0 / ((self.batches + 1) as f64).sqrt()).min(1.0);
        self.log_scale = (self.log_scale + gain * (rate - target)).clamp(-30.0, 30.0);
        self.batches += 1;
        self.batch_tries = 0;
        self.batch_accepts = 0;

        if let BlockKind::Joint(d) = self.kind {
            if self.n >= (10 * d).max(50) {
                let mut cov = &self.m2 / (self.n - 1) as f64;
                let mean_var = cov.diagonal().mean().max(1e-300);
                for i in 0..d {
                    cov[(i, i)] += 1e-6 * mean_var + 1e-12;
                }
                cov *= 2.38 * 2.38 / d as f64;
                if let Some(ch) = cov.cholesky() {
                    if self.chol.is_none() {
                        self.log_scale = 0.0;
                    }
                    self.chol = Some(ch.l());
                }
            }
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

/// Per-chain summary of the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chain: usize,
    pub init_attempts: usize,
    /// `(block label, acceptance rate, final scale)` after burn-in.
    pub blocks: Vec<(String, f64, f64)>,
    /// Proposal scales at the end of burn-in; identical to the final ones
    /// because adaptation stops there.
    pub scales_at_burn_in: Vec<f64>,
}

/// Runs one chain; retained draws are the monitored values.
pub fn run_chain<T: Target>(
    target: &T,
    config: &McmcConfig,
    chain: usize,
) -> Result<(Vec<Vec<f64>>, ChainStats)> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let mut state = None;
    let mut attempts = 0;
    while attempts < config.max_init_attempts.max(1) {
        attempts += 1;
        let candidate = target.initial_state(chain, &mut rng);
        if target.log_density(&candidate).is_finite() {
            state = Some(candidate);
            break;
        }
    }
    let mut state = state.ok_or(Error::NonFiniteInit { chain, attempts })?;

    let blocks = target.blocks();
    let mut proposals: Vec<Proposal> = blocks
        .iter()
        .map(|&(b, kind)| Proposal::new(kind, target.initial_scale(b)))
        .collect();
    let mut current = Vec::new();
    let mut proposed = Vec::new();
    let mut saved = Vec::new();
    let mut draws = Vec::with_capacity(config.retained());
    let mut scales_at_burn_in = Vec::new();
    let mut row = Vec::new();

    for iter in 0..config.iterations {
        let adapting = iter < config.burn_in;
        if adapting && (iter == config.burn_in / 4 || iter == config.burn_in / 2) {
            for p in &mut proposals {
                p.reset_moments();
            }
        }
        for (&(block, kind), prop) in blocks.iter().zip(proposals.iter_mut()) {
            let accepted = match kind {
                BlockKind::Custom => target.custom_step(&mut state, block, prop.scale(), &mut rng),
                _ => {
                    target.get(&state, block, &mut current);
                    target.save(&state, block, &mut saved);
                    let lp0 = target.block_log_density(block, &state);
                    proposed.clear();
                    let s = prop.scale();
                    match (&prop.chol, kind) {
                        (Some(l), BlockKind::Joint(d)) => {
                            let z =
                                DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                            let step = l * z;
                            proposed
                                .extend(current.iter().zip(step.iter()).map(|(x, dx)| x + s * dx));
                        }
                        _ => proposed.extend(
                            current
                                .iter()
                                .map(|x| x + s * rng.sample::<f64, _>(StandardNormal)),
                        ),
                    }
                    target.set(&mut state, block, &proposed);
                    let lp1 = target.block_log_density(block, &state);
                    let accept = lp1.is_finite() && rng.random::<f64>().ln() < lp1 - lp0;
                    if !accept {
                        target.restore(&mut state, block, &saved);
                    }
                    accept
                }
            };
            if adapting {
                prop.record(accepted);
                if let BlockKind::Joint(_) = kind {
                    target.get(&state, block, &mut current);
                    prop.observe(&current);
                }
            } else {
                prop.record(accepted);
            }
        }
        if adapting && (iter + 1) % config.adapt_interval == 0 {
            for p in &mut proposals {
                p.adapt(config.target_accept_scalar, config.target_accept_block);
            }
        }
        if iter + 1 == config.burn_in {
            scales_at_burn_in = proposals.iter().map(Proposal::scale).collect();
            for p in &mut proposals {
                p.tries = 0;
                p.accepts = 0;
            }
        }
        if iter >= config.burn_in && (iter - config.burn_in + 1) % config.thin == 0 {
            target.monitor(&state, &mut row);
            draws.push(row.clone());
        }
    }

    let stats = ChainStats {
        chain,
        init_attempts: attempts,
        blocks: blocks
            .iter()
            .zip(&proposals)
            .map(|((b, _), p)| {
                (
                    format!("{b:?}"),
                    p.accepts as f64 / p.tries.max(1) as f64,
                    p.scale(),
                )
            })
            .collect(),
        scales_at_burn_in,
    };
    Ok((draws, stats))
}

/// Runs every chain (in parallel when enabled) and merges the draws.
pub fn run_chains<T: Target>(
    target: &T,
    config: &McmcConfig,
    mode: Execution,
) -> Result<(PosteriorDraws, Vec<ChainStats>)> {
    config.validate()?;
    let results = map_indexed(mode, config.chains, |c| run_chain(target, config, c));
    let mut chains = Vec::with_capacity(config.chains);
    let mut stats = Vec::with_capacity(config.chains);
    for r in results {
        let (d, s) = r?;
        chains.push(d);
        stats.push(s);
    }
    let iterations = (0..config.retained())
        .map(|i| config.burn_in + (i + 1) * config.thin - 1)
        .collect();
    Ok((
        PosteriorDraws::new(target.monitor_names(), chains, iterations),
        stats,
    ))
}
