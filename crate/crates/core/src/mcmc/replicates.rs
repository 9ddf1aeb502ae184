//! Posterior-predictive replicates of observed records.

use rand::Rng;

use super::draws::PosteriorDraws;
use super::engine::chain_rng;
use crate::distributions::sample_beta_binomial;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{FuelHierarchy, Model, ModelState, SlotParams};

/// Node counts of one tiered Beta-Binomial draw.
pub fn sample_tree<R: Rng + ?Sized>(
    hierarchy: &FuelHierarchy,
    params: &SlotParams,
    n: u64,
    rng: &mut R,
) -> Vec<u64> {
    let mut counts = vec![0u64; hierarchy.n_nodes()];
    for tier in hierarchy.tiers() {
        let mut remaining = tier.parent.map_or(n, |p| counts[p]);
        let last = tier.children.len() - 1;
        for (pos, &child) in tier.children.iter().enumerate() {
            let v = if pos == last {
                remaining
            } else {
                let s = tier.first_slot + pos;
                let (nu, phi) = (params.nu[s], params.log_phi[s].exp());
                sample_beta_binomial(
                    (nu * phi).max(1e-300),
                    ((1.0 - nu) * phi).max(1e-300),
                    remaining,
                    rng,
                )
            };
            counts[child] = v;
            remaining -= v;
        }
    }
    counts
}

/// Replicate node proportions of observation `obs` under `state`.
pub fn replicate_observation<R: Rng + ?Sized>(
    model: &Model,
    state: &ModelState,
    obs: usize,
    rng: &mut R,
) -> Vec<f64> {
    let o = &model.observations[obs];
    let params = model.slot_params(
        state,
        o.area,
        o.country,
        model.basis.row(o.time),
        model.logit_p[o.country][o.time],
        true,
    );
    let counts = sample_tree(&model.hierarchy, &params, o.total, rng);
    counts.iter().map(|&v| v as f64 / o.total as f64).collect()
}

/// Evenly spaced subset of at most `max` pooled draw positions.
pub fn draw_subset(draws: &PosteriorDraws, max: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..draws.n_chains())
        .flat_map(|c| (0..draws.n_draws()).map(move |d| (c, d)))
        .collect();
    if all.len() <= max || max == 0 {
        return all;
    }
    (0..max).map(|i| all[i * all.len() / max]).collect()
}

/// Replicates per observation: `[obs][draw][node]` proportions.
///
/// Each observation uses its own RNG stream, so results do not depend on
/// the execution mode.
pub fn posterior_replicates(
    model: &Model,
    draws: &PosteriorDraws,
    template: &ModelState,
    max_draws: usize,
    seed: u64,
    mode: Execution,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if draws.n_draws() == 0 || draws.n_chains() == 0 {
        return Err(Error::EmptyInput("no posterior draws".into()));
    }
    let states = draw_subset(draws, max_draws)
        .into_iter()
        .map(|(c, d)| model.state_from_monitored(template, draws.draw(c, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(map_indexed(mode, model.observations.len(), |i| {
        let mut rng = chain_rng(seed, i);
        states
            .iter()
            .map(|s| replicate_observation(model, s, i, &mut rng))
            .collect()
    }))
}
