//! Artificial-sample-size experiment.
//!
//! Constant-mean GDM panels are fitted twice: once on the true counts
//! (baseline) and once on `floor(N x)` counts for each `N` of a grid. Under a
//! Dirichlet(1) prior on the means and independent Exponential priors on the
//! dispersions, the posterior factorises into independent `(nu_i, phi_i)`
//! pairs, one per relative mean, so each pair is sampled on its own.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::synth::{Panel, PanelSpec};
use crate::data::to_counts;
use crate::distributions::{bb_unchecked, logistic, logit};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::{quantiles, run_chain, BlockKind, ChainRng, McmcConfig, Target};

pub const DEFAULT_N_GRID: [u64; 11] = [
    10, 20, 30, 50, 100, 300, 1_000, 3_000, 10_000, 30_000, 100_000,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSizeConfig {
    pub panel: PanelSpec,
    pub n_grid: Vec<u64>,
    /// `N` at which posterior quantiles are compared with the baseline.
    pub quantile_n: u64,
    /// Rate of the Exponential prior on each dispersion.
    pub phi_prior_rate: f64,
    pub mcmc: McmcConfig,
}

impl Default for SampleSizeConfig {
    fn default() -> Self {
        Self {
            panel: PanelSpec::default(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            quantile_n: 10_000,
            phi_prior_rate: 0.001,
            mcmc: McmcConfig {
                chains: 2,
                iterations: 6_000,
                burn_in: 2_000,
                thin: 2,
                ..McmcConfig::desk()
            },
        }
    }
}

/// Posterior of one `(nu, phi)` pair: `nu ~ Beta(1, b)`, `phi ~ Exponential(rate)`,
/// Beta-Binomial counts `(v, n)`. State is `(logit nu, log phi)`.
struct PairTarget {
    data: Vec<(u64, u64)>,
    b: f64,
    rate: f64,
}

impl Target for PairTarget {
    type State = [f64; 2];
    type Block = ();

    fn blocks(&self) -> Vec<((), BlockKind)> {
        vec![((), BlockKind::Joint(2))]
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> [f64; 2] {
        let (v, n) = self
            .data
            .iter()
            .fold((0u64, 0u64), |acc, d| (acc.0 + d.0, acc.1 + d.1));
        let p = (v as f64 + 0.5) / (n as f64 + 1.0);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        [logit(p) + 0.2 * z1, 30f64.ln() + 0.5 * z2]
    }

    fn log_density(&self, x: &[f64; 2]) -> f64 {
        let nu = logistic(x[0]);
        let phi = x[1].exp();
        if !(nu > 0.0 && nu < 1.0 && phi.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (nu * phi, (1.0 - nu) * phi);
        let loglik: f64 = self
            .data
            .iter()
            .map(|&(v, n)| bb_unchecked(v, n, a, b))
            .sum();
        // priors plus the Jacobians of the logit and log maps
        let ln_rest = (1.0 - nu).ln();
        loglik + (self.b - 1.0) * ln_rest + nu.ln() + ln_rest - self.rate * phi + x[1]
    }

    fn block_log_density(&self, _: (), x: &[f64; 2]) -> f64 {
        self.log_density(x)
    }

    fn get(&self, x: &[f64; 2], _: (), out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
    }

    fn set(&self, x: &mut [f64; 2], _: (), values: &[f64]) {
        x.copy_from_slice(values);
    }

    fn initial_scale(&self, _: ()) -> f64 {
        0.3
    }

    fn monitor_names(&self) -> Vec<String> {
        vec!["nu".into()]
    }

    fn monitor(&self, x: &[f64; 2], out: &mut Vec<f64>) {
        out.clear();
        out.push(logistic(x[0]));
    }
}

/// Posterior summary of one country's mean vector under one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySummary {
    pub country: usize,
    /// Mean over draws of `sum_j (mu_j - mu_true_j)^2`.
    pub mse: f64,
    pub sd: Vec<f64>,
    /// 2.5%, 50% and 97.5% quantiles per component.
    pub quantiles: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeReport {
    pub baseline: Vec<CountrySummary>,
    /// `(N, per-country summaries)` in grid order.
    pub approximate: Vec<(u64, Vec<CountrySummary>)>,
}

/// Which counts a fit sees.
#[derive(Debug, Clone, Copy)]
enum Variant {
    Baseline,
    Artificial(u64),
}

fn slot_data(panel: &Panel, country: usize, k: usize, variant: Variant) -> Vec<Vec<(u64, u64)>> {
    let mut per_slot = vec![Vec::new(); k - 1];
    for s in panel.surveys.iter().filter(|s| s.country == country) {
        let (counts, total) = match variant {
            Variant::Baseline => (s.counts.clone(), s.n),
            Variant::Artificial(n) => {
                let x: Vec<f64> = s.counts.iter().map(|&c| c as f64 / s.n as f64).collect();
                (to_counts(&x, n).counts().to_vec(), n)
            }
        };
        let mut remaining = total;
        for (i, slot) in per_slot.iter_mut().enumerate() {
            slot.push((counts[i], remaining));
            remaining -= counts[i];
        }
    }
    per_slot
}

fn fit_country(
    panel: &Panel,
    country: usize,
    variant: Variant,
    config: &SampleSizeConfig,
) -> Result<CountrySummary> {
    let k = config.panel.categories;
    let truth = &panel.countries[country].mu;
    let mut nu_draws: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
    for (i, data) in slot_data(panel, country, k, variant)
        .into_iter()
        .enumerate()
    {
        let target = PairTarget {
            data,
            b: (k - 1 - i) as f64,
            rate: config.phi_prior_rate,
        };
        // the same streams for every variant, so differences between N are
        // not masked by Monte Carlo noise
        let mcmc = McmcConfig {
            seed: config.mcmc.seed
                ^ ((country as u64) << 16 | i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..config.mcmc.clone()
        };
        let mut pooled = Vec::new();
        for chain in 0..mcmc.chains {
            let (draws, _) = run_chain(&target, &mcmc, chain)?;
            pooled.extend(draws.into_iter().map(|d| d[0]));
        }
        nu_draws.push(pooled);
    }
    let n_draws = nu_draws[0].len();
    let mut mu = vec![Vec::with_capacity(n_draws); k];
    let mut mse = 0.0;
    for d in 0..n_draws {
        let mut tail = 1.0;
        let mut err = 0.0;
        for (j, m) in mu.iter_mut().enumerate() {
            let value = if j + 1 < k {
                let v = tail * nu_draws[j][d];
                tail -= v;
                v
            } else {
                tail
            };
            err += (value - truth[j]).powi(2);
            m.push(value);
        }
        mse += err;
    }
    mse /= n_draws as f64;
    let mut sd = Vec::with_capacity(k);
    let mut qs = Vec::with_capacity(k);
    for m in &mu {
        let mean = m.iter().sum::<f64>() / n_draws as f64;
        sd.push(
            (m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_draws as f64 - 1.0)).sqrt(),
        );
        let q = quantiles(m, &[0.025, 0.5, 0.975])?;
        qs.push([q[0], q[1], q[2]]);
    }
    Ok(CountrySummary {
        country,
        mse,
        sd,
        quantiles: qs,
    })
}

/// Fits the baseline and every grid value; fits run in parallel across
/// `(variant, country)` pairs.
pub fn run_sample_size_experiment(
    panel: &Panel,
    config: &SampleSizeConfig,
    mode: Execution,
) -> Result<SampleSizeReport> {
    config.mcmc.validate()?;
    if config.n_grid.is_empty() {
        return Err(Error::Config("the N grid is empty".into()));
    }
    if config.panel.categories < 2 {
        return Err(Error::Config(
            "the panel needs at least two categories".into(),
        ));
    }
    let nc = panel.countries.len();
    let variants: Vec<Variant> = std::iter::once(Variant::Baseline)
        .chain(config.n_grid.iter().map(|&n| Variant::Artificial(n)))
        .collect();
    let fits = map_indexed(mode, variants.len() * nc, |i| {
        fit_country(panel, i % nc, variants[i / nc], config)
    });
    let mut fits = fits.into_iter();
    let mut take = || -> Result<Vec<CountrySummary>> { fits.by_ref().take(nc).collect() };
    let baseline = take()?;
    let mut approximate = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        approximate.push((n, take()?));
    }
    Ok(SampleSizeReport {
        baseline,
        approximate,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

impl SampleSizeReport {
    pub fn at(&self, n: u64) -> Option<&[CountrySummary]> {
        self.approximate
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, s)| s.as_slice())
    }

    /// Median over countries and components of `|sd_N - sd_baseline|`.
    pub fn sd_discrepancy(&self, n: u64) -> Option<f64> {
        let approx = self.at(n)?;
        let diffs = approx
            .iter()
            .zip(&self.baseline)
            .flat_map(|(a, b)| a.sd.iter().zip(&b.sd).map(|(x, y)| (x - y).abs()))
            .collect();
        Some(median(diffs))
    }

    /// Median over countries of `|mse_N - mse_baseline|`.
    pub fn mse_discrepancy(&self, n: u64) -> Option<f64> {
        let approx = self.at(n)?;
        Some(median(
            approx
                .iter()
                .zip(&self.baseline)
                .map(|(a, b)| (a.mse - b.mse).abs())
                .collect(),
        ))
    }

    /// Correlation with the baseline of the 2.5%, 50% and 97.5% quantiles, over all
    /// countries and components.
    pub fn quantile_correlation(&self, n: u64) -> Option<[f64; 3]> {
        let approx = self.at(n)?;
        let mut out = [0.0; 3];
        for (l, r) in out.iter_mut().enumerate() {
            let (x, y): (Vec<f64>, Vec<f64>) = approx
                .iter()
                .zip(&self.baseline)
                .flat_map(|(a, b)| {
                    a.quantiles
                        .iter()
                        .zip(&b.quantiles)
                        .map(move |(qa, qb)| (qb[l], qa[l]))
                })
                .unzip();
            *r = correlation(&x, &y);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synthesize_panel, synthetic_sample_sizes};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (Panel, SampleSizeConfig) {
        let config = SampleSizeConfig {
            panel: PanelSpec {
                countries: 6,
                sample_sizes: 18,
                ..PanelSpec::default()
            },
            n_grid: vec![10, 100_000],
            quantile_n: 100_000,
            mcmc: McmcConfig {
                chains: 2,
                iterations: 3_000,
                burn_in: 1_000,
                thin: 2,
                ..McmcConfig::desk()
            },
            ..SampleSizeConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sizes = synthetic_sample_sizes(&config.panel, &mut rng);
        (synthesize_panel(&config.panel, &sizes, &mut rng), config)
    }

    #[test]
    fn large_n_tracks_the_baseline_and_modes_agree() {
        let (panel, config) = small();
        let a = run_sample_size_experiment(&panel, &config, Execution::Parallel).unwrap();
        let b = run_sample_size_experiment(&panel, &config, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.sd_discrepancy(100_000).unwrap() < a.sd_discrepancy(10).unwrap());
        let r = a.quantile_correlation(100_000).unwrap();
        assert!(r.iter().all(|&x| x > 0.95), "{r:?}");
        for s in &a.baseline {
            assert!(s.quantiles.iter().all(|q| q[0] <= q[1] && q[1] <= q[2]));
        }
    }

    #[test]
    fn slot_data_uses_remaining_totals() {
        let (panel, config) = small();
        let k = config.panel.categories;
        let c = panel.surveys[0].country;
        let data = slot_data(&panel, c, k, Variant::Artificial(1_000));
        for (slot, obs) in data.iter().enumerate() {
            for &(v, n) in obs {
                assert!(v <= n);
                if slot == 0 {
                    assert_eq!(n, 1_000);
                }
            }
        }
    }

    #[test]
    fn correlation_oracle() {
        assert!(
            (correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.997_948_715_788_673_3).abs()
                < 1e-12
        );
    }
}
