use super::assemble::Model;
use super::observation::CountObservation;
use super::state::{BlockId, ModelState};
use crate::data::Area;
use crate::distributions::{bb_unchecked, clamp_nu, logistic, mixture_from_bb};
use crate::error::Result;
use crate::splines::SplineBlock;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
}

#[inline]
fn half_normal_lpdf(x: f64, sd: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::LN_2 + normal_lpdf(x, 0.0, sd)
}

/// `ln(1 + e^x)`.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Tier-level parameters of one observation: a relative mean and a log dispersion per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotParams {
    pub nu: Vec<f64>,
    pub log_phi: Vec<f64>,
}

impl Model {
    #[inline]
    fn row_for(&self, year: i32) -> Vec<f64> {
        match self.basis.year_index(year) {
            Some(t) => self.basis.row(t).to_vec(),
            None => self.basis.row_at(year),
        }
    }

    /// `nu = logistic(f(t))` for one relative-mean slot in a modelled area (0 urban, 1 rural).
    pub fn relative_mean(
        &self,
        state: &ModelState,
        slot: usize,
        area: usize,
        country: usize,
        year: i32,
    ) -> f64 {
        let row = self.row_for(year);
        clamp_nu(logistic(
            state.beta[Self::series(slot, area)][country].eval_row(&row),
        ))
    }

    /// `pi = logistic(logit P + g_c(t))`; `with_deviation = false` drops `g_c`.
    pub fn urban_weight(
        &self,
        state: &ModelState,
        country: usize,
        year: i32,
        with_deviation: bool,
    ) -> Result<f64> {
        let lp = self.logit_urban(country, year)?;
        let g = if with_deviation {
            state.kappa[country].eval_row(&self.row_for(year))
        } else {
            0.0
        };
        Ok(logistic(lp + g))
    }

    /// Node marginal means in a modelled area at a design row.
    pub fn area_means(
        &self,
        state: &ModelState,
        area: usize,
        country: usize,
        row: &[f64],
    ) -> Vec<f64> {
        let nu: Vec<f64> = (0..self.hierarchy.n_slots())
            .map(|s| {
                clamp_nu(logistic(
                    state.beta[Self::series(s, area)][country].eval_row(row),
                ))
            })
            .collect();
        let mut mu = vec![0.0; self.hierarchy.n_nodes()];
        self.hierarchy.node_means(&nu, &mut mu);
        mu
    }

    /// Node means of the whole population: `pi * mu_urban + (1 - pi) * mu_rural`.
    pub fn overall_means(
        &self,
        state: &ModelState,
        country: usize,
        year: i32,
        with_deviation: bool,
    ) -> Result<Vec<f64>> {
        let row = self.row_for(year);
        let pi = self.urban_weight(state, country, year, with_deviation)?;
        let u = self.area_means(state, 0, country, &row);
        let r = self.area_means(state, 1, country, &row);
        Ok(u.iter()
            .zip(&r)
            .map(|(a, b)| pi * a + (1.0 - pi) * b)
            .collect())
    }

    /// Slot parameters for an observation-like context.
    ///
    /// Overall records take relative means recovered from the mixed node
    /// means and log dispersions mixed with the same weight.
    pub fn slot_params(
        &self,
        state: &ModelState,
        area: Area,
        country: usize,
        row: &[f64],
        logit_p: f64,
        with_deviation: bool,
    ) -> SlotParams {
        let n_slots = self.hierarchy.n_slots();
        match area.modelled_index() {
            Some(j) => SlotParams {
                nu: (0..n_slots)
                    .map(|s| {
                        clamp_nu(logistic(
                            state.beta[Self::series(s, j)][country].eval_row(row),
                        ))
                    })
                    .collect(),
                log_phi: (0..n_slots)
                    .map(|s| state.log_phi[Self::series(s, j)][country])
                    .collect(),
            },
            None => {
                let g = if with_deviation {
                    state.kappa[country].eval_row(row)
                } else {
                    0.0
                };
                let pi = logistic(logit_p + g);
                let u = self.area_means(state, 0, country, row);
                let r = self.area_means(state, 1, country, row);
                let mu: Vec<f64> = u
                    .iter()
                    .zip(&r)
                    .map(|(a, b)| pi * a + (1.0 - pi) * b)
                    .collect();
                let mut nu = vec![0.0; n_slots];
                self.hierarchy.relative_means(&mu, &mut nu);
                let log_phi = (0..n_slots)
                    .map(|s| {
                        pi * state.log_phi[Self::series(s, 0)][country]
                            + (1.0 - pi) * state.log_phi[Self::series(s, 1)][country]
                    })
                    .collect();
                SlotParams { nu, log_phi }
            }
        }
    }

    fn observation_params(&self, state: &ModelState, o: &CountObservation) -> SlotParams {
        self.slot_params(
            state,
            o.area,
            o.country,
            self.basis.row(o.time),
            self.logit_p[o.country][o.time],
            true,
        )
    }

    /// Counts entering the conditional term of `slot`: `(v, n_remaining)`.
    #[inline]
    pub(crate) fn slot_counts(
        &self,
        o: &CountObservation,
        counts: &[u64],
        slot: usize,
    ) -> (u64, u64) {
        let tier = &self.hierarchy.tiers()[self.hierarchy.slot_tier(slot)];
        let pos = slot - tier.first_slot;
        let parent = tier.parent.map_or(o.total, |p| counts[p]);
        let before: u64 = tier.children[..pos].iter().map(|&c| counts[c]).sum();
        (counts[tier.children[pos]], parent - before)
    }

    #[inline]
    fn slot_term(
        &self,
        o: &CountObservation,
        counts: &[u64],
        slot: usize,
        nu: f64,
        log_phi: f64,
        rho: f64,
    ) -> f64 {
        let (v, n) = self.slot_counts(o, counts, slot);
        let phi = log_phi.exp();
        mixture_from_bb(bb_unchecked(v, n, nu * phi, (1.0 - nu) * phi), n, rho)
    }

    #[inline]
    fn slot_active(&self, o: &CountObservation, slot: usize) -> bool {
        o.active_tiers[self.hierarchy.slot_tier(slot)]
    }

    /// Log-likelihood of one observation under given node counts.
    pub fn observation_loglik_with(&self, state: &ModelState, index: usize, counts: &[u64]) -> f64 {
        let o = &self.observations[index];
        let rho = logistic(state.logit_rho[o.survey]);
        let p = self.observation_params(state, o);
        (0..self.hierarchy.n_slots())
            .filter(|&s| self.slot_active(o, s))
            .map(|s| self.slot_term(o, counts, s, p.nu[s], p.log_phi[s], rho))
            .sum()
    }

    /// Sum of Beta-Binomial/Uniform mixture terms over the active tiers.
    pub fn observation_loglik(&self, state: &ModelState, index: usize) -> f64 {
        self.observation_loglik_with(state, index, &state.counts[index])
    }

    pub fn loglik(&self, state: &ModelState) -> f64 {
        (0..self.observations.len())
            .map(|i| self.observation_loglik(state, i))
            .sum()
    }

    /// Likelihood terms touched by series `q` of `country`: the slot's own term
    /// in that area's records plus every overall record of the country.
    fn series_loglik(&self, state: &ModelState, q: usize, country: usize) -> f64 {
        let (slot, area) = (q / 2, q % 2);
        let area_enum = if area == 0 { Area::Urban } else { Area::Rural };
        let block = &state.beta[q][country];
        let log_phi = state.log_phi[q][country];
        let mut total = 0.0;
        for &i in self.observations_of(country, area_enum) {
            let o = &self.observations[i];
            if !self.slot_active(o, slot) {
                continue;
            }
            let nu = clamp_nu(logistic(block.eval_row(self.basis.row(o.time))));
            let rho = logistic(state.logit_rho[o.survey]);
            total += self.slot_term(o, &state.counts[i], slot, nu, log_phi, rho);
        }
        total + self.overall_loglik(state, country)
    }

    fn overall_loglik(&self, state: &ModelState, country: usize) -> f64 {
        self.observations_of(country, Area::Overall)
            .iter()
            .map(|&i| self.observation_loglik(state, i))
            .sum()
    }

    // ---- prior pieces ----

    fn mvn_nonlinear<'a>(&self, diff: impl Iterator<Item = f64> + 'a, log_lambda: f64) -> f64 {
        let w = self.basis.penalty_diag();
        let m = w.len() as f64;
        let quad: f64 = diff.zip(w).map(|(d, w)| w * d * d).sum();
        0.5 * (m * log_lambda + self.basis.log_det_penalty())
            - 0.5 * log_lambda.exp() * quad
            - 0.5 * m * LN_2PI
    }

    fn nested_prior(&self, child: &SplineBlock, parent: &SplineBlock, log_sigma: &[f64; 3]) -> f64 {
        normal_lpdf(child.intercept, parent.intercept, log_sigma[0].exp())
            + normal_lpdf(child.linear, parent.linear, log_sigma[1].exp())
            + self.mvn_nonlinear(
                child
                    .nonlinear
                    .iter()
                    .zip(&parent.nonlinear)
                    .map(|(a, b)| a - b),
                child.log_lambda,
            )
    }

    fn beta_prior(&self, s: &ModelState, q: usize, c: usize) -> f64 {
        let r = self.regions.region_of(c);
        self.nested_prior(&s.beta[q][c], &s.gamma[q][r], &s.hyper[q].log_sigma_beta)
    }

    fn beta_lambda_prior(&self, s: &ModelState, q: usize, c: usize) -> f64 {
        let h = &s.hyper[q];
        normal_lpdf(
            s.beta[q][c].log_lambda,
            h.upsilon_beta,
            h.log_sigma_beta[2].exp(),
        )
    }

    fn gamma_prior(&self, s: &ModelState, q: usize, r: usize) -> f64 {
        let sr = self.regions.super_of(r);
        self.nested_prior(&s.gamma[q][r], &s.theta[q][sr], &s.hyper[q].log_sigma_gamma)
    }

    fn gamma_lambda_prior(&self, s: &ModelState, q: usize, r: usize) -> f64 {
        let h = &s.hyper[q];
        normal_lpdf(
            s.gamma[q][r].log_lambda,
            h.upsilon_gamma,
            h.log_sigma_gamma[2].exp(),
        )
    }

    fn theta_prior(&self, s: &ModelState, q: usize, sr: usize) -> f64 {
        let t = &s.theta[q][sr];
        let sd = self.priors.fixed_effect_sd;
        normal_lpdf(t.intercept, 0.0, sd)
            + normal_lpdf(t.linear, 0.0, sd)
            + self.mvn_nonlinear(t.nonlinear.iter().copied(), t.log_lambda)
    }

    fn theta_lambda_prior(&self, s: &ModelState, q: usize, sr: usize) -> f64 {
        normal_lpdf(s.theta[q][sr].log_lambda, 0.0, self.priors.fixed_effect_sd)
    }

    fn phi_prior(&self, s: &ModelState, q: usize, c: usize) -> f64 {
        let h = &s.hyper[q];
        normal_lpdf(s.log_phi[q][c], h.upsilon_phi, h.log_sigma_phi.exp())
    }

    fn kappa_prior(&self, s: &ModelState, c: usize) -> f64 {
        let k = &s.kappa[c];
        let ls = &s.urban_hyper.log_sigma;
        normal_lpdf(k.intercept, 0.0, ls[0].exp())
            + normal_lpdf(k.linear, 0.0, ls[1].exp())
            + self.mvn_nonlinear(k.nonlinear.iter().copied(), k.log_lambda)
    }

    fn kappa_lambda_prior(&self, s: &ModelState, c: usize) -> f64 {
        normal_lpdf(
            s.kappa[c].log_lambda,
            s.urban_hyper.upsilon,
            s.urban_hyper.log_sigma[2].exp(),
        )
    }

    fn rho_prior(&self, s: &ModelState, u: usize) -> f64 {
        let (a, b) = (self.priors.rho_alpha, self.priors.rho_beta);
        let x = s.logit_rho[u];
        let (ln_rho, ln_rest) = (-softplus(-x), -softplus(x));
        (a - 1.0) * ln_rho + (b - 1.0) * ln_rest - crate::distributions::ln_beta(a, b)
    }

    fn rho_jacobian(&self, s: &ModelState, u: usize) -> f64 {
        let x = s.logit_rho[u];
        -softplus(-x) - softplus(x)
    }

    fn upsilon_prior(&self, v: f64) -> f64 {
        normal_lpdf(v, 0.0, self.priors.fixed_effect_sd)
    }

    fn sigma_prior(&self, log_sigma: f64) -> f64 {
        half_normal_lpdf(log_sigma.exp(), self.priors.sigma_sd)
    }

    /// Log prior density on the natural scale of every parameter
    /// (sigma and rho themselves, log phi and log lambda).
    pub fn log_prior(&self, s: &ModelState) -> f64 {
        let (nq, nc) = (self.n_series(), self.regions.n_countries());
        let (nr, ns) = (self.regions.n_regions(), self.regions.n_super_regions());
        let mut lp = 0.0;
        for q in 0..nq {
            for c in 0..nc {
                lp += self.beta_prior(s, q, c)
                    + self.beta_lambda_prior(s, q, c)
                    + self.phi_prior(s, q, c);
            }
            for r in 0..nr {
                lp += self.gamma_prior(s, q, r) + self.gamma_lambda_prior(s, q, r);
            }
            for sr in 0..ns {
                lp += self.theta_prior(s, q, sr) + self.theta_lambda_prior(s, q, sr);
            }
            let h = &s.hyper[q];
            lp += self.upsilon_prior(h.upsilon_beta)
                + self.upsilon_prior(h.upsilon_gamma)
                + self.upsilon_prior(h.upsilon_phi);
            lp += h
                .log_sigma_beta
                .iter()
                .chain(&h.log_sigma_gamma)
                .map(|&l| self.sigma_prior(l))
                .sum::<f64>();
            lp += self.sigma_prior(h.log_sigma_phi);
        }
        for c in 0..nc {
            lp += self.kappa_prior(s, c) + self.kappa_lambda_prior(s, c);
        }
        lp += self.upsilon_prior(s.urban_hyper.upsilon);
        lp += s
            .urban_hyper
            .log_sigma
            .iter()
            .map(|&l| self.sigma_prior(l))
            .sum::<f64>();
        lp += (0..self.survey_ids.len())
            .map(|u| self.rho_prior(s, u))
            .sum::<f64>();
        lp
    }

    /// Log Jacobian of the map from stored (log sigma, logit rho) to natural scale.
    pub fn log_jacobian(&self, s: &ModelState) -> f64 {
        let mut lj: f64 = s
            .hyper
            .iter()
            .map(|h| {
                h.log_sigma_beta
                    .iter()
                    .chain(&h.log_sigma_gamma)
                    .sum::<f64>()
                    + h.log_sigma_phi
            })
            .sum();
        lj += s.urban_hyper.log_sigma.iter().sum::<f64>();
        lj += (0..self.survey_ids.len())
            .map(|u| self.rho_jacobian(s, u))
            .sum::<f64>();
        lj
    }

    /// Target density of the sampler on the stored (unconstrained) scale.
    pub fn log_posterior(&self, s: &ModelState) -> f64 {
        self.log_prior(s) + self.log_jacobian(s) + self.loglik(s)
    }

    /// Checked version of [`Model::block_log_density`].
    pub fn log_posterior_block(&self, block: BlockId, s: &ModelState) -> Result<f64> {
        self.validate_block(block)?;
        Ok(self.block_log_density(block, s))
    }

    /// Every term of [`Model::log_posterior`] that depends on `block` in sampler
    /// coordinates, plus [`Model::coordinate_log_jacobian`] for scale blocks.
    /// Region and super-region moves carry their nested curves, so their terms
    /// include the children's priors and likelihoods.
    pub fn block_log_density(&self, block: BlockId, s: &ModelState) -> f64 {
        match block {
            BlockId::BetaScale { q, c } => {
                self.beta_prior(s, q, c)
                    + self.beta_lambda_prior(s, q, c)
                    + self.series_loglik(s, q, c)
                    + self.coordinate_log_jacobian(block, s)
            }
            BlockId::GammaScale { q, r } => {
                self.gamma_prior(s, q, r)
                    + self.gamma_lambda_prior(s, q, r)
                    + self
                        .regions
                        .countries_in(r)
                        .map(|c| self.beta_prior(s, q, c))
                        .sum::<f64>()
                    + self.coordinate_log_jacobian(block, s)
            }
            BlockId::ThetaScale { q, s: sr } => {
                self.theta_prior(s, q, sr)
                    + self.theta_lambda_prior(s, q, sr)
                    + self
                        .regions
                        .regions_in(sr)
                        .map(|r| self.gamma_prior(s, q, r))
                        .sum::<f64>()
                    + self.coordinate_log_jacobian(block, s)
            }
            BlockId::KappaScale { c } => {
                self.kappa_prior(s, c)
                    + self.kappa_lambda_prior(s, c)
                    + self.overall_loglik(s, c)
                    + self.coordinate_log_jacobian(block, s)
            }
            BlockId::Beta { q, c } => self.beta_prior(s, q, c) + self.series_loglik(s, q, c),
            BlockId::BetaLambda { q, c } => {
                self.beta_prior(s, q, c) + self.beta_lambda_prior(s, q, c)
            }
            BlockId::LogPhi { q, c } => self.phi_prior(s, q, c) + self.series_loglik(s, q, c),
            BlockId::Gamma { q, r } => {
                self.gamma_prior(s, q, r)
                    + self
                        .regions
                        .countries_in(r)
                        .map(|c| self.beta_prior(s, q, c) + self.series_loglik(s, q, c))
                        .sum::<f64>()
            }
            BlockId::GammaLambda { q, r } => {
                self.gamma_prior(s, q, r) + self.gamma_lambda_prior(s, q, r)
            }
            BlockId::Theta { q, s: sr } => {
                self.theta_prior(s, q, sr)
                    + self
                        .regions
                        .regions_in(sr)
                        .map(|r| self.block_log_density(BlockId::Gamma { q, r }, s))
                        .sum::<f64>()
            }
            BlockId::ThetaLambda { q, s: sr } => {
                self.theta_prior(s, q, sr) + self.theta_lambda_prior(s, q, sr)
            }
            BlockId::Kappa { c } => self.kappa_prior(s, c) + self.overall_loglik(s, c),
            BlockId::KappaLambda { c } => self.kappa_prior(s, c) + self.kappa_lambda_prior(s, c),
            BlockId::Rho { survey } => {
                self.rho_prior(s, survey)
                    + self.rho_jacobian(s, survey)
                    + self.by_survey[survey]
                        .iter()
                        .map(|&i| self.observation_loglik(s, i))
                        .sum::<f64>()
            }
            BlockId::UpsilonBeta { q } => {
                self.upsilon_prior(s.hyper[q].upsilon_beta)
                    + (0..self.regions.n_countries())
                        .map(|c| self.beta_lambda_prior(s, q, c))
                        .sum::<f64>()
            }
            BlockId::SigmaBeta { q, m } => {
                let l = s.hyper[q].log_sigma_beta[m];
                self.sigma_prior(l)
                    + l
                    + (0..self.regions.n_countries())
                        .map(|c| self.beta_prior(s, q, c) + self.beta_lambda_prior(s, q, c))
                        .sum::<f64>()
            }
            BlockId::UpsilonGamma { q } => {
                self.upsilon_prior(s.hyper[q].upsilon_gamma)
                    + (0..self.regions.n_regions())
                        .map(|r| self.gamma_lambda_prior(s, q, r))
                        .sum::<f64>()
            }
            BlockId::SigmaGamma { q, m } => {
                let l = s.hyper[q].log_sigma_gamma[m];
                self.sigma_prior(l)
                    + l
                    + (0..self.regions.n_regions())
                        .map(|r| self.gamma_prior(s, q, r) + self.gamma_lambda_prior(s, q, r))
                        .sum::<f64>()
            }
            BlockId::UpsilonPhi { q } => {
                self.upsilon_prior(s.hyper[q].upsilon_phi)
                    + (0..self.regions.n_countries())
                        .map(|c| self.phi_prior(s, q, c))
                        .sum::<f64>()
            }
            BlockId::SigmaPhi { q } => {
                let l = s.hyper[q].log_sigma_phi;
                self.sigma_prior(l)
                    + l
                    + (0..self.regions.n_countries())
                        .map(|c| self.phi_prior(s, q, c))
                        .sum::<f64>()
            }
            BlockId::UpsilonKappa => {
                self.upsilon_prior(s.urban_hyper.upsilon)
                    + (0..self.regions.n_countries())
                        .map(|c| self.kappa_lambda_prior(s, c))
                        .sum::<f64>()
            }
            BlockId::SigmaKappa { m } => {
                let l = s.urban_hyper.log_sigma[m];
                self.sigma_prior(l)
                    + l
                    + (0..self.regions.n_countries())
                        .map(|c| self.kappa_prior(s, c) + self.kappa_lambda_prior(s, c))
                        .sum::<f64>()
            }
            BlockId::Counts { obs, .. } => self.observation_loglik(s, obs),
        }
    }
}
