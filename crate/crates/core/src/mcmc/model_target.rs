//! The fuel model as a sampler target.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::engine::{BlockKind, ChainRng, Target};
use crate::data::Area;
use crate::distributions::logistic;
use crate::error::{Error, Result};
use crate::model::{transfer, BlockId, Model, ModelState};

fn area_name(area: usize) -> &'static str {
    if area == 0 {
        "urban"
    } else {
        "rural"
    }
}

impl Model {
    /// Address prefix of series `q` in `country`, e.g. `solid/urban/C01`.
    pub fn series_address(&self, q: usize, country: usize) -> String {
        format!(
            "{}/{}/{}",
            self.hierarchy.slot_name(q / 2),
            area_name(q % 2),
            self.regions.countries()[country]
        )
    }

    /// Names of the monitored parameters, in [`Target::monitor`] order.
    ///
    /// Only what prediction needs is kept: trend coefficients and smoothing
    /// parameters, log dispersions, urban-weight deviations and `rho`.
    pub fn monitored_names(&self) -> Vec<String> {
        let k = self.basis.k();
        let coef_names = |prefix: &str| -> Vec<String> {
            let mut v: Vec<String> = (0..=k).map(|j| format!("{prefix}/b{j}")).collect();
            v.push(format!("{prefix}/log_lambda"));
            v
        };
        let mut names = Vec::new();
        for q in 0..self.n_series() {
            for c in 0..self.regions.n_countries() {
                names.extend(coef_names(&format!("beta/{}", self.series_address(q, c))));
            }
        }
        for q in 0..self.n_series() {
            for c in 0..self.regions.n_countries() {
                names.push(format!("log_phi/{}", self.series_address(q, c)));
            }
        }
        for country in self.regions.countries() {
            names.extend(coef_names(&format!("kappa/{country}")));
        }
        names.extend(self.survey_ids.iter().map(|s| format!("rho/{s}")));
        names
    }

    pub fn write_monitored(&self, state: &ModelState, out: &mut Vec<f64>) {
        out.clear();
        for row in &state.beta {
            for b in row {
                b.write_coefficients(out);
                out.push(b.log_lambda);
            }
        }
        for row in &state.log_phi {
            out.extend_from_slice(row);
        }
        for b in &state.kappa {
            b.write_coefficients(out);
            out.push(b.log_lambda);
        }
        out.extend(state.logit_rho.iter().map(|&x| logistic(x)));
    }

    /// A state carrying one monitored draw; unmonitored parts come from `template`.
    pub fn state_from_monitored(
        &self,
        template: &ModelState,
        values: &[f64],
    ) -> Result<ModelState> {
        let k = self.basis.k();
        let (nq, nc, nu) = (
            self.n_series(),
            self.regions.n_countries(),
            self.survey_ids.len(),
        );
        let expected = (nq * nc + nc) * (k + 2) + nq * nc + nu;
        if values.len() != expected {
            return Err(Error::Config(format!(
                "draw has {} values, the model monitors {expected}",
                values.len()
            )));
        }
        let mut s = template.clone();
        let mut pos = 0;
        let mut take = |n: usize| -> Vec<f64> {
            pos += n;
            values[pos - n..pos].to_vec()
        };
        for q in 0..nq {
            for c in 0..nc {
                let v = take(k + 2);
                s.beta[q][c].set_coefficients(&v[..k + 1]);
                s.beta[q][c].log_lambda = v[k + 1];
            }
        }
        for q in 0..nq {
            s.log_phi[q] = take(nc);
        }
        for c in 0..nc {
            let v = take(k + 2);
            s.kappa[c].set_coefficients(&v[..k + 1]);
            s.kappa[c].log_lambda = v[k + 1];
        }
        s.logit_rho = take(nu)
            .into_iter()
            .map(crate::distributions::logit)
            .collect();
        Ok(s)
    }

    /// One imputation move for a latent group: transfer `m = 1 + Geometric`
    /// counts between two random members, accepted on the observation likelihood.
    pub fn impute_step(
        &self,
        state: &mut ModelState,
        obs: usize,
        group: usize,
        scale: f64,
        rng: &mut ChainRng,
    ) -> bool {
        let g = &self.observations[obs].groups[group];
        let n = g.leaves.len();
        if n < 2 || g.total == 0 {
            return false;
        }
        let i = rng.random_range(0..n);
        let j = (i + 1 + rng.random_range(0..n - 1)) % n;
        let (from, to) = (g.leaves[i], g.leaves[j]);
        let p = (1.0 / (1.0 + scale)).clamp(1e-12, 1.0);
        let m = 1 + Geometric::new(p).expect("probability in (0,1]").sample(rng);
        if state.counts[obs][from] < m {
            return false;
        }
        let before = self.observation_loglik(state, obs);
        let mut proposal = state.counts[obs].clone();
        transfer(&mut proposal, &self.hierarchy, from, to, m, g.anchor);
        let after = self.observation_loglik_with(state, obs, &proposal);
        if after.is_finite() && rng.random::<f64>().ln() < after - before {
            state.counts[obs] = proposal;
            true
        } else {
            false
        }
    }

    /// Relative mean of series `q` in `country` at basis row `t`.
    pub fn nu_at(&self, state: &ModelState, q: usize, country: usize, t: usize) -> f64 {
        self.relative_mean(state, q / 2, q % 2, country, self.basis.years()[t])
    }

    /// Area of series `q`.
    pub fn series_area(q: usize) -> Area {
        if q % 2 == 0 {
            Area::Urban
        } else {
            Area::Rural
        }
    }
}

impl Target for Model {
    type State = ModelState;
    type Block = BlockId;

    fn blocks(&self) -> Vec<(BlockId, BlockKind)> {
        let d = self.basis.k() + 1;
        Model::blocks(self)
            .into_iter()
            .map(|b| {
                let kind = if b.is_counts() {
                    BlockKind::Custom
                } else if b.is_spline() {
                    BlockKind::Joint(d)
                } else {
                    BlockKind::Scalar
                };
                (b, kind)
            })
            .collect()
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> ModelState {
        Model::initial_state(self, rng)
    }

    fn log_density(&self, state: &ModelState) -> f64 {
        self.log_posterior(state)
    }

    fn block_log_density(&self, block: BlockId, state: &ModelState) -> f64 {
        Model::block_log_density(self, block, state)
    }

    fn get(&self, state: &ModelState, block: BlockId, out: &mut Vec<f64>) {
        self.get_coordinates(state, block, out);
    }

    fn set(&self, state: &mut ModelState, block: BlockId, values: &[f64]) {
        self.set_coordinates(state, block, values);
    }

    fn save(&self, state: &ModelState, block: BlockId, out: &mut Vec<f64>) {
        self.save_raw(state, block, out);
    }

    fn restore(&self, state: &mut ModelState, block: BlockId, saved: &[f64]) {
        self.restore_raw(state, block, saved);
    }

    fn initial_scale(&self, block: BlockId) -> f64 {
        match block {
            BlockId::Counts { obs, group } => {
                (self.observations[obs].groups[group].total as f64 / 100.0).max(1.0)
            }
            b if b.is_spline() => 0.05,
            b if b.is_scale() => 0.5,
            BlockId::LogPhi { .. } => 0.1,
            _ => 0.3,
        }
    }

    fn custom_step(
        &self,
        state: &mut ModelState,
        block: BlockId,
        scale: f64,
        rng: &mut ChainRng,
    ) -> bool {
        match block {
            BlockId::Counts { obs, group } => self.impute_step(state, obs, group, scale, rng),
            other => unreachable!("{other:?} has no custom move"),
        }
    }

    fn monitor_names(&self) -> Vec<String> {
        self.monitored_names()
    }

    fn monitor(&self, state: &ModelState, out: &mut Vec<f64>) {
        self.write_monitored(state, out);
    }
}
