use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::observation::CountObservation;
use super::state::{BlockId, ModelState, Priors, SeriesHyper, UrbanHyper};
use super::{FuelHierarchy, RegionMap};
use crate::data::{node_counts, Area, SurveyObservation, UnUrbanSeries};
use crate::distributions::logit;
use crate::error::{Error, Result};
use crate::splines::{SplineBasis, SplineBlock};

/// Static part of the model: structure, data in count form and offsets.
#[derive(Debug, Clone)]
pub struct Model {
    pub hierarchy: FuelHierarchy,
    pub regions: RegionMap,
    pub basis: SplineBasis,
    pub priors: Priors,
    pub n_total: u64,
    pub observations: Vec<CountObservation>,
    pub survey_ids: Vec<String>,
    pub urban: UnUrbanSeries,
    /// `logit P` per country and basis year.
    pub(crate) logit_p: Vec<Vec<f64>>,
    /// Observation indices per country and area (urban, rural, overall).
    pub(crate) by_country_area: Vec<[Vec<usize>; 3]>,
    pub(crate) by_survey: Vec<Vec<usize>>,
}

fn area_slot(area: Area) -> usize {
    match area {
        Area::Urban => 0,
        Area::Rural => 1,
        Area::Overall => 2,
    }
}

impl Model {
    /// Converts kept survey records to counts and indexes them.
    ///
    /// Every record must fall inside the basis years and name a country of
    /// the region map; every mapped country needs an urban series.
    pub fn assemble(
        hierarchy: FuelHierarchy,
        regions: RegionMap,
        basis: SplineBasis,
        surveys: &[SurveyObservation],
        urban: UnUrbanSeries,
        n_total: u64,
        priors: Priors,
    ) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::Config(
                "artificial sample size must be positive".into(),
            ));
        }
        urban.require(regions.countries().iter().map(String::as_str))?;
        let logit_p = regions
            .countries()
            .iter()
            .map(|c| {
                basis
                    .years()
                    .iter()
                    .map(|&y| urban.get(c, y).map(logit))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let mut survey_ids: Vec<String> = Vec::new();
        let mut observations = Vec::with_capacity(surveys.len());
        for (i, rec) in surveys.iter().enumerate() {
            let country = regions
                .country_index(&rec.country)
                .ok_or_else(|| Error::UnknownCountry(rec.country.clone()))?;
            let time = basis.year_index(rec.year).ok_or_else(|| {
                Error::Config(format!(
                    "survey `{}` year {} lies outside the fitted period {}..={}",
                    rec.survey_id,
                    rec.year,
                    basis.years()[0],
                    basis.years()[basis.years().len() - 1]
                ))
            })?;
            let survey = match survey_ids.iter().position(|s| *s == rec.survey_id) {
                Some(u) => u,
                None => {
                    survey_ids.push(rec.survey_id.clone());
                    survey_ids.len() - 1
                }
            };
            let counts = node_counts(rec, &hierarchy, n_total);
            observations.push(CountObservation::build(
                &hierarchy, &counts, n_total, survey, country, rec.year, time, rec.area, i,
            )?);
        }

        let mut by_country_area = vec![[Vec::new(), Vec::new(), Vec::new()]; regions.n_countries()];
        let mut by_survey = vec![Vec::new(); survey_ids.len()];
        for (i, o) in observations.iter().enumerate() {
            by_country_area[o.country][area_slot(o.area)].push(i);
            by_survey[o.survey].push(i);
        }

        Ok(Self {
            hierarchy,
            regions,
            basis,
            priors,
            n_total,
            observations,
            survey_ids,
            urban,
            logit_p,
            by_country_area,
            by_survey,
        })
    }

    pub fn n_series(&self) -> usize {
        2 * self.hierarchy.n_slots()
    }

    /// Series index of a relative-mean slot in a modelled area (0 urban, 1 rural).
    #[inline]
    pub fn series(slot: usize, area: usize) -> usize {
        2 * slot + area
    }

    pub fn series_name(&self, q: usize) -> String {
        let area = if q % 2 == 0 { Area::Urban } else { Area::Rural };
        format!("{}/{}", self.hierarchy.slot_name(q / 2), area)
    }

    pub fn observations_of(&self, country: usize, area: Area) -> &[usize] {
        &self.by_country_area[country][area_slot(area)]
    }

    pub fn observations_of_survey(&self, survey: usize) -> &[usize] {
        &self.by_survey[survey]
    }

    /// `logit P` for a country and year, inside or outside the basis period.
    pub fn logit_urban(&self, country: usize, year: i32) -> Result<f64> {
        match self.basis.year_index(year) {
            Some(t) => Ok(self.logit_p[country][t]),
            None => self
                .urban
                .get(&self.regions.countries()[country], year)
                .map(logit),
        }
    }

    /// Every block in sweep order.
    pub fn blocks(&self) -> Vec<BlockId> {
        let (nq, nc) = (self.n_series(), self.regions.n_countries());
        let (nr, ns) = (self.regions.n_regions(), self.regions.n_super_regions());
        let mut out = Vec::new();
        for (obs, o) in self.observations.iter().enumerate() {
            out.extend((0..o.groups.len()).map(|group| BlockId::Counts { obs, group }));
        }
        for q in 0..nq {
            for c in 0..nc {
                out.push(BlockId::Beta { q, c });
                out.push(BlockId::BetaLambda { q, c });
                out.push(BlockId::BetaScale { q, c });
                out.push(BlockId::LogPhi { q, c });
            }
        }
        for c in 0..nc {
            out.push(BlockId::Kappa { c });
            out.push(BlockId::KappaLambda { c });
            out.push(BlockId::KappaScale { c });
        }
        out.extend((0..self.survey_ids.len()).map(|survey| BlockId::Rho { survey }));
        for q in 0..nq {
            for r in 0..nr {
                out.push(BlockId::Gamma { q, r });
                out.push(BlockId::GammaLambda { q, r });
                out.push(BlockId::GammaScale { q, r });
            }
            for s in 0..ns {
                out.push(BlockId::Theta { q, s });
                out.push(BlockId::ThetaLambda { q, s });
                out.push(BlockId::ThetaScale { q, s });
            }
            out.push(BlockId::UpsilonBeta { q });
            out.push(BlockId::UpsilonGamma { q });
            out.push(BlockId::UpsilonPhi { q });
            out.push(BlockId::SigmaPhi { q });
            for m in 0..3 {
                out.push(BlockId::SigmaBeta { q, m });
                out.push(BlockId::SigmaGamma { q, m });
            }
        }
        out.push(BlockId::UpsilonKappa);
        out.extend((0..3).map(|m| BlockId::SigmaKappa { m }));
        out
    }

    /// Checks that a block address is valid for this model.
    pub fn validate_block(&self, block: BlockId) -> Result<()> {
        let (nq, nc) = (self.n_series(), self.regions.n_countries());
        let (nr, ns) = (self.regions.n_regions(), self.regions.n_super_regions());
        let ok = match block {
            BlockId::Beta { q, c }
            | BlockId::BetaLambda { q, c }
            | BlockId::BetaScale { q, c }
            | BlockId::LogPhi { q, c } => q < nq && c < nc,
            BlockId::Gamma { q, r }
            | BlockId::GammaLambda { q, r }
            | BlockId::GammaScale { q, r } => q < nq && r < nr,
            BlockId::Theta { q, s }
            | BlockId::ThetaLambda { q, s }
            | BlockId::ThetaScale { q, s } => q < nq && s < ns,
            BlockId::Kappa { c } | BlockId::KappaLambda { c } | BlockId::KappaScale { c } => c < nc,
            BlockId::Rho { survey } => survey < self.survey_ids.len(),
            BlockId::UpsilonBeta { q }
            | BlockId::UpsilonGamma { q }
            | BlockId::UpsilonPhi { q }
            | BlockId::SigmaPhi { q } => q < nq,
            BlockId::SigmaBeta { q, m } | BlockId::SigmaGamma { q, m } => q < nq && m < 3,
            BlockId::UpsilonKappa => true,
            BlockId::SigmaKappa { m } => m < 3,
            BlockId::Counts { obs, group } => self
                .observations
                .get(obs)
                .is_some_and(|o| group < o.groups.len()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnknownBlock(format!("{block:?}")))
        }
    }

    /// Empirical logit relative mean of `slot` in one observation, if its tier is active.
    fn empirical_logit(&self, o: &CountObservation, counts: &[u64], slot: usize) -> Option<f64> {
        let t = self.hierarchy.slot_tier(slot);
        if !o.active_tiers[t] {
            return None;
        }
        let tier = &self.hierarchy.tiers()[t];
        let pos = slot - tier.first_slot;
        let parent = tier.parent.map_or(o.total, |p| counts[p]);
        let before: u64 = tier.children[..pos].iter().map(|&c| counts[c]).sum();
        let n = parent - before;
        let v = counts[tier.children[pos]];
        Some(logit((v as f64 + 0.5) / (n as f64 + 1.0)))
    }

    /// Random starting state centred on crude per-country data summaries.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelState {
        let k = self.basis.k();
        let (nq, nc) = (self.n_series(), self.regions.n_countries());
        let (nr, ns) = (self.regions.n_regions(), self.regions.n_super_regions());
        let mut z = || -> f64 { StandardNormal.sample(rng) };

        let counts: Vec<Vec<u64>> = self
            .observations
            .iter()
            .map(|o| o.initial.clone())
            .collect();
        let mut beta = vec![Vec::with_capacity(nc); nq];
        for (q, row) in beta.iter_mut().enumerate() {
            let (slot, area) = (q / 2, if q % 2 == 0 { Area::Urban } else { Area::Rural });
            let mut pooled = Vec::new();
            let per_country: Vec<Vec<(f64, f64)>> = (0..nc)
                .map(|c| {
                    self.observations_of(c, area)
                        .iter()
                        .filter_map(|&i| {
                            let o = &self.observations[i];
                            self.empirical_logit(o, &counts[i], slot)
                                .map(|y| (self.basis.row(o.time)[0], y))
                        })
                        .collect()
                })
                .collect();
            for pts in &per_country {
                pooled.extend(pts.iter().map(|p| p.1));
            }
            let fallback = if pooled.is_empty() {
                0.0
            } else {
                pooled.iter().sum::<f64>() / pooled.len() as f64
            };
            for pts in per_country {
                let (a, b) = linear_fit(&pts, fallback);
                let mut block = SplineBlock::zeros(k);
                block.intercept = a + 0.1 * z();
                block.linear = b + 0.1 * z();
                for v in &mut block.nonlinear {
                    *v = 0.05 * z();
                }
                block.log_lambda = 2.0 + 0.5 * z();
                row.push(block);
            }
        }

        let average = |blocks: &[&SplineBlock]| -> SplineBlock {
            let mut out = SplineBlock::zeros(k);
            let n = blocks.len().max(1) as f64;
            for b in blocks {
                out.intercept += b.intercept / n;
                out.linear += b.linear / n;
                for (o, v) in out.nonlinear.iter_mut().zip(&b.nonlinear) {
                    *o += v / n;
                }
            }
            out
        };
        let mut gamma = vec![Vec::with_capacity(nr); nq];
        let mut theta = vec![Vec::with_capacity(ns); nq];
        for q in 0..nq {
            for r in 0..nr {
                let members: Vec<&SplineBlock> =
                    self.regions.countries_in(r).map(|c| &beta[q][c]).collect();
                let mut g = average(&members);
                g.log_lambda = 2.0 + 0.5 * z();
                gamma[q].push(g);
            }
            for s in 0..ns {
                let members: Vec<&SplineBlock> =
                    self.regions.regions_in(s).map(|r| &gamma[q][r]).collect();
                let mut t = average(&members);
                t.log_lambda = 2.0 + 0.5 * z();
                theta[q].push(t);
            }
        }

        let log_phi: Vec<Vec<f64>> = (0..nq)
            .map(|_| (0..nc).map(|_| 4.0 + 0.3 * z()).collect())
            .collect();
        let hyper: Vec<SeriesHyper> = (0..nq)
            .map(|q| {
                let mean_lambda = beta[q].iter().map(|b| b.log_lambda).sum::<f64>() / nc as f64;
                let mean_gamma_lambda =
                    gamma[q].iter().map(|b| b.log_lambda).sum::<f64>() / nr as f64;
                SeriesHyper {
                    upsilon_beta: mean_lambda + 0.1 * z(),
                    log_sigma_beta: [(-0.7) + 0.2 * z(), (-0.7) + 0.2 * z(), 0.2 * z()],
                    upsilon_gamma: mean_gamma_lambda + 0.1 * z(),
                    log_sigma_gamma: [(-0.7) + 0.2 * z(), (-0.7) + 0.2 * z(), 0.2 * z()],
                    upsilon_phi: log_phi[q].iter().sum::<f64>() / nc as f64,
                    log_sigma_phi: -1.0 + 0.2 * z(),
                }
            })
            .collect();
        let kappa: Vec<SplineBlock> = (0..nc)
            .map(|_| {
                let mut b = SplineBlock::zeros(k);
                b.intercept = 0.05 * z();
                b.linear = 0.05 * z();
                b.log_lambda = 2.0 + 0.5 * z();
                b
            })
            .collect();
        let urban_hyper = UrbanHyper {
            upsilon: 2.0 + 0.1 * z(),
            log_sigma: [-1.0 + 0.2 * z(), -1.0 + 0.2 * z(), 0.2 * z()],
        };
        let logit_rho = (0..self.survey_ids.len())
            .map(|_| 2.2 + 0.3 * z())
            .collect();

        ModelState {
            beta,
            gamma,
            theta,
            log_phi,
            kappa,
            logit_rho,
            hyper,
            urban_hyper,
            counts,
        }
    }
}

/// Least-squares intercept and slope, falling back to a constant.
fn linear_fit(points: &[(f64, f64)], fallback: f64) -> (f64, f64) {
    let n = points.len() as f64;
    if points.is_empty() {
        return (fallback, 0.0);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-6 {
        return (my, 0.0);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}
