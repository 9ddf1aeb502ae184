use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::synth::CorpusSpec;
use crate::data::{SurveyObservation, UnUrbanSeries, DEFAULT_NONRESPONSE_THRESHOLD, DEFAULT_TOTAL};
use crate::error::{Error, Result};
use crate::mcmc::McmcConfig;
use crate::model::{default_tiers, FuelHierarchy, Model, Priors, RegionMap, TierSpec};
use crate::sample_size::SampleSizeConfig;
use crate::splines::{build_thin_plate_basis, TimeScale};

/// Every tunable constant of a run, echoed as `config.json` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Artificial sample size for proportion-to-count conversion.
    pub n_total: u64,
    /// Spline basis dimension.
    pub k: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub nonresponse_threshold: f64,
    pub priors: Priors,
    pub mcmc: McmcConfig,
    pub hierarchy: Vec<TierSpec>,
    /// Used when `--regions` is not given.
    pub region_map: Option<PathBuf>,
    pub interval_level: f64,
    /// Posterior draws used for replicates and quantile tables.
    pub replicate_draws: usize,
    pub psrf_threshold: f64,
    /// Share of parameters that must fall below the PSRF threshold.
    pub psrf_pass_fraction: f64,
    pub sample_size: SampleSizeConfig,
    pub corpus: CorpusSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_total: DEFAULT_TOTAL,
            k: 10,
            first_year: 1990,
            last_year: 2017,
            nonresponse_threshold: DEFAULT_NONRESPONSE_THRESHOLD,
            priors: Priors::default(),
            mcmc: McmcConfig::desk(),
            hierarchy: default_tiers(),
            region_map: None,
            interval_level: 0.95,
            replicate_draws: 1_000,
            psrf_threshold: 1.05,
            psrf_pass_fraction: 0.95,
            sample_size: SampleSizeConfig::default(),
            corpus: CorpusSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.last_year <= self.first_year {
            return Err(Error::Config("last_year must be after first_year".into()));
        }
        if !(self.interval_level > 0.0 && self.interval_level < 1.0) {
            return Err(Error::Config("interval_level must lie in (0,1)".into()));
        }
        if self.replicate_draws == 0 {
            return Err(Error::Config("replicate_draws must be positive".into()));
        }
        self.mcmc.validate()?;
        self.hierarchy()?;
        Ok(())
    }

    pub fn hierarchy(&self) -> Result<FuelHierarchy> {
        FuelHierarchy::from_specs(&self.hierarchy)
    }

    /// Assembles the model over `first_year..=last_year`.
    pub fn build_model(
        &self,
        surveys: &[SurveyObservation],
        regions: RegionMap,
        urban: UnUrbanSeries,
        last_year: i32,
    ) -> Result<Model> {
        let years: Vec<i32> = (self.first_year..=last_year).collect();
        let basis =
            build_thin_plate_basis(&years, self.k, TimeScale::new(self.first_year, last_year)?)?;
        Model::assemble(
            self.hierarchy()?,
            regions,
            basis,
            surveys,
            urban,
            self.n_total,
            self.priors.clone(),
        )
    }
}
