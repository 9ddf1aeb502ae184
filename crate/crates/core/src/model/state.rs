use serde::{Deserialize, Serialize};

use crate::splines::SplineBlock;

/// Fixed prior constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    /// Sd of the Normal(0, sd^2) priors on every upsilon, the super-regional
    /// intercepts and slopes, and each super-regional log smoothing parameter.
    pub fixed_effect_sd: f64,
    /// Sd of the positive-truncated Normal(0, sd^2) priors on every sigma.
    pub sigma_sd: f64,
    /// Beta(a, b) prior on the per-survey weight of the Beta-Binomial component.
    pub rho_alpha: f64,
    pub rho_beta: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            fixed_effect_sd: 10.0,
            sigma_sd: 10.0,
            rho_alpha: 9.0,
            rho_beta: 1.0,
        }
    }
}

/// Hyperparameters of one (relative mean, area) series.
///
/// Standard deviations are stored on the log scale; index 0 is the intercept
/// sd, 1 the slope sd and 2 the sd of the log smoothing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesHyper {
    pub upsilon_beta: f64,
    pub log_sigma_beta: [f64; 3],
    pub upsilon_gamma: f64,
    pub log_sigma_gamma: [f64; 3],
    pub upsilon_phi: f64,
    pub log_sigma_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrbanHyper {
    pub upsilon: f64,
    pub log_sigma: [f64; 3],
}

/// Every latent quantity of the model for one chain.
///
/// Series are indexed `q = 2 * slot + area` with area 0 urban and 1 rural.
/// Positive quantities are held on the log scale and `rho` on the logit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `[q][country]`
    pub beta: Vec<Vec<SplineBlock>>,
    /// `[q][region]`
    pub gamma: Vec<Vec<SplineBlock>>,
    /// `[q][super_region]`; `log_lambda` is the fixed-effect smoothing parameter.
    pub theta: Vec<Vec<SplineBlock>>,
    /// `[q][country]`
    pub log_phi: Vec<Vec<f64>>,
    /// Urban-weight deviation spline per country.
    pub kappa: Vec<SplineBlock>,
    /// Per survey.
    pub logit_rho: Vec<f64>,
    pub hyper: Vec<SeriesHyper>,
    pub urban_hyper: UrbanHyper,
    /// Node counts per observation, latent entries imputed.
    pub counts: Vec<Vec<u64>>,
}

/// Addresses one updatable block of [`ModelState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockId {
    Beta {
        q: usize,
        c: usize,
    },
    BetaLambda {
        q: usize,
        c: usize,
    },
    Gamma {
        q: usize,
        r: usize,
    },
    GammaLambda {
        q: usize,
        r: usize,
    },
    Theta {
        q: usize,
        s: usize,
    },
    ThetaLambda {
        q: usize,
        s: usize,
    },
    LogPhi {
        q: usize,
        c: usize,
    },
    Kappa {
        c: usize,
    },
    KappaLambda {
        c: usize,
    },
    Rho {
        survey: usize,
    },
    UpsilonBeta {
        q: usize,
    },
    SigmaBeta {
        q: usize,
        m: usize,
    },
    UpsilonGamma {
        q: usize,
    },
    SigmaGamma {
        q: usize,
        m: usize,
    },
    UpsilonPhi {
        q: usize,
    },
    SigmaPhi {
        q: usize,
    },
    UpsilonKappa,
    SigmaKappa {
        m: usize,
    },
    Counts {
        obs: usize,
        group: usize,
    },
    /// Moves `log_lambda` of a spline with its standardised non-linear
    /// deviations held fixed (the non-linear part rescales with it).
    BetaScale {
        q: usize,
        c: usize,
    },
    GammaScale {
        q: usize,
        r: usize,
    },
    ThetaScale {
        q: usize,
        s: usize,
    },
    KappaScale {
        c: usize,
    },
}

impl BlockId {
    /// Whether the block is a whole spline coefficient vector.
    pub fn is_spline(&self) -> bool {
        matches!(
            self,
            BlockId::Beta { .. }
                | BlockId::Gamma { .. }
                | BlockId::Theta { .. }
                | BlockId::Kappa { .. }
        )
    }

    pub fn is_scale(&self) -> bool {
        matches!(
            self,
            BlockId::BetaScale { .. }
                | BlockId::GammaScale { .. }
                | BlockId::ThetaScale { .. }
                | BlockId::KappaScale { .. }
        )
    }

    pub fn is_counts(&self) -> bool {
        matches!(self, BlockId::Counts { .. })
    }
}

impl ModelState {
    /// Unconstrained values of a continuous block.
    pub fn get_block(&self, block: BlockId, out: &mut Vec<f64>) {
        out.clear();
        match block {
            BlockId::Beta { q, c } => self.beta[q][c].write_coefficients(out),
            BlockId::Gamma { q, r } => self.gamma[q][r].write_coefficients(out),
            BlockId::Theta { q, s } => self.theta[q][s].write_coefficients(out),
            BlockId::Kappa { c } => self.kappa[c].write_coefficients(out),
            BlockId::Counts { .. } => {}
            scalar => out.push(*self.scalar(scalar)),
        }
    }

    pub fn set_block(&mut self, block: BlockId, values: &[f64]) {
        match block {
            BlockId::Beta { q, c } => self.beta[q][c].set_coefficients(values),
            BlockId::Gamma { q, r } => self.gamma[q][r].set_coefficients(values),
            BlockId::Theta { q, s } => self.theta[q][s].set_coefficients(values),
            BlockId::Kappa { c } => self.kappa[c].set_coefficients(values),
            BlockId::Counts { .. } => {}
            scalar => *self.scalar_mut(scalar) = values[0],
        }
    }

    fn scalar(&self, block: BlockId) -> &f64 {
        match block {
            BlockId::BetaLambda { q, c } | BlockId::BetaScale { q, c } => {
                &self.beta[q][c].log_lambda
            }
            BlockId::GammaLambda { q, r } | BlockId::GammaScale { q, r } => {
                &self.gamma[q][r].log_lambda
            }
            BlockId::ThetaLambda { q, s } | BlockId::ThetaScale { q, s } => {
                &self.theta[q][s].log_lambda
            }
            BlockId::LogPhi { q, c } => &self.log_phi[q][c],
            BlockId::KappaLambda { c } | BlockId::KappaScale { c } => &self.kappa[c].log_lambda,
            BlockId::Rho { survey } => &self.logit_rho[survey],
            BlockId::UpsilonBeta { q } => &self.hyper[q].upsilon_beta,
            BlockId::SigmaBeta { q, m } => &self.hyper[q].log_sigma_beta[m],
            BlockId::UpsilonGamma { q } => &self.hyper[q].upsilon_gamma,
            BlockId::SigmaGamma { q, m } => &self.hyper[q].log_sigma_gamma[m],
            BlockId::UpsilonPhi { q } => &self.hyper[q].upsilon_phi,
            BlockId::SigmaPhi { q } => &self.hyper[q].log_sigma_phi,
            BlockId::UpsilonKappa => &self.urban_hyper.upsilon,
            BlockId::SigmaKappa { m } => &self.urban_hyper.log_sigma[m],
            other => unreachable!("{other:?} is not a scalar block"),
        }
    }

    fn scalar_mut(&mut self, block: BlockId) -> &mut f64 {
        match block {
            BlockId::BetaLambda { q, c } | BlockId::BetaScale { q, c } => {
                &mut self.beta[q][c].log_lambda
            }
            BlockId::GammaLambda { q, r } | BlockId::GammaScale { q, r } => {
                &mut self.gamma[q][r].log_lambda
            }
            BlockId::ThetaLambda { q, s } | BlockId::ThetaScale { q, s } => {
                &mut self.theta[q][s].log_lambda
            }
            BlockId::LogPhi { q, c } => &mut self.log_phi[q][c],
            BlockId::KappaLambda { c } | BlockId::KappaScale { c } => &mut self.kappa[c].log_lambda,
            BlockId::Rho { survey } => &mut self.logit_rho[survey],
            BlockId::UpsilonBeta { q } => &mut self.hyper[q].upsilon_beta,
            BlockId::SigmaBeta { q, m } => &mut self.hyper[q].log_sigma_beta[m],
            BlockId::UpsilonGamma { q } => &mut self.hyper[q].upsilon_gamma,
            BlockId::SigmaGamma { q, m } => &mut self.hyper[q].log_sigma_gamma[m],
            BlockId::UpsilonPhi { q } => &mut self.hyper[q].upsilon_phi,
            BlockId::SigmaPhi { q } => &mut self.hyper[q].log_sigma_phi,
            BlockId::UpsilonKappa => &mut self.urban_hyper.upsilon,
            BlockId::SigmaKappa { m } => &mut self.urban_hyper.log_sigma[m],
            other => unreachable!("{other:?} is not a scalar block"),
        }
    }
}
