//! Synthetic corpora with known ground truth.
//!
//! [`synthesize_corpus`] simulates the full tiered model (smooth logit trends
//! nested by region, per-series dispersions, an urban/rural layer and injected
//! outliers). [`synthesize_panel`] simulates the simplified constant-mean GDM
//! panel used by the sample-size experiment.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Area, SurveyObservation, UnUrbanSeries};
use crate::distributions::{
    logistic, relative_means_from_marginal, sample_beta_binomial, GdParams,
};
use crate::model::{FuelHierarchy, RegionMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub countries: usize,
    pub regions: usize,
    pub super_regions: usize,
    pub min_surveys: usize,
    pub max_surveys: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Sample size used to draw each record's counts.
    pub sample_size: u64,
    pub overall_only_rate: f64,
    pub mid_missing_rate: f64,
    pub lower_missing_rate: f64,
    /// Records reporting charcoal and coal only through the solid total.
    pub combined_rate: f64,
    /// Records missing the last two top-tier categories.
    pub top_missing_rate: f64,
    pub outlier_rate: f64,
    pub log_phi_mean: f64,
    pub log_phi_sd: f64,
    /// `false` draws plain multinomial counts (no extra survey variability).
    pub survey_variability: bool,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            countries: 6,
            regions: 2,
            super_regions: 1,
            min_surveys: 8,
            max_surveys: 14,
            first_year: 1990,
            last_year: 2017,
            sample_size: 100_000,
            overall_only_rate: 0.15,
            mid_missing_rate: 0.10,
            lower_missing_rate: 0.10,
            combined_rate: 0.05,
            top_missing_rate: 0.05,
            outlier_rate: 0.02,
            log_phi_mean: 150f64.ln(),
            log_phi_sd: 0.3,
            survey_variability: true,
        }
    }
}

/// Ground truth behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusTruth {
    pub years: Vec<i32>,
    /// `logit nu` per series `q = 2 * slot + area`, country and year.
    pub logit_nu: Vec<Vec<Vec<f64>>>,
    pub log_phi: Vec<Vec<f64>>,
    /// Urban weight per country and year.
    pub pi: Vec<Vec<f64>>,
    /// `(survey_id, area)` of replaced records.
    pub outliers: Vec<(String, Area)>,
}

impl CorpusTruth {
    pub fn nu(&self, q: usize, country: usize, year: i32) -> Option<f64> {
        let t = self.years.iter().position(|&y| y == year)?;
        Some(logistic(self.logit_nu[q][country][t]))
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub surveys: Vec<SurveyObservation>,
    pub regions: RegionMap,
    pub urban: UnUrbanSeries,
    pub truth: CorpusTruth,
}

/// Plausible starting level and time trend (logit scale) for each slot in each area.
fn series_centre(hierarchy: &FuelHierarchy, slot: usize, area: usize) -> (f64, f64) {
    let rural = area == 1;
    match hierarchy.slot_name(slot) {
        "solid" => (if rural { 1.2 } else { -0.6 }, -1.2),
        "kerosene" => (-1.5, -0.5),
        "gas" => (if rural { -0.3 } else { 0.8 }, 1.0),
        "biomass" => (if rural { 1.8 } else { 0.8 }, -0.3),
        "wood" => (1.2, -0.2),
        _ => (0.0, 0.0),
    }
}

fn sample_tree<R: Rng + ?Sized>(
    hierarchy: &FuelHierarchy,
    nu: &[f64],
    phi: &[f64],
    n: u64,
    rng: &mut R,
    variability: bool,
) -> Vec<u64> {
    let mut counts = vec![0u64; hierarchy.n_nodes()];
    for tier in hierarchy.tiers() {
        let mut remaining = tier.parent.map_or(n, |p| counts[p]);
        for (pos, &child) in tier.children.iter().enumerate() {
            if pos + 1 == tier.children.len() {
                counts[child] = remaining;
                break;
            }
            let s = tier.first_slot + pos;
            let v = if variability {
                sample_beta_binomial(nu[s] * phi[s], (1.0 - nu[s]) * phi[s], remaining, rng)
            } else if remaining == 0 {
                0
            } else {
                rand_distr::Binomial::new(remaining, nu[s])
                    .expect("valid probability")
                    .sample(rng)
            };
            counts[child] = v;
            remaining -= v;
        }
    }
    counts
}

/// Counts with every conditional drawn uniformly on `0..=n_remaining`.
fn sample_uniform_tree<R: Rng + ?Sized>(
    hierarchy: &FuelHierarchy,
    n: u64,
    rng: &mut R,
) -> Vec<u64> {
    let mut counts = vec![0u64; hierarchy.n_nodes()];
    for tier in hierarchy.tiers() {
        let mut remaining = tier.parent.map_or(n, |p| counts[p]);
        for (pos, &child) in tier.children.iter().enumerate() {
            let v = if pos + 1 == tier.children.len() {
                remaining
            } else {
                rng.random_range(0..=remaining)
            };
            counts[child] = v;
            remaining -= v;
        }
    }
    counts
}

fn drop_nodes(record: &mut SurveyObservation, hierarchy: &FuelHierarchy, names: &[&str]) {
    for name in names {
        if let Some(i) = hierarchy.node_index(name) {
            record.proportions[i] = None;
        }
    }
}

/// Simulates a corpus from the full tiered model.
pub fn synthesize_corpus<R: Rng + ?Sized>(
    spec: &CorpusSpec,
    hierarchy: &FuelHierarchy,
    rng: &mut R,
) -> Corpus {
    let n_slots = hierarchy.n_slots();
    let nq = 2 * n_slots;
    let years: Vec<i32> = (spec.first_year..=spec.last_year).collect();
    let span = f64::from((spec.last_year - spec.first_year).max(1));
    let std_time: Vec<f64> = years
        .iter()
        .map(|&y| f64::from(y - spec.first_year) / span - 0.5)
        .collect();
    let normal = |sd: f64| Normal::new(0.0, sd).expect("positive sd");

    let rows: Vec<(String, String, String)> = (0..spec.countries)
        .map(|c| {
            let r = c % spec.regions.max(1);
            let s = r % spec.super_regions.max(1);
            (
                format!("C{:02}", c + 1),
                format!("R{}", r + 1),
                format!("S{}", s + 1),
            )
        })
        .collect();
    let regions = RegionMap::from_rows(rows).expect("generated map is well formed");

    // nested intercept/slope offsets, then a slow country-specific wiggle
    let mut logit_nu = vec![vec![vec![0.0; years.len()]; spec.countries]; nq];
    let mut log_phi = vec![vec![0.0; spec.countries]; nq];
    let phi_dist =
        Normal::new(spec.log_phi_mean, spec.log_phi_sd.max(1e-12)).expect("valid dispersion spec");
    for (q, series) in logit_nu.iter_mut().enumerate() {
        let (centre, trend) = series_centre(hierarchy, q / 2, q % 2);
        let supers: Vec<(f64, f64)> = (0..regions.n_super_regions())
            .map(|_| {
                (
                    centre + normal(0.4).sample(rng),
                    trend + normal(0.4).sample(rng),
                )
            })
            .collect();
        let regs: Vec<(f64, f64)> = (0..regions.n_regions())
            .map(|r| {
                let s = supers[regions.super_of(r)];
                (s.0 + normal(0.3).sample(rng), s.1 + normal(0.3).sample(rng))
            })
            .collect();
        for (c, curve) in series.iter_mut().enumerate() {
            let base = regs[regions.region_of(c)];
            let a = base.0 + normal(0.3).sample(rng);
            let b = base.1 + normal(0.3).sample(rng);
            let amp = normal(0.15).sample(rng);
            let freq = Uniform::new(0.4, 0.9).expect("valid range").sample(rng);
            let phase = Uniform::new(0.0, std::f64::consts::TAU)
                .expect("valid range")
                .sample(rng);
            for (v, &s) in curve.iter_mut().zip(&std_time) {
                *v = a + b * s + amp * (std::f64::consts::TAU * freq * s + phase).sin();
            }
            log_phi[q][c] = phi_dist.sample(rng);
        }
    }

    let mut urban = UnUrbanSeries::new();
    let mut pi = vec![vec![0.0; years.len()]; spec.countries];
    for c in 0..spec.countries {
        let p0 = normal(0.7).sample(rng) - 0.5;
        let k0 = normal(0.15).sample(rng);
        let k1 = normal(0.1).sample(rng);
        for (t, &y) in years.iter().enumerate() {
            let lp = p0 + 0.05 * f64::from(y - 1990);
            urban.insert(&regions.countries()[c], y, logistic(lp));
            pi[c][t] = logistic(lp + k0 + k1 * std_time[t]);
        }
    }

    let mut surveys = Vec::new();
    let mut outliers = Vec::new();
    for c in 0..spec.countries {
        let n_surveys = rng
            .random_range(spec.min_surveys..=spec.max_surveys.max(spec.min_surveys))
            .min(years.len());
        let mut chosen: Vec<usize> = (0..years.len()).collect();
        chosen.shuffle(rng);
        chosen.truncate(n_surveys);
        chosen.sort_unstable();
        for (k, &t) in chosen.iter().enumerate() {
            let id = format!("{}-S{:02}", regions.countries()[c], k + 1);
            let areas: &[Area] = if rng.random_bool(spec.overall_only_rate) {
                &[Area::Overall]
            } else {
                &[Area::Urban, Area::Rural]
            };
            for &area in areas {
                let (nu, phi) = record_params(hierarchy, &logit_nu, &log_phi, &pi, c, t, area);
                let outlier = rng.random_bool(spec.outlier_rate);
                let counts = if outlier {
                    outliers.push((id.clone(), area));
                    sample_uniform_tree(hierarchy, spec.sample_size, rng)
                } else {
                    sample_tree(
                        hierarchy,
                        &nu,
                        &phi,
                        spec.sample_size,
                        rng,
                        spec.survey_variability,
                    )
                };
                let mut rec = SurveyObservation::new(
                    &id,
                    &regions.countries()[c],
                    years[t],
                    area,
                    hierarchy.n_nodes(),
                );
                for (p, &v) in rec.proportions.iter_mut().zip(&counts) {
                    *p = Some(v as f64 / spec.sample_size as f64);
                }
                if rng.random_bool(spec.mid_missing_rate) {
                    drop_nodes(&mut rec, hierarchy, &["biomass", "charcoal", "coal"]);
                }
                if rng.random_bool(spec.lower_missing_rate) {
                    drop_nodes(&mut rec, hierarchy, &["wood", "cropwaste", "dung"]);
                }
                if rng.random_bool(spec.combined_rate) {
                    drop_nodes(&mut rec, hierarchy, &["charcoal", "coal"]);
                }
                if rng.random_bool(spec.top_missing_rate) {
                    drop_nodes(&mut rec, hierarchy, &["electricity", "others"]);
                }
                surveys.push(rec);
            }
        }
    }

    Corpus {
        surveys,
        regions,
        urban,
        truth: CorpusTruth {
            years,
            logit_nu,
            log_phi,
            pi,
            outliers,
        },
    }
}

/// Relative means and dispersions generating one record.
fn record_params(
    hierarchy: &FuelHierarchy,
    logit_nu: &[Vec<Vec<f64>>],
    log_phi: &[Vec<f64>],
    pi: &[Vec<f64>],
    c: usize,
    t: usize,
    area: Area,
) -> (Vec<f64>, Vec<f64>) {
    let n_slots = hierarchy.n_slots();
    let area_nu = |j: usize| -> Vec<f64> {
        (0..n_slots)
            .map(|s| logistic(logit_nu[2 * s + j][c][t]))
            .collect()
    };
    match area.modelled_index() {
        Some(j) => (
            area_nu(j),
            (0..n_slots).map(|s| log_phi[2 * s + j][c].exp()).collect(),
        ),
        None => {
            let w = pi[c][t];
            let (mut mu_u, mut mu_r) = (
                vec![0.0; hierarchy.n_nodes()],
                vec![0.0; hierarchy.n_nodes()],
            );
            hierarchy.node_means(&area_nu(0), &mut mu_u);
            hierarchy.node_means(&area_nu(1), &mut mu_r);
            let mu: Vec<f64> = mu_u
                .iter()
                .zip(&mu_r)
                .map(|(a, b)| w * a + (1.0 - w) * b)
                .collect();
            let mut nu = vec![0.0; n_slots];
            hierarchy.relative_means(&mu, &mut nu);
            let phi = (0..n_slots)
                .map(|s| (w * log_phi[2 * s][c] + (1.0 - w) * log_phi[2 * s + 1][c]).exp())
                .collect();
            (nu, phi)
        }
    }
}

/// Settings of the constant-mean GDM panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSpec {
    pub countries: usize,
    pub categories: usize,
    /// Used when no observed sample sizes are supplied.
    pub sample_sizes: usize,
    pub min_n: f64,
    pub max_n: f64,
    pub phi_shape: f64,
    pub phi_rate: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self {
            countries: 50,
            categories: 4,
            sample_sizes: 150,
            min_n: 1e3,
            max_n: 1e5,
            phi_shape: 4.0,
            phi_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCountry {
    /// Marginal means, drawn from Dirichlet(1).
    pub mu: Vec<f64>,
    /// One dispersion per relative mean, drawn from Gamma(shape, rate).
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSurvey {
    pub country: usize,
    pub n: u64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub countries: Vec<PanelCountry>,
    pub surveys: Vec<PanelSurvey>,
}

/// Log-uniform sample sizes on `[min_n, max_n]`.
pub fn synthetic_sample_sizes<R: Rng + ?Sized>(spec: &PanelSpec, rng: &mut R) -> Vec<u64> {
    let (lo, hi) = (spec.min_n.ln(), spec.max_n.ln());
    (0..spec.sample_sizes)
        .map(|_| rng.random_range(lo..=hi).exp().round().max(1.0) as u64)
        .collect()
}

/// Simulates `y_i ~ GDM(mu_c, phi_c, n_i)` with `mu_c ~ Dirichlet(1)` and
/// `phi_c ~ Gamma(shape, rate)`. Every country gets at least one survey
/// while sample sizes last; the rest are assigned at random.
pub fn synthesize_panel<R: Rng + ?Sized>(
    spec: &PanelSpec,
    sample_sizes: &[u64],
    rng: &mut R,
) -> Panel {
    let k = spec.categories;
    let gamma = Gamma::new(spec.phi_shape, 1.0 / spec.phi_rate).expect("valid gamma prior");
    let unit = Gamma::new(1.0, 1.0).expect("valid");
    let countries: Vec<PanelCountry> = (0..spec.countries)
        .map(|_| {
            let e: Vec<f64> = (0..k).map(|_| unit.sample(rng)).collect();
            let s: f64 = e.iter().sum();
            PanelCountry {
                mu: e.iter().map(|x| x / s).collect(),
                phi: (0..k - 1).map(|_| gamma.sample(rng)).collect(),
            }
        })
        .collect();
    let mut owner: Vec<usize> = (0..sample_sizes.len())
        .map(|i| {
            if i < spec.countries {
                i
            } else {
                rng.random_range(0..spec.countries)
            }
        })
        .collect();
    owner.shuffle(rng);
    let surveys = sample_sizes
        .iter()
        .zip(owner)
        .map(|(&n, c)| {
            let country = &countries[c];
            let nu =
                relative_means_from_marginal(&country.mu).expect("Dirichlet draws are interior");
            let alpha: Vec<f64> = nu
                .iter()
                .zip(&country.phi)
                .map(|(v, p)| (v * p).max(1e-300))
                .collect();
            let beta: Vec<f64> = nu
                .iter()
                .zip(&country.phi)
                .map(|(v, p)| ((1.0 - v) * p).max(1e-300))
                .collect();
            let params = GdParams::new(alpha, beta).expect("positive parameters");
            let counts = crate::distributions::sample_gdm(&params, n, rng);
            PanelSurvey {
                country: c,
                n,
                counts: counts.counts().to_vec(),
            }
        })
        .collect();
    Panel { countries, surveys }
}
