//! Posterior summaries of a fitted model: trend quantiles, replicate checks,
//! out-of-sample scoring and convergence diagnostics.

use serde::Serialize;

use crate::data::{node_counts, Area, SurveyObservation};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::{
    chain_rng, draw_subset, posterior_replicates, psrf, quantiles, sample_tree, PosteriorDraws,
};
use crate::model::{Model, ModelState};

/// Probabilities of the lower bound, median and upper bound of a central interval.
pub fn interval_probs(level: f64) -> [f64; 3] {
    [(1.0 - level) / 2.0, 0.5, (1.0 + level) / 2.0]
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "interval level must lie in (0,1), got {level}"
        )))
    }
}

/// States for an evenly spaced subset of the pooled draws.
pub fn draw_states(
    model: &Model,
    draws: &PosteriorDraws,
    template: &ModelState,
    max_draws: usize,
) -> Result<Vec<ModelState>> {
    if draws.n_draws() == 0 || draws.n_chains() == 0 {
        return Err(Error::EmptyInput("no posterior draws".into()));
    }
    draw_subset(draws, max_draws)
        .into_iter()
        .map(|(c, d)| model.state_from_monitored(template, draws.draw(c, d)))
        .collect()
}

/// Posterior mean of each survey's Beta-Binomial weight.
pub fn rho_means(model: &Model, draws: &PosteriorDraws) -> Result<Vec<(String, f64)>> {
    model
        .survey_ids
        .iter()
        .map(|s| {
            let name = format!("rho/{s}");
            let p = draws
                .index_of(&name)
                .ok_or_else(|| Error::UnknownBlock(name.clone()))?;
            let v = draws.values(p);
            Ok((s.clone(), v.iter().sum::<f64>() / v.len().max(1) as f64))
        })
        .collect()
}

/// PSRF of every relative mean (per series, country and basis year) and
/// every dispersion (natural scale).
pub fn psrf_table(
    model: &Model,
    draws: &PosteriorDraws,
    template: &ModelState,
    mode: Execution,
) -> Result<Vec<(String, f64)>> {
    if draws.n_chains() < 2 {
        return Err(Error::Config(format!(
            "convergence diagnostics need at least 2 chains, got {}",
            draws.n_chains()
        )));
    }
    let (nq, nc) = (model.n_series(), model.regions.n_countries());
    let years = model.basis.years();
    let mut names = Vec::new();
    for q in 0..nq {
        for c in 0..nc {
            let addr = model.series_address(q, c);
            names.extend(years.iter().map(|y| format!("nu/{addr}/{y}")));
        }
    }
    for q in 0..nq {
        for c in 0..nc {
            names.push(format!("phi/{}", model.series_address(q, c)));
        }
    }

    // values[chain][draw][param]
    let per_chain = map_indexed(mode, draws.n_chains(), |chain| -> Result<Vec<Vec<f64>>> {
        (0..draws.n_draws())
            .map(|d| {
                let s = model.state_from_monitored(template, draws.draw(chain, d))?;
                let mut v = Vec::with_capacity(names.len());
                for q in 0..nq {
                    for c in 0..nc {
                        v.extend((0..years.len()).map(|t| model.nu_at(&s, q, c, t)));
                    }
                }
                for q in 0..nq {
                    v.extend(s.log_phi[q].iter().map(|x| x.exp()));
                }
                Ok(v)
            })
            .collect()
    });
    let per_chain = per_chain.into_iter().collect::<Result<Vec<_>>>()?;
    names
        .into_iter()
        .enumerate()
        .map(|(p, name)| {
            let traces: Vec<Vec<f64>> = per_chain
                .iter()
                .map(|c| c.iter().map(|d| d[p]).collect())
                .collect();
            Ok((name, psrf(&traces)?))
        })
        .collect()
}

/// Lower bound, median and upper bound of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub country: String,
    pub area: Area,
    pub fuel: String,
    pub year: i32,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictRequest {
    pub countries: Vec<String>,
    pub years: Vec<i32>,
    pub level: f64,
    pub max_draws: usize,
    /// Drop the country deviation from the urban weight (overall area only).
    pub un_offsets_only: bool,
    /// Also summarise posterior-predictive replicates at the artificial sample size.
    pub with_survey_variability: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prediction {
    pub trend: Vec<QuantileRow>,
    pub replicates: Vec<QuantileRow>,
}

/// Quantiles of the node means (and optionally replicates) per country, area, fuel and year.
pub fn predict(
    model: &Model,
    states: &[ModelState],
    request: &PredictRequest,
    mode: Execution,
) -> Result<Prediction> {
    check_level(request.level)?;
    if states.is_empty() {
        return Err(Error::EmptyInput("no posterior draws".into()));
    }
    let countries = request
        .countries
        .iter()
        .map(|c| {
            model
                .regions
                .country_index(c)
                .ok_or_else(|| Error::UnknownCountry(c.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let probs = interval_probs(request.level);
    let nodes = model.hierarchy.nodes();
    let with_dev = !request.un_offsets_only;

    let per_country = map_indexed(mode, countries.len(), |i| -> Result<Prediction> {
        let c = countries[i];
        let name = &model.regions.countries()[c];
        let mut rng = chain_rng(request.seed, c);
        let mut out = Prediction::default();
        for &area in &Area::ALL {
            for &year in &request.years {
                let row = model.basis.row_at(year);
                let logit_p = model.logit_urban(c, year)?;
                let mut means: Vec<Vec<f64>> = Vec::with_capacity(states.len());
                let mut reps: Vec<Vec<f64>> = Vec::new();
                for s in states {
                    means.push(match area.modelled_index() {
                        Some(j) => model.area_means(s, j, c, &row),
                        None => model.overall_means(s, c, year, with_dev)?,
                    });
                    if request.with_survey_variability {
                        let params = model.slot_params(s, area, c, &row, logit_p, with_dev);
                        let counts =
                            sample_tree(&model.hierarchy, &params, model.n_total, &mut rng);
                        reps.push(
                            counts
                                .iter()
                                .map(|&v| v as f64 / model.n_total as f64)
                                .collect(),
                        );
                    }
                }
                for (node, fuel) in nodes.iter().enumerate() {
                    let q = quantiles(&means.iter().map(|m| m[node]).collect::<Vec<_>>(), &probs)?;
                    out.trend.push(QuantileRow {
                        country: name.clone(),
                        area,
                        fuel: fuel.clone(),
                        year,
                        lower: q[0],
                        median: q[1],
                        upper: q[2],
                    });
                    if request.with_survey_variability {
                        let q =
                            quantiles(&reps.iter().map(|m| m[node]).collect::<Vec<_>>(), &probs)?;
                        out.replicates.push(QuantileRow {
                            country: name.clone(),
                            area,
                            fuel: fuel.clone(),
                            year,
                            lower: q[0],
                            median: q[1],
                            upper: q[2],
                        });
                    }
                }
            }
        }
        Ok(out)
    });
    let mut all = Prediction::default();
    for p in per_country {
        let p = p?;
        all.trend.extend(p.trend);
        all.replicates.extend(p.replicates);
    }
    Ok(all)
}

/// One observed proportion against its replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub survey_id: String,
    pub country: String,
    pub year: i32,
    pub area: Area,
    pub fuel: String,
    pub observed: f64,
    pub replicate_mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

/// Coverage of one fuel in one area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelCoverage {
    pub fuel: String,
    pub area: Area,
    pub observations: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<ReplicateRow>,
    pub panels: Vec<PanelCoverage>,
    pub coverage: f64,
}

fn replicate_row(
    survey_id: &str,
    country: &str,
    year: i32,
    area: Area,
    fuel: &str,
    observed: f64,
    reps: &[f64],
    level: f64,
) -> Result<ReplicateRow> {
    let q = quantiles(reps, &interval_probs(level))?;
    Ok(ReplicateRow {
        survey_id: survey_id.to_string(),
        country: country.to_string(),
        year,
        area,
        fuel: fuel.to_string(),
        observed,
        replicate_mean: reps.iter().sum::<f64>() / reps.len() as f64,
        lower: q[0],
        upper: q[2],
        inside: q[0] <= observed && observed <= q[2],
    })
}

/// Per-panel coverage; panels follow hierarchy node order, then area.
pub fn panel_coverage(model: &Model, rows: &[ReplicateRow]) -> Vec<PanelCoverage> {
    let mut panels = Vec::new();
    for fuel in model.hierarchy.nodes() {
        for &area in &Area::ALL {
            let sel: Vec<&ReplicateRow> = rows
                .iter()
                .filter(|r| &r.fuel == fuel && r.area == area)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let inside = sel.iter().filter(|r| r.inside).count();
            panels.push(PanelCoverage {
                fuel: fuel.clone(),
                area,
                observations: sel.len(),
                coverage: inside as f64 / sel.len() as f64,
            });
        }
    }
    panels
}

fn overall_coverage(rows: &[ReplicateRow]) -> f64 {
    rows.iter().filter(|r| r.inside).count() as f64 / rows.len().max(1) as f64
}

/// In-sample posterior-predictive check of every observed proportion.
pub fn replicate_check(
    model: &Model,
    draws: &PosteriorDraws,
    template: &ModelState,
    max_draws: usize,
    level: f64,
    seed: u64,
    mode: Execution,
) -> Result<CheckReport> {
    check_level(level)?;
    let reps = posterior_replicates(model, draws, template, max_draws, seed, mode)?;
    let mut rows = Vec::new();
    for (i, o) in model.observations.iter().enumerate() {
        for node in (0..model.hierarchy.n_nodes()).filter(|&n| o.observed[n]) {
            let values: Vec<f64> = reps[i].iter().map(|r| r[node]).collect();
            rows.push(replicate_row(
                &model.survey_ids[o.survey],
                &model.regions.countries()[o.country],
                o.year,
                o.area,
                &model.hierarchy.nodes()[node],
                o.observed_proportion(node).expect("observed node"),
                &values,
                level,
            )?);
        }
    }
    let panels = panel_coverage(model, &rows);
    Ok(CheckReport {
        coverage: overall_coverage(&rows),
        rows,
        panels,
    })
}

/// Splits records into a training set (year <= cutoff) and held-out
/// urban/rural records in `(cutoff, cutoff + horizon]`.
pub fn split_at_cutoff(
    records: &[SurveyObservation],
    cutoff: i32,
    horizon: i32,
) -> (Vec<SurveyObservation>, Vec<SurveyObservation>) {
    let train = records
        .iter()
        .filter(|r| r.year <= cutoff)
        .cloned()
        .collect();
    let held = records
        .iter()
        .filter(|r| r.year > cutoff && r.year <= cutoff + horizon && r.area != Area::Overall)
        .cloned()
        .collect();
    (train, held)
}

/// Interval width of the mean trend at one lead time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthRow {
    pub lead: i32,
    pub series: usize,
    pub median_width: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastStatus {
    Ok,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub status: ForecastStatus,
    pub cutoff: i32,
    pub horizon: i32,
    pub held_out_records: usize,
    pub rows: Vec<ReplicateRow>,
    pub panels: Vec<PanelCoverage>,
    pub coverage: Option<f64>,
    pub widths: Vec<WidthRow>,
    /// Share of (country, area, fuel) series whose width never shrinks with lead time.
    pub monotone_fraction: f64,
    pub median_width_non_decreasing: bool,
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

/// Scores held-out urban/rural records against a model fitted up to `cutoff`
/// and tabulates mean-trend interval widths by lead time.
#[allow(clippy::too_many_arguments)]
pub fn score_forecast(
    model: &Model,
    states: &[ModelState],
    held_out: &[SurveyObservation],
    cutoff: i32,
    horizon: i32,
    level: f64,
    seed: u64,
    mode: Execution,
) -> Result<ForecastReport> {
    check_level(level)?;
    if horizon < 1 {
        return Err(Error::Config(format!(
            "horizon must be at least 1, got {horizon}"
        )));
    }
    if states.is_empty() {
        return Err(Error::EmptyInput("no posterior draws".into()));
    }
    let h = &model.hierarchy;
    let scored: Vec<&SurveyObservation> = held_out
        .iter()
        .filter(|r| r.area != Area::Overall && model.regions.country_index(&r.country).is_some())
        .collect();

    let per_record = map_indexed(mode, scored.len(), |i| -> Result<Vec<ReplicateRow>> {
        let r = scored[i];
        let c = model
            .regions
            .country_index(&r.country)
            .expect("filtered above");
        let counts = node_counts(r, h, model.n_total);
        let row = model.basis.row_at(r.year);
        let logit_p = model.logit_urban(c, r.year)?;
        let mut rng = chain_rng(seed, i);
        let reps: Vec<Vec<u64>> = states
            .iter()
            .map(|s| {
                sample_tree(
                    h,
                    &model.slot_params(s, r.area, c, &row, logit_p, true),
                    model.n_total,
                    &mut rng,
                )
            })
            .collect();
        let n = model.n_total as f64;
        let mut rows = Vec::new();
        for (node, v) in counts.iter().enumerate() {
            let Some(v) = v else { continue };
            let values: Vec<f64> = reps.iter().map(|x| x[node] as f64 / n).collect();
            rows.push(replicate_row(
                &r.survey_id,
                &r.country,
                r.year,
                r.area,
                &h.nodes()[node],
                *v as f64 / n,
                &values,
                level,
            )?);
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_record {
        rows.extend(r?);
    }

    // width[series][lead - 1]
    let probs = interval_probs(level);
    let nc = model.regions.n_countries();
    let per_country = map_indexed(mode, nc, |c| -> Result<Vec<Vec<f64>>> {
        let mut widths = vec![vec![0.0; horizon as usize]; 2 * h.n_nodes()];
        for lead in 1..=horizon {
            let row = model.basis.row_at(cutoff + lead);
            for area in 0..2 {
                let means: Vec<Vec<f64>> = states
                    .iter()
                    .map(|s| model.area_means(s, area, c, &row))
                    .collect();
                for node in 0..h.n_nodes() {
                    let q = quantiles(&means.iter().map(|m| m[node]).collect::<Vec<_>>(), &probs)?;
                    widths[2 * node + area][(lead - 1) as usize] = q[2] - q[0];
                }
            }
        }
        Ok(widths)
    });
    let mut series = Vec::new();
    for w in per_country {
        series.extend(w?);
    }
    let widths: Vec<WidthRow> = (0..horizon as usize)
        .map(|l| {
            let w: Vec<f64> = series.iter().map(|s| s[l]).collect();
            WidthRow {
                lead: l as i32 + 1,
                series: w.len(),
                mean_width: w.iter().sum::<f64>() / w.len().max(1) as f64,
                median_width: median(w),
            }
        })
        .collect();
    let monotone = series
        .iter()
        .filter(|s| s.windows(2).all(|p| p[1] >= p[0]))
        .count();
    let median_width_non_decreasing = widths
        .windows(2)
        .all(|p| p[1].median_width >= p[0].median_width);

    let panels = panel_coverage(model, &rows);
    Ok(ForecastReport {
        status: if rows.is_empty() {
            ForecastStatus::Empty
        } else {
            ForecastStatus::Ok
        },
        cutoff,
        horizon,
        held_out_records: scored.len(),
        coverage: (!rows.is_empty()).then(|| overall_coverage(&rows)),
        rows,
        panels,
        widths,
        monotone_fraction: monotone as f64 / series.len().max(1) as f64,
        median_width_non_decreasing,
    })
}
