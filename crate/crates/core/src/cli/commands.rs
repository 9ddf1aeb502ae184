use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use super::config::RunConfig;
use super::manifest::{now_unix, sha256_file, sha256_hex, OutputDir};
use super::{Common, DataArgs};
use crate::analysis::{
    draw_states, predict as predict_quantiles, psrf_table, replicate_check, rho_means,
    score_forecast, split_at_cutoff, ForecastStatus, PredictRequest,
};
use crate::data::synth::{synthesize_corpus, synthesize_panel, synthetic_sample_sizes};
use crate::data::{
    load_region_map, load_surveys, load_un_urban, select_surveys, write_region_map, write_surveys,
    write_un_urban, Area, SurveyObservation, UnUrbanSeries,
};
use crate::exec::Execution;
use crate::mcmc::{chain_rng, histogram, run_chains, PosteriorDraws};
use crate::model::{Model, ModelState, RegionMap};
use crate::sample_size::run_sample_size_experiment;

const EXCLUSION_HEADER: [&str; 6] = ["survey_id", "country", "year", "area", "rule", "reason"];
const QUANTILE_HEADER: [&str; 7] = [
    "country", "area", "fuel", "year", "lower", "median", "upper",
];
const REPLICATE_HEADER: [&str; 10] = [
    "survey_id",
    "country",
    "year",
    "area",
    "fuel",
    "observed",
    "replicate_mean",
    "lower",
    "upper",
    "inside",
];
const PANEL_HEADER: [&str; 4] = ["fuel", "area", "observations", "coverage"];

/// Loads the configuration and applies the seed override.
fn effective_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.mcmc.seed = seed;
        config.sample_size.mcmc.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn config_hash(config: &RunConfig) -> anyhow::Result<String> {
    Ok(sha256_hex(serde_json::to_string_pretty(config)?.as_bytes()))
}

struct Inputs {
    records: Vec<SurveyObservation>,
    regions: RegionMap,
    urban: UnUrbanSeries,
    hashes: BTreeMap<String, String>,
}

fn load_inputs(data: &DataArgs, config: &RunConfig) -> anyhow::Result<Inputs> {
    let hierarchy = config.hierarchy()?;
    let regions_path = data
        .regions
        .clone()
        .or_else(|| config.region_map.clone())
        .context("no region map: pass --regions or set region_map in the config")?;
    let mut hashes = BTreeMap::new();
    for (key, path) in [
        ("surveys", &data.surveys),
        ("urban", &data.urban),
        ("regions", &regions_path),
    ] {
        hashes.insert(key.to_string(), sha256_file(path)?);
    }
    Ok(Inputs {
        records: load_surveys(&data.surveys, &hierarchy)
            .with_context(|| format!("loading {}", data.surveys.display()))?,
        regions: load_region_map(&regions_path)
            .with_context(|| format!("loading {}", regions_path.display()))?,
        urban: load_un_urban(&data.urban)
            .with_context(|| format!("loading {}", data.urban.display()))?,
        hashes,
    })
}

#[derive(Serialize)]
struct ExclusionRow<'a> {
    survey_id: &'a str,
    country: &'a str,
    year: i32,
    area: Area,
    rule: &'a str,
    reason: String,
}

#[derive(Serialize)]
struct AcceptanceRow<'a> {
    chain: usize,
    block: &'a str,
    acceptance_rate: f64,
    scale: f64,
}

#[derive(Serialize)]
struct FitSummary {
    records_in: usize,
    records_kept: usize,
    records_excluded: usize,
    observations: usize,
    surveys: usize,
    countries: usize,
    last_year: i32,
    chains: usize,
    draws_per_chain: usize,
    monitored_parameters: usize,
    init_attempts: Vec<usize>,
}

/// A fit reloaded from (or just written to) an output directory.
pub struct FittedRun {
    pub config: RunConfig,
    pub model: Model,
    pub draws: PosteriorDraws,
    /// Supplies the unmonitored parts of each draw's state.
    pub template: ModelState,
}

fn template_state(model: &Model, seed: u64) -> ModelState {
    model.initial_state(&mut chain_rng(seed, 0))
}

/// Selection, model assembly and sampling; writes a complete fit directory.
fn fit_into(
    config: &RunConfig,
    inputs: Inputs,
    last_year: i32,
    out: &Path,
    mode: Execution,
) -> anyhow::Result<FittedRun> {
    let started = now_unix();
    let hierarchy = config.hierarchy()?;
    let records_in = inputs.records.len();
    let (selected, exclusions) =
        select_surveys(inputs.records, &hierarchy, config.nonresponse_threshold);

    let mut rows: Vec<ExclusionRow> = exclusions
        .iter()
        .map(|e| ExclusionRow {
            survey_id: &e.record.survey_id,
            country: &e.record.country,
            year: e.record.year,
            area: e.record.area,
            rule: e.rule.id(),
            reason: e.rule.to_string(),
        })
        .collect();
    let mut kept = Vec::with_capacity(selected.len());
    for r in &selected {
        let reason = if r.year < config.first_year || r.year > last_year {
            Some((
                "years",
                format!("year outside {}..={last_year}", config.first_year),
            ))
        } else if inputs.regions.country_index(&r.country).is_none() {
            Some(("country", "country missing from the region map".to_string()))
        } else {
            None
        };
        match reason {
            Some((rule, reason)) => rows.push(ExclusionRow {
                survey_id: &r.survey_id,
                country: &r.country,
                year: r.year,
                area: r.area,
                rule,
                reason,
            }),
            None => kept.push(r.clone()),
        }
    }

    let model = config.build_model(
        &kept,
        inputs.regions.clone(),
        inputs.urban.clone(),
        last_year,
    )?;
    let (draws, stats) = run_chains(&model, &config.mcmc, mode)?;

    let mut dir = OutputDir::create(out)?;
    let mut echo = config.clone();
    echo.last_year = last_year;
    dir.write_json("config.json", &echo)?;
    let mut buf = Vec::new();
    write_surveys(&mut buf, &hierarchy, &kept)?;
    dir.write_bytes("surveys.csv", &buf)?;
    buf.clear();
    write_region_map(&mut buf, &inputs.regions)?;
    dir.write_bytes("regions.csv", &buf)?;
    buf.clear();
    write_un_urban(&mut buf, &inputs.urban)?;
    dir.write_bytes("urban.csv", &buf)?;
    dir.write_rows("exclusions.csv", &EXCLUSION_HEADER, &rows)?;
    draws.save(&dir.declare("draws.csv"))?;

    let acceptance: Vec<AcceptanceRow> = stats
        .iter()
        .flat_map(|s| {
            s.blocks
                .iter()
                .map(move |(block, rate, scale)| AcceptanceRow {
                    chain: s.chain,
                    block,
                    acceptance_rate: *rate,
                    scale: *scale,
                })
        })
        .collect();
    dir.write_rows(
        "acceptance.csv",
        &["chain", "block", "acceptance_rate", "scale"],
        &acceptance,
    )?;
    dir.write_rows(
        "rho.csv",
        &["survey_id", "posterior_mean_rho"],
        &rho_means(&model, &draws)?,
    )?;
    dir.write_json(
        "fit_summary.json",
        &FitSummary {
            records_in,
            records_kept: kept.len(),
            records_excluded: rows.len(),
            observations: model.observations.len(),
            surveys: model.survey_ids.len(),
            countries: model.regions.n_countries(),
            last_year,
            chains: draws.n_chains(),
            draws_per_chain: draws.n_draws(),
            monitored_parameters: draws.names().len(),
            init_attempts: stats.iter().map(|s| s.init_attempts).collect(),
        },
    )?;
    dir.finish(
        "fit",
        config.mcmc.seed,
        config_hash(&echo)?,
        inputs.hashes,
        started,
    )?;

    let template = template_state(&model, config.mcmc.seed);
    Ok(FittedRun {
        config: echo,
        model,
        draws,
        template,
    })
}

pub fn fit(data: &DataArgs, common: &Common, mode: Execution) -> anyhow::Result<()> {
    let config = effective_config(common)?;
    let inputs = load_inputs(data, &config)?;
    let run = fit_into(&config, inputs, config.last_year, &common.out, mode)?;
    eprintln!(
        "fit: {} observations, {} chains x {} draws written to {}",
        run.model.observations.len(),
        run.draws.n_chains(),
        run.draws.n_draws(),
        common.out.display()
    );
    Ok(())
}

/// Reloads a fit directory written by `fit` (or the training fit of `forecast-experiment`).
pub fn load_fit(dir: &Path) -> anyhow::Result<FittedRun> {
    let config =
        RunConfig::load(&dir.join("config.json")).context("loading the fit configuration")?;
    let hierarchy = config.hierarchy()?;
    let surveys = load_surveys(dir.join("surveys.csv"), &hierarchy)?;
    let regions = load_region_map(dir.join("regions.csv"))?;
    let urban = load_un_urban(dir.join("urban.csv"))?;
    let draws = PosteriorDraws::load(&dir.join("draws.csv"))?;
    let model = config.build_model(&surveys, regions, urban, config.last_year)?;
    if draws.names() != model.monitored_names().as_slice() {
        bail!(
            "draws in {} do not match the model described by its config",
            dir.display()
        );
    }
    let template = template_state(&model, config.mcmc.seed);
    Ok(FittedRun {
        config,
        model,
        draws,
        template,
    })
}

fn fit_hashes(dir: &Path) -> anyhow::Result<(String, BTreeMap<String, String>)> {
    let mut hashes = BTreeMap::new();
    for f in ["draws.csv", "surveys.csv", "regions.csv", "urban.csv"] {
        hashes.insert(f.to_string(), sha256_file(&dir.join(f))?);
    }
    Ok((sha256_file(&dir.join("config.json"))?, hashes))
}

fn parse_years(spec: &str) -> anyhow::Result<Vec<i32>> {
    if let Some((a, b)) = spec.split_once(':') {
        let (a, b): (i32, i32) = (a.trim().parse()?, b.trim().parse()?);
        if b < a {
            bail!("year range {a}:{b} is empty");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|y| {
            y.trim()
                .parse::<i32>()
                .with_context(|| format!("bad year `{y}`"))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn predict(
    draws_dir: &Path,
    countries: Option<&str>,
    years: Option<&str>,
    un_offsets_only: bool,
    with_survey_variability: bool,
    seed: Option<u64>,
    out: &Path,
    mode: Execution,
) -> anyhow::Result<()> {
    let started = now_unix();
    let run = load_fit(draws_dir)?;
    let seed = seed.unwrap_or(run.config.mcmc.seed);
    let request = PredictRequest {
        countries: match countries {
            Some(list) => list.split(',').map(|c| c.trim().to_string()).collect(),
            None => run.model.regions.countries().to_vec(),
        },
        years: match years {
            Some(spec) => parse_years(spec)?,
            None => run.model.basis.years().to_vec(),
        },
        level: run.config.interval_level,
        max_draws: run.config.replicate_draws,
        un_offsets_only,
        with_survey_variability,
        seed,
    };
    let states = draw_states(&run.model, &run.draws, &run.template, request.max_draws)?;
    let prediction = predict_quantiles(&run.model, &states, &request, mode)?;

    let mut dir = OutputDir::create(out)?;
    dir.write_rows("trend.csv", &QUANTILE_HEADER, &prediction.trend)?;
    if with_survey_variability {
        dir.write_rows("replicates.csv", &QUANTILE_HEADER, &prediction.replicates)?;
    }
    let (config_sha, hashes) = fit_hashes(draws_dir)?;
    dir.finish("predict", seed, config_sha, hashes, started)?;
    Ok(())
}

#[derive(Serialize)]
struct CheckSummary {
    level: f64,
    draws: usize,
    values: usize,
    coverage: f64,
}

pub fn check(
    draws_dir: &Path,
    seed: Option<u64>,
    out: &Path,
    mode: Execution,
) -> anyhow::Result<()> {
    let started = now_unix();
    let run = load_fit(draws_dir)?;
    let seed = seed.unwrap_or(run.config.mcmc.seed);
    let level = run.config.interval_level;
    let report = replicate_check(
        &run.model,
        &run.draws,
        &run.template,
        run.config.replicate_draws,
        level,
        seed,
        mode,
    )?;
    let mut dir = OutputDir::create(out)?;
    dir.write_rows("replicates.csv", &REPLICATE_HEADER, &report.rows)?;
    dir.write_rows("coverage.csv", &PANEL_HEADER, &report.panels)?;
    dir.write_json(
        "check.json",
        &CheckSummary {
            level,
            draws: run
                .config
                .replicate_draws
                .min(run.draws.n_chains() * run.draws.n_draws()),
            values: report.rows.len(),
            coverage: report.coverage,
        },
    )?;
    let (config_sha, hashes) = fit_hashes(draws_dir)?;
    dir.finish("check", seed, config_sha, hashes, started)?;
    eprintln!(
        "check: coverage {:.3} over {} observed values",
        report.coverage,
        report.rows.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct ForecastSummary {
    status: ForecastStatus,
    cutoff_year: i32,
    horizon: i32,
    level: f64,
    training_records: usize,
    held_out_records: usize,
    scored_values: usize,
    coverage: Option<f64>,
    monotone_width_fraction: f64,
    median_width_non_decreasing: bool,
}

pub fn forecast(
    data: &DataArgs,
    cutoff: i32,
    horizon: i32,
    common: &Common,
    mode: Execution,
) -> anyhow::Result<()> {
    let started = now_unix();
    let config = effective_config(common)?;
    if cutoff <= config.first_year || cutoff > config.last_year {
        bail!(
            "cutoff year {cutoff} must lie in ({}, {}]",
            config.first_year,
            config.last_year
        );
    }
    if horizon < 1 {
        bail!("horizon must be at least 1");
    }
    let mut inputs = load_inputs(data, &config)?;
    let hashes = inputs.hashes.clone();
    let hierarchy = config.hierarchy()?;
    let (kept, _) = select_surveys(
        inputs.records.clone(),
        &hierarchy,
        config.nonresponse_threshold,
    );
    let (_, held_out) = split_at_cutoff(&kept, cutoff, horizon);
    let training_records = inputs.records.iter().filter(|r| r.year <= cutoff).count();
    inputs.records.retain(|r| r.year <= cutoff);

    let run = fit_into(&config, inputs, cutoff, &common.out.join("fit"), mode)?;
    let states = draw_states(
        &run.model,
        &run.draws,
        &run.template,
        config.replicate_draws,
    )?;
    let report = score_forecast(
        &run.model,
        &states,
        &held_out,
        cutoff,
        horizon,
        config.interval_level,
        config.mcmc.seed,
        mode,
    )?;

    let mut dir = OutputDir::create(&common.out)?;
    dir.write_rows("heldout.csv", &REPLICATE_HEADER, &report.rows)?;
    dir.write_rows("coverage.csv", &PANEL_HEADER, &report.panels)?;
    dir.write_rows(
        "widths.csv",
        &["lead", "series", "median_width", "mean_width"],
        &report.widths,
    )?;
    dir.write_json(
        "forecast.json",
        &ForecastSummary {
            status: report.status.clone(),
            cutoff_year: cutoff,
            horizon,
            level: config.interval_level,
            training_records,
            held_out_records: report.held_out_records,
            scored_values: report.rows.len(),
            coverage: report.coverage,
            monotone_width_fraction: report.monotone_fraction,
            median_width_non_decreasing: report.median_width_non_decreasing,
        },
    )?;
    dir.finish(
        "forecast-experiment",
        config.mcmc.seed,
        config_hash(&config)?,
        hashes,
        started,
    )?;
    match report.coverage {
        Some(c) => eprintln!(
            "forecast: held-out coverage {c:.3} over {} values",
            report.rows.len()
        ),
        None => eprintln!(
            "forecast: no held-out urban/rural surveys after {cutoff}; empty report written"
        ),
    }
    Ok(())
}

fn read_n_values(path: &Path) -> anyhow::Result<Vec<u64>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        let n: u64 = field
            .parse()
            .with_context(|| format!("row {}: `{field}` is not a positive integer", i + 2))?;
        if n == 0 {
            bail!("row {}: sample size must be positive", i + 2);
        }
        out.push(n);
    }
    if out.is_empty() {
        bail!("{} holds no sample sizes", path.display());
    }
    Ok(out)
}

#[derive(Serialize)]
struct SdRow {
    model: &'static str,
    n: Option<u64>,
    country: usize,
    component: usize,
    sd: f64,
}

#[derive(Serialize)]
struct MseRow {
    model: &'static str,
    n: Option<u64>,
    country: usize,
    mse: f64,
}

#[derive(Serialize)]
struct QuantilePair {
    n: u64,
    country: usize,
    component: usize,
    probability: f64,
    baseline: f64,
    approximate: f64,
}

#[derive(Serialize)]
struct SampleSizeRow {
    n: u64,
    sd_discrepancy: f64,
    mse_discrepancy: f64,
    r_lower: f64,
    r_median: f64,
    r_upper: f64,
}

pub fn sample_size(
    n_values: Option<&Path>,
    n_grid: Option<&str>,
    common: &Common,
    mode: Execution,
) -> anyhow::Result<()> {
    let started = now_unix();
    let mut config = effective_config(common)?;
    if let Some(grid) = n_grid {
        config.sample_size.n_grid = grid
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<u64>()
                    .with_context(|| format!("bad N `{x}`"))
            })
            .collect::<anyhow::Result<_>>()?;
    }
    let ss = &config.sample_size;
    if !ss.n_grid.contains(&ss.quantile_n) {
        bail!("quantile_n {} is not on the N grid", ss.quantile_n);
    }
    let mut hashes = BTreeMap::new();
    let mut rng = chain_rng(ss.mcmc.seed, 0);
    let sizes = match n_values {
        Some(p) => {
            hashes.insert("n_values".to_string(), sha256_file(p)?);
            read_n_values(p)?
        }
        None => synthetic_sample_sizes(&ss.panel, &mut rng),
    };
    let panel = synthesize_panel(&ss.panel, &sizes, &mut rng);
    let report = run_sample_size_experiment(&panel, ss, mode)?;

    let mut sd_rows = Vec::new();
    let mut mse_rows = Vec::new();
    let variants = std::iter::once(("baseline", None, &report.baseline)).chain(
        report
            .approximate
            .iter()
            .map(|(n, s)| ("approximate", Some(*n), s)),
    );
    for (model, n, summaries) in variants {
        for s in summaries {
            mse_rows.push(MseRow {
                model,
                n,
                country: s.country,
                mse: s.mse,
            });
            for (component, &sd) in s.sd.iter().enumerate() {
                sd_rows.push(SdRow {
                    model,
                    n,
                    country: s.country,
                    component,
                    sd,
                });
            }
        }
    }
    let mut pairs = Vec::new();
    let at = report.at(ss.quantile_n).expect("checked against the grid");
    for (a, b) in at.iter().zip(&report.baseline) {
        for (component, (qa, qb)) in a.quantiles.iter().zip(&b.quantiles).enumerate() {
            for (l, p) in [0.025, 0.5, 0.975].into_iter().enumerate() {
                pairs.push(QuantilePair {
                    n: ss.quantile_n,
                    country: a.country,
                    component,
                    probability: p,
                    baseline: qb[l],
                    approximate: qa[l],
                });
            }
        }
    }
    let summary: Vec<SampleSizeRow> = ss
        .n_grid
        .iter()
        .map(|&n| {
            let r = report.quantile_correlation(n).expect("grid value");
            SampleSizeRow {
                n,
                sd_discrepancy: report.sd_discrepancy(n).expect("grid value"),
                mse_discrepancy: report.mse_discrepancy(n).expect("grid value"),
                r_lower: r[0],
                r_median: r[1],
                r_upper: r[2],
            }
        })
        .collect();

    let mut dir = OutputDir::create(&common.out)?;
    dir.write_json("config.json", &config)?;
    dir.write_json("panel.json", &panel)?;
    dir.write_rows(
        "sd_distribution.csv",
        &["model", "n", "country", "component", "sd"],
        &sd_rows,
    )?;
    dir.write_rows(
        "mse_distribution.csv",
        &["model", "n", "country", "mse"],
        &mse_rows,
    )?;
    dir.write_rows(
        "quantiles.csv",
        &[
            "n",
            "country",
            "component",
            "probability",
            "baseline",
            "approximate",
        ],
        &pairs,
    )?;
    dir.write_rows(
        "summary.csv",
        &[
            "n",
            "sd_discrepancy",
            "mse_discrepancy",
            "r_lower",
            "r_median",
            "r_upper",
        ],
        &summary,
    )?;
    dir.finish(
        "simulate-appendix-a",
        ss.mcmc.seed,
        config_hash(&config)?,
        hashes,
        started,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct PsrfRow<'a> {
    parameter: &'a str,
    psrf: f64,
}

#[derive(Serialize)]
struct HistogramRow {
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Serialize)]
struct DiagnosticsSummary {
    chains: usize,
    draws_per_chain: usize,
    parameters: usize,
    below_threshold: usize,
    fraction_below: f64,
    threshold: f64,
    required_fraction: f64,
    pass: bool,
}

pub fn diagnostics(draws_dir: &Path, out: &Path, mode: Execution) -> anyhow::Result<()> {
    let started = now_unix();
    let run = load_fit(draws_dir)?;
    let table = psrf_table(&run.model, &run.draws, &run.template, mode)?;
    let threshold = run.config.psrf_threshold;
    let below = table.iter().filter(|(_, r)| *r < threshold).count();
    let fraction = below as f64 / table.len().max(1) as f64;

    let rows: Vec<PsrfRow> = table
        .iter()
        .map(|(p, r)| PsrfRow {
            parameter: p,
            psrf: *r,
        })
        .collect();
    let mut worst: Vec<&PsrfRow> = rows.iter().collect();
    worst.sort_by(|a, b| {
        b.psrf
            .total_cmp(&a.psrf)
            .then_with(|| a.parameter.cmp(b.parameter))
    });
    worst.truncate(20);
    let values: Vec<f64> = table.iter().map(|(_, r)| *r).collect();
    let hist: Vec<HistogramRow> = histogram(&values, 1.0, 1.2, 20)
        .into_iter()
        .map(|(lower, upper, count)| HistogramRow {
            lower,
            upper,
            count,
        })
        .collect();

    let mut dir = OutputDir::create(out)?;
    dir.write_rows("psrf.csv", &["parameter", "psrf"], &rows)?;
    dir.write_rows("psrf_worst.csv", &["parameter", "psrf"], &worst)?;
    dir.write_rows("psrf_histogram.csv", &["lower", "upper", "count"], &hist)?;
    let summary = DiagnosticsSummary {
        chains: run.draws.n_chains(),
        draws_per_chain: run.draws.n_draws(),
        parameters: table.len(),
        below_threshold: below,
        fraction_below: fraction,
        threshold,
        required_fraction: run.config.psrf_pass_fraction,
        pass: fraction >= run.config.psrf_pass_fraction,
    };
    dir.write_json("diagnostics.json", &summary)?;
    let (config_sha, hashes) = fit_hashes(draws_dir)?;
    dir.finish(
        "diagnostics",
        run.config.mcmc.seed,
        config_sha,
        hashes,
        started,
    )?;
    eprintln!(
        "diagnostics: {below}/{} parameters below {threshold} ({})",
        table.len(),
        if summary.pass { "pass" } else { "fail" }
    );
    Ok(())
}

pub fn synth(common: &Common) -> anyhow::Result<()> {
    let started = now_unix();
    let config = effective_config(common)?;
    let hierarchy = config.hierarchy()?;
    let corpus = synthesize_corpus(
        &config.corpus,
        &hierarchy,
        &mut chain_rng(config.mcmc.seed, 0),
    );
    let mut dir = OutputDir::create(&common.out)?;
    let mut buf = Vec::new();
    write_surveys(&mut buf, &hierarchy, &corpus.surveys)?;
    dir.write_bytes("surveys.csv", &buf)?;
    buf.clear();
    write_region_map(&mut buf, &corpus.regions)?;
    dir.write_bytes("regions.csv", &buf)?;
    buf.clear();
    write_un_urban(&mut buf, &corpus.urban)?;
    dir.write_bytes("urban.csv", &buf)?;
    dir.write_json("truth.json", &corpus.truth)?;
    dir.finish(
        "synth",
        config.mcmc.seed,
        config_hash(&config)?,
        BTreeMap::new(),
        started,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_specs() {
        assert_eq!(
            parse_years("2000:2003").unwrap(),
            vec![2000, 2001, 2002, 2003]
        );
        assert_eq!(parse_years("2001, 1999").unwrap(), vec![2001, 1999]);
        assert!(parse_years("2003:2000").is_err());
        assert!(parse_years("x").is_err());
    }
}
