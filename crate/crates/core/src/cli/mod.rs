//! Command-line front end.

mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{load_fit, FittedRun};
pub use config::RunConfig;
pub use manifest::{RunManifest, MANIFEST_FILE};

use crate::exec::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "fuelmix",
    version,
    about = "Tiered GDM trend models for household fuel surveys"
)]
pub struct Cli {
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured sampler seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Survey CSV.
    #[arg(long)]
    pub surveys: PathBuf,
    /// UN urban-proportion CSV (country,year,urban_proportion).
    #[arg(long)]
    pub urban: PathBuf,
    /// Region map CSV (country,region,super_region); falls back to the config.
    #[arg(long)]
    pub regions: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select surveys, fit the model and write posterior draws.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Quantiles of mean trends (and optionally replicates) from a fit.
    Predict {
        /// Output directory of `fit`.
        #[arg(long)]
        draws_dir: PathBuf,
        /// Comma-separated country codes; all fitted countries by default.
        #[arg(long)]
        countries: Option<String>,
        /// `FIRST:LAST` or a comma-separated list; the fitted years by default.
        #[arg(long)]
        years: Option<String>,
        /// Overall trends use the UN urban proportion without the country deviation.
        #[arg(long)]
        un_offsets_only: bool,
        /// Also write quantiles of posterior-predictive replicates.
        #[arg(long)]
        with_survey_variability: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// In-sample replicate scatter data and coverage per fuel and area.
    Check {
        #[arg(long)]
        draws_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit up to a cutoff year and score held-out urban/rural surveys.
    ForecastExperiment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        cutoff_year: i32,
        #[arg(long, default_value_t = 5)]
        horizon: i32,
        #[command(flatten)]
        common: Common,
    },
    /// Artificial-sample-size experiment on a constant-mean GDM panel.
    SimulateAppendixA {
        /// CSV whose first column holds observed respondent totals.
        #[arg(long)]
        n_values: Option<PathBuf>,
        /// Comma-separated artificial sample sizes.
        #[arg(long)]
        n_grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// PSRF of every relative mean and dispersion of a fit.
    Diagnostics {
        #[arg(long)]
        draws_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus and its ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mode = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Fit { data, common } => commands::fit(&data, &common, mode),
        Command::Predict {
            draws_dir,
            countries,
            years,
            un_offsets_only,
            with_survey_variability,
            seed,
            out,
        } => commands::predict(
            &draws_dir,
            countries.as_deref(),
            years.as_deref(),
            un_offsets_only,
            with_survey_variability,
            seed,
            &out,
            mode,
        ),
        Command::Check {
            draws_dir,
            seed,
            out,
        } => commands::check(&draws_dir, seed, &out, mode),
        Command::ForecastExperiment {
            data,
            cutoff_year,
            horizon,
            common,
        } => commands::forecast(&data, cutoff_year, horizon, &common, mode),
        Command::SimulateAppendixA {
            n_values,
            n_grid,
            common,
        } => commands::sample_size(n_values.as_deref(), n_grid.as_deref(), &common, mode),
        Command::Diagnostics { draws_dir, out } => commands::diagnostics(&draws_dir, &out, mode),
        Command::Synth { common } => commands::synth(&common),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn verbs_parse() {
        let cli = Cli::try_parse_from([
            "fuelmix",
            "forecast-experiment",
            "--surveys",
            "s.csv",
            "--urban",
            "u.csv",
            "--cutoff-year",
            "2012",
            "--out",
            "o",
        ])
        .unwrap();
        match cli.command {
            Command::ForecastExperiment {
                cutoff_year,
                horizon,
                ..
            } => assert_eq!((cutoff_year, horizon), (2012, 5)),
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from([
            "fuelmix",
            "simulate-appendix-a",
            "--n-grid",
            "10,100",
            "--out",
            "o"
        ])
        .is_ok());
    }
}
