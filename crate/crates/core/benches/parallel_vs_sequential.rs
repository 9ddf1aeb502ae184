use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fuelmix::cli::RunConfig;
use fuelmix::data::synth::{
    synthesize_corpus, synthesize_panel, synthetic_sample_sizes, CorpusSpec, PanelSpec,
};
use fuelmix::exec::Execution;
use fuelmix::mcmc::{chain_rng, posterior_replicates, run_chains, McmcConfig};
use fuelmix::model::{FuelHierarchy, Model};
use fuelmix::sample_size::{run_sample_size_experiment, SampleSizeConfig};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn small_model() -> Model {
    let spec = CorpusSpec {
        countries: 3,
        min_surveys: 4,
        max_surveys: 6,
        ..CorpusSpec::default()
    };
    let corpus = synthesize_corpus(&spec, &FuelHierarchy::default(), &mut chain_rng(11, 0));
    let config = RunConfig {
        k: 6,
        ..RunConfig::default()
    };
    config
        .build_model(
            &corpus.surveys,
            corpus.regions,
            corpus.urban,
            config.last_year,
        )
        .expect("synthetic corpus assembles")
}

fn chains(c: &mut Criterion) {
    let model = small_model();
    let mcmc = McmcConfig {
        chains: 4,
        iterations: 200,
        burn_in: 100,
        thin: 2,
        ..McmcConfig::desk()
    };
    let mut group = c.benchmark_group("chains");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| run_chains(&model, &mcmc, mode).unwrap())
        });
    }
    group.finish();

    let (draws, _) = run_chains(&model, &mcmc, Execution::Parallel).unwrap();
    let template = model.initial_state(&mut chain_rng(0, 0));
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| posterior_replicates(&model, &draws, &template, 200, 5, mode).unwrap())
        });
    }
    group.finish();
}

fn sample_size_fits(c: &mut Criterion) {
    let config = SampleSizeConfig {
        panel: PanelSpec {
            countries: 8,
            sample_sizes: 24,
            ..PanelSpec::default()
        },
        n_grid: vec![10, 1_000, 100_000],
        quantile_n: 1_000,
        mcmc: McmcConfig {
            chains: 2,
            iterations: 600,
            burn_in: 200,
            thin: 2,
            ..McmcConfig::desk()
        },
        ..SampleSizeConfig::default()
    };
    let mut rng = chain_rng(3, 0);
    let sizes = synthetic_sample_sizes(&config.panel, &mut rng);
    let panel = synthesize_panel(&config.panel, &sizes, &mut rng);
    let mut group = c.benchmark_group("sample_size_fits");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| run_sample_size_experiment(&panel, &config, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, chains, sample_size_fits);
criterion_main!(benches);
