#![allow(dead_code)]

use fuelmix::data::synth::{synthesize_corpus, Corpus, CorpusSpec};
use fuelmix::model::{FuelHierarchy, Model, Priors};
use fuelmix::splines::{build_thin_plate_basis, TimeScale};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn corpus(spec: &CorpusSpec, seed: u64) -> Corpus {
    synthesize_corpus(
        spec,
        &FuelHierarchy::default(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

pub fn model_for(corpus: &Corpus, k: usize, n_total: u64) -> Model {
    let years: Vec<i32> = (1990..=2017).collect();
    let basis = build_thin_plate_basis(&years, k, TimeScale::new(1990, 2017).unwrap()).unwrap();
    Model::assemble(
        FuelHierarchy::default(),
        corpus.regions.clone(),
        basis,
        &corpus.surveys,
        corpus.urban.clone(),
        n_total,
        Priors::default(),
    )
    .unwrap()
}

/// Three countries in two regions with every kind of missingness.
pub fn small_model(seed: u64) -> (Model, Corpus) {
    let spec = CorpusSpec {
        countries: 3,
        min_surveys: 4,
        max_surveys: 6,
        overall_only_rate: 0.3,
        mid_missing_rate: 0.3,
        lower_missing_rate: 0.3,
        combined_rate: 0.2,
        top_missing_rate: 0.2,
        ..CorpusSpec::default()
    };
    let c = corpus(&spec, seed);
    (model_for(&c, 5, 1_000), c)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
