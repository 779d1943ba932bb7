#![allow(dead_code)]

pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

use hemfair::fair_model::{build_dataset, Dataset};
use hemfair::pipeline::{corpus_hem, HemConfig};
use hemfair::synth::{gen_corpus, SynthConfig, SynthCorpus};

/// A synthetic corpus small enough for unit-scale tests.
pub fn small_corpus(n: usize, seed: u64) -> SynthCorpus {
    gen_corpus(&SynthConfig {
        n_talks: n,
        duration_secs: [20.0, 25.0],
        tokens: [80, 120],
        embedding_dim: 16,
        seed,
        ..Default::default()
    })
    .unwrap()
}

pub fn hem_config() -> HemConfig {
    let mut c = HemConfig::default();
    c.verbal.normalize_topics = true;
    c
}

pub fn small_dataset(n: usize, seed: u64) -> Dataset {
    let c = small_corpus(n, seed);
    let hems = corpus_hem(&c.talks, &c.embeddings, &hem_config(), seed, 1).unwrap();
    build_dataset(&c.talks, &hems, &c.embeddings, 2, seed).unwrap()
}
