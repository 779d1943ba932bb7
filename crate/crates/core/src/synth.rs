//! Seeded synthetic corpora with planted HEM-rating links and group bias.
//!
//! Every talk has two latent levels in `[0, 1]`: topic diversity, which
//! controls how many word pools its transcript draws from, and gesture
//! variability, which controls how fast the coupling between its AU
//! channels drifts. Each rating label has a positive probability given by
//! a link function of the mean latent level plus an optional group offset.
//! The latents are written to a sidecar file that the pipeline never reads.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_au_csv, write_manifest, AuFrameSeries, Gender, ManifestEntry, Race, RatingLabel, TalkRecord,
    AU_COUNT, LABEL_COUNT,
};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seeds;

/// Shape of a label's positive probability as a function of latent quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `1 - (1 - q)^2`: concave and increasing.
    Saturating,
    /// `4 q (1 - q)`: inverted U.
    Hump,
    Increasing,
    Decreasing,
}

impl Link {
    pub fn shape(self, q: f64) -> f64 {
        match self {
            Link::Saturating => 1.0 - (1.0 - q).powi(2),
            Link::Hump => 4.0 * q * (1.0 - q),
            Link::Increasing => q,
            Link::Decreasing => 1.0 - q,
        }
    }

    /// Mean of `shape(q)` for `q` the average of two independent uniforms
    /// (`E[q] = 1/2`, `E[q^2] = 7/24`).
    fn mean(self) -> f64 {
        match self {
            Link::Saturating => 17.0 / 24.0,
            Link::Hump => 5.0 / 6.0,
            Link::Increasing | Link::Decreasing => 0.5,
        }
    }
}

/// Additive positive-probability offset for talks matching both selectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasOffset {
    pub label: RatingLabel,
    #[serde(default)]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub race: Option<Race>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_talks: usize,
    pub pools: usize,
    pub words_per_pool: usize,
    /// Zipf exponent of word frequencies within a pool.
    pub word_skew: f64,
    pub embedding_dim: usize,
    /// Norm of a word's deviation from its pool center (centers have norm ~1).
    pub pool_spread: f64,
    pub tokens: [usize; 2],
    /// Consecutive tokens drawn from one pool.
    pub block_len: usize,
    /// Pool weights fall off as `exp(-rank * pool_decay * (1 - m))`, where
    /// `m` maps diversity 0..1 linearly onto `mixing_span`.
    pub pool_decay: f64,
    pub mixing_span: [f64; 2],
    /// Loading-angle drift over a whole talk at variability 1, in radians.
    pub max_drift: f64,
    pub duration_secs: [f64; 2],
    pub fps: f64,
    /// Fixes every talk's topic diversity instead of drawing it uniformly.
    pub diversity: Option<f64>,
    /// Fixes every talk's gesture variability instead of drawing it uniformly.
    pub variability: Option<f64>,
    pub links: [Link; LABEL_COUNT],
    pub link_amplitude: f64,
    /// Offsets are centered on the population so the corpus-wide positive
    /// rate of each label stays near 1/2; gaps between groups are kept.
    pub bias: Vec<BiasOffset>,
    pub gender_proportions: [f64; 3],
    pub race_proportions: [f64; 4],
    pub rating_total: [u64; 2],
    /// Share of a talk's ratings going to a label it is positive/negative on.
    pub rate_positive: f64,
    pub rate_negative: f64,
    /// Views are `exp(10 + views_slope * q + views_noise * N(0, 1))` where
    /// `q` is the talk's mean latent quality.
    pub views_slope: f64,
    pub views_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_talks: 200,
            pools: 12,
            words_per_pool: 40,
            word_skew: 1.0,
            embedding_dim: crate::embeddings::EMBEDDING_DIM,
            pool_spread: 0.5,
            tokens: [250, 400],
            block_len: 25,
            pool_decay: 2.0,
            mixing_span: [0.5, 1.0],
            max_drift: 0.75 * std::f64::consts::PI,
            duration_secs: [40.0, 60.0],
            fps: crate::corpus::DEFAULT_FPS,
            diversity: None,
            variability: None,
            links: [
                Link::Saturating,
                Link::Hump,
                Link::Saturating,
                Link::Decreasing,
                Link::Decreasing,
                Link::Decreasing,
            ],
            link_amplitude: 0.6,
            bias: Vec::new(),
            gender_proportions: [0.5, 0.4, 0.1],
            race_proportions: [0.4, 0.2, 0.2, 0.2],
            rating_total: [1000, 3000],
            rate_positive: 0.14,
            rate_negative: 0.05,
            views_slope: 1.0,
            views_noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalkTruth {
    pub id: String,
    pub diversity: f64,
    pub variability: f64,
    pub positive_prob: [f64; LABEL_COUNT],
    pub latent_label: [u8; LABEL_COUNT],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Centered offset per label, indexed `[label][gender][race]`.
    pub offsets: Vec<[[f64; 4]; 3]>,
    /// Probabilities that fell outside `[0, 1]` and were clipped.
    pub clip_events: usize,
    pub talks: Vec<TalkTruth>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub talks: Vec<TalkRecord>,
    pub embeddings: EmbeddingTable,
    pub truth: GroundTruth,
}

fn check_proportions(p: &[f64], what: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} proportions must be non-negative and sum to 1")));
    }
    Ok(())
}

fn validate(cfg: &SynthConfig) -> Result<()> {
    if cfg.n_talks == 0 || cfg.pools == 0 || cfg.words_per_pool == 0 || cfg.block_len == 0 {
        return Err(Error::invalid("talk, pool, word and block counts must be positive"));
    }
    if cfg.tokens[0] == 0 || cfg.tokens[0] > cfg.tokens[1] {
        return Err(Error::invalid("token range must be non-empty and positive"));
    }
    if !(cfg.duration_secs[0] >= 1.0 && cfg.duration_secs[0] <= cfg.duration_secs[1]) || !(cfg.fps > 0.0) {
        return Err(Error::invalid("talks must last at least 1 s at a positive frame rate"));
    }
    for level in [cfg.diversity, cfg.variability].into_iter().flatten() {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::invalid("latent levels must lie in [0, 1]"));
        }
    }
    if cfg.rating_total[0] == 0 || cfg.rating_total[0] > cfg.rating_total[1] {
        return Err(Error::invalid("rating total range must be non-empty and positive"));
    }
    let shares = cfg.rate_positive.max(cfg.rate_negative) * LABEL_COUNT as f64;
    if cfg.rate_positive < 0.0 || cfg.rate_negative < 0.0 || shares > 1.0 {
        return Err(Error::invalid("six label shares cannot exceed the rating total"));
    }
    check_proportions(&cfg.gender_proportions, "gender")?;
    check_proportions(&cfg.race_proportions, "race")
}

/// Centered offsets, `[label][gender][race]`.
fn centered_offsets(cfg: &SynthConfig) -> Result<Vec<[[f64; 4]; 3]>> {
    let mut out = vec![[[0.0; 4]; 3]; LABEL_COUNT];
    for b in &cfg.bias {
        for g in Gender::ALL {
            for r in Race::ALL {
                if b.gender.is_none_or(|x| x == g) && b.race.is_none_or(|x| x == r) {
                    out[b.label.index()][g.index()][r.index()] += b.offset;
                }
            }
        }
    }
    for (label, table) in out.iter_mut().enumerate() {
        let mut mean = 0.0;
        for g in Gender::ALL {
            for r in Race::ALL {
                mean += cfg.gender_proportions[g.index()] * cfg.race_proportions[r.index()] * table[g.index()][r.index()];
            }
        }
        let link = cfg.links[label];
        for g in Gender::ALL {
            for r in Race::ALL {
                let off = table[g.index()][r.index()] - mean;
                table[g.index()][r.index()] = off;
                // the link term spans [-amp * mean, amp * (1 - mean)]
                let lo = 0.5 - cfg.link_amplitude * link.mean() + off;
                let hi = 0.5 + cfg.link_amplitude * (1.0 - link.mean()) + off;
                let populated = cfg.gender_proportions[g.index()] * cfg.race_proportions[r.index()] > 0.0;
                if populated && (lo > 1.0 || hi < 0.0) {
                    return Err(Error::invalid(format!(
                        "offset for {} / {} on `{}` leaves no talk with a probability in [0, 1]",
                        g.name(),
                        r.name(),
                        RatingLabel::ALL[label]
                    )));
                }
            }
        }
    }
    Ok(out)
}

fn word(pool: usize, w: usize) -> String {
    format!("t{pool:02}w{w:03}")
}

fn gen_embeddings(cfg: &SynthConfig) -> Result<EmbeddingTable> {
    let mut rng = seeds::rng(cfg.seed, 0);
    let scale = 1.0 / (cfg.embedding_dim as f64).sqrt();
    let mut table = EmbeddingTable::new(cfg.embedding_dim);
    for p in 0..cfg.pools {
        let center: Vec<f64> = (0..cfg.embedding_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        for w in 0..cfg.words_per_pool {
            let v = center
                .iter()
                .map(|c| c + rng.sample::<f64, _>(StandardNormal) * scale * cfg.pool_spread)
                .collect();
            table.insert(word(p, w), v)?;
        }
    }
    Ok(table)
}

fn gen_transcript(cfg: &SynthConfig, diversity: f64, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let n = rng.random_range(cfg.tokens[0]..=cfg.tokens[1]);
    let mut order: Vec<usize> = (0..cfg.pools).collect();
    order.shuffle(rng);
    // low diversity concentrates almost all mass on the first pool
    let m = cfg.mixing_span[0] + (cfg.mixing_span[1] - cfg.mixing_span[0]) * diversity;
    let decay = cfg.pool_decay * (1.0 - m);
    let pool_weights: Vec<f64> = (0..cfg.pools).map(|r| (-(r as f64) * decay).exp()).collect();
    let pools = WeightedIndex::new(&pool_weights).map_err(|e| Error::invalid(e.to_string()))?;
    let zipf: Vec<f64> = (0..cfg.words_per_pool).map(|w| ((w + 1) as f64).powf(-cfg.word_skew)).collect();
    let words = WeightedIndex::new(&zipf).map_err(|e| Error::invalid(e.to_string()))?;
    let mut tokens = Vec::with_capacity(n);
    while tokens.len() < n {
        let pool = order[pools.sample(rng)];
        for _ in 0..cfg.block_len.min(n - tokens.len()) {
            tokens.push(word(pool, words.sample(rng)));
        }
    }
    Ok(tokens)
}

/// Channels load on two shared oscillating factors; each channel's loading
/// angle drifts over the talk at a rate proportional to `variability`.
fn gen_au_series(cfg: &SynthConfig, variability: f64, rng: &mut ChaCha8Rng) -> Result<AuFrameSeries> {
    let secs = rng.random_range(cfg.duration_secs[0]..=cfg.duration_secs[1]);
    let n = (secs * cfg.fps).round() as usize;
    let tau = std::f64::consts::TAU;
    let phase: [f64; 2] = [rng.random::<f64>() * tau, rng.random::<f64>() * tau];
    let freq = [0.23, 0.41];
    let mut angle0 = [0.0; AU_COUNT];
    let mut drift = [0.0; AU_COUNT];
    let mut own = [(0.0, 0.0); AU_COUNT];
    for j in 0..AU_COUNT {
        angle0[j] = rng.random::<f64>() * tau;
        drift[j] = rng.random_range(-1.0..=1.0) * cfg.max_drift;
        own[j] = (rng.random_range(0.5..1.5), rng.random::<f64>() * tau);
    }
    let noise = Normal::new(0.0, 0.3).map_err(|e| Error::invalid(e.to_string()))?;
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / cfg.fps;
            let progress = i as f64 / n as f64;
            let f1 = (tau * freq[0] * t + phase[0]).sin();
            let f2 = (tau * freq[1] * t + phase[1]).sin();
            std::array::from_fn(|j| {
                let theta = angle0[j] + variability * drift[j] * progress;
                let (w, psi) = own[j];
                let v = 2.5
                    + theta.cos() * f1
                    + theta.sin() * f2
                    + 0.25 * (tau * w * t + psi).sin()
                    + noise.sample(rng);
                (v.max(0.0) * 1e4).round() / 1e4
            })
        })
        .collect();
    AuFrameSeries::new(cfg.fps, frames)
}

/// Splits `total` ratings multinomially with the given label shares.
fn gen_counts(total: u64, shares: &[f64; LABEL_COUNT], rng: &mut ChaCha8Rng) -> Result<[u64; LABEL_COUNT]> {
    let mut counts = [0; LABEL_COUNT];
    let mut remaining = total;
    let mut mass = 1.0;
    for (l, &share) in shares.iter().enumerate() {
        let p = if mass > 0.0 { (share / mass).clamp(0.0, 1.0) } else { 0.0 };
        counts[l] = Binomial::new(remaining, p)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng);
        remaining -= counts[l];
        mass -= share;
    }
    Ok(counts)
}

pub fn gen_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    validate(cfg)?;
    let offsets = centered_offsets(cfg)?;
    let embeddings = gen_embeddings(cfg)?;
    let genders = WeightedIndex::new(cfg.gender_proportions).map_err(|e| Error::invalid(e.to_string()))?;
    let races = WeightedIndex::new(cfg.race_proportions).map_err(|e| Error::invalid(e.to_string()))?;
    let width = cfg.n_talks.to_string().len().max(4);
    let mut talks = Vec::with_capacity(cfg.n_talks);
    let mut truths = Vec::with_capacity(cfg.n_talks);
    let mut clip_events = 0;
    for i in 0..cfg.n_talks {
        let mut rng = seeds::rng(cfg.seed, i as u64 + 1);
        let id = format!("talk{i:0width$}");
        let gender = Gender::ALL[genders.sample(&mut rng)];
        let race = Race::ALL[races.sample(&mut rng)];
        let diversity = cfg.diversity.unwrap_or_else(|| rng.random());
        let variability = cfg.variability.unwrap_or_else(|| rng.random());
        let transcript = gen_transcript(cfg, diversity, &mut rng)?;
        let au_series = gen_au_series(cfg, variability, &mut rng)?;

        let q = 0.5 * (diversity + variability);
        let mut positive_prob = [0.0; LABEL_COUNT];
        let mut latent_label = [0; LABEL_COUNT];
        let mut shares = [0.0; LABEL_COUNT];
        for l in 0..LABEL_COUNT {
            let link = cfg.links[l];
            let p = 0.5 + cfg.link_amplitude * (link.shape(q) - link.mean()) + offsets[l][gender.index()][race.index()];
            if !(0.0..=1.0).contains(&p) {
                clip_events += 1;
            }
            positive_prob[l] = p.clamp(0.0, 1.0);
            latent_label[l] = u8::from(rng.random::<f64>() < positive_prob[l]);
            shares[l] = if latent_label[l] == 1 { cfg.rate_positive } else { cfg.rate_negative };
        }
        let total = rng.random_range(cfg.rating_total[0]..=cfg.rating_total[1]);
        let rating_counts = gen_counts(total, &shares, &mut rng)?;
        let views = (10.0 + cfg.views_slope * q + cfg.views_noise * rng.sample::<f64, _>(StandardNormal)).exp().round() as u64;

        truths.push(TalkTruth {
            id: id.clone(),
            diversity,
            variability,
            positive_prob,
            latent_label,
        });
        talks.push(TalkRecord {
            id,
            transcript,
            au_series,
            rating_counts,
            total_rating_count: total,
            views,
            gender,
            race,
            doc_vec: None,
        });
    }
    Ok(SynthCorpus {
        talks,
        embeddings,
        truth: GroundTruth {
            config: cfg.clone(),
            offsets,
            clip_events,
            talks: truths,
        },
    })
}

pub fn manifest_entry(talk: &TalkRecord) -> ManifestEntry {
    ManifestEntry {
        id: talk.id.clone(),
        transcript_path: format!("transcripts/{}.txt", talk.id),
        au_csv_path: format!("au/{}.csv", talk.id),
        rating_counts: RatingLabel::ALL
            .iter()
            .map(|l| (l.name().to_string(), talk.rating_counts[l.index()]))
            .collect(),
        total_rating_count: talk.total_rating_count,
        views: talk.views,
        gender: talk.gender.name().to_string(),
        race: talk.race.name().to_string(),
        doc_vec: talk.doc_vec.clone(),
    }
}

/// Writes `manifest.jsonl`, `transcripts/`, `au/`, `embeddings.txt` and
/// the `truth.json` sidecar under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["transcripts", "au"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(corpus.talks.len());
    for talk in &corpus.talks {
        let entry = manifest_entry(talk);
        let tp = dir.join(&entry.transcript_path);
        fs::write(&tp, talk.transcript.join(" ") + "\n").map_err(|e| Error::io(&tp, e))?;
        write_au_csv(dir.join(&entry.au_csv_path), &talk.au_series)?;
        entries.push(entry);
    }
    write_manifest(dir.join("manifest.jsonl"), &entries)?;
    corpus.embeddings.write(dir.join("embeddings.txt"))?;
    let truth = dir.join("truth.json");
    let json = serde_json::to_string_pretty(&corpus.truth)?;
    fs::write(&truth, json + "\n").map_err(|e| Error::io(&truth, e))
}
