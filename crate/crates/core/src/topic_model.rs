//! Per-transcript LDA fitted by collapsed Gibbs sampling.
//!
//! A single transcript is cut into fixed-width pseudo-documents so that LDA
//! has several documents to mix over. Topic-word distributions are read off
//! the final sample with symmetric smoothing:
//! `phi[k][w] = (n_kw + beta) / (n_k + V * beta)`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_WINDOW: usize = 50;
/// A trailing chunk shorter than this is merged into its predecessor.
pub const MIN_CHUNK_REMAINDER: usize = 10;

/// Splits a transcript into consecutive non-overlapping windows.
pub fn chunk_transcript<S>(tokens: &[S], window: usize) -> Result<Vec<&[S]>> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot chunk an empty transcript"));
    }
    if window == 0 {
        return Err(Error::invalid("chunk window must be positive"));
    }
    let mut chunks: Vec<&[S]> = tokens.chunks(window).collect();
    if chunks.len() > 1 {
        let last = chunks[chunks.len() - 1];
        if last.len() < MIN_CHUNK_REMAINDER {
            chunks.pop();
            let start = (chunks.len() - 1) * window;
            *chunks.last_mut().unwrap() = &tokens[start..];
        }
    }
    Ok(chunks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 10,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    pub config: LdaConfig,
    /// Sorted vocabulary; column `w` of `phi` belongs to `vocab[w]`.
    pub vocab: Vec<String>,
    /// K x V topic-word probabilities.
    pub phi: Vec<Vec<f64>>,
    /// Topic-word counts of the final sample.
    pub topic_word_counts: Vec<Vec<u32>>,
    pub topic_counts: Vec<u32>,
}

impl LdaModel {
    pub fn topics(&self) -> usize {
        self.phi.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicTopWords {
    pub topic: usize,
    /// `(word, phi)` pairs, highest weight first.
    pub words: Vec<(String, f64)>,
}

/// Collapsed Gibbs state over integer-coded documents.
pub(crate) struct GibbsSampler {
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u16>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    alpha: f64,
    beta: f64,
    vocab_size: usize,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub(crate) fn new(docs: Vec<Vec<u32>>, vocab_size: usize, config: &LdaConfig) -> Self {
        let k = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![vec![0u32; k]; docs.len()];
        let mut topic_word = vec![vec![0u32; vocab_size]; k];
        let mut topic_total = vec![0u32; k];
        let z = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        doc_topic[d][t] += 1;
                        topic_word[t][w as usize] += 1;
                        topic_total[t] += 1;
                        t as u16
                    })
                    .collect()
            })
            .collect();
        Self {
            docs,
            z,
            doc_topic,
            topic_word,
            topic_total,
            alpha: config.alpha(),
            beta: config.beta,
            vocab_size,
            rng,
            weights: vec![0.0; k],
        }
    }

    pub(crate) fn sweep(&mut self) {
        let vbeta = self.vocab_size as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.z[d][i] as usize;
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for (t, weight) in self.weights.iter_mut().enumerate() {
                    total += (f64::from(self.doc_topic[d][t]) + self.alpha)
                        * (f64::from(self.topic_word[t][w]) + self.beta)
                        / (f64::from(self.topic_total[t]) + vbeta);
                    *weight = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self
                    .weights
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.weights.len() - 1);

                self.z[d][i] = new as u16;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn topic_word(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    fn phi(&self) -> Vec<Vec<f64>> {
        let vbeta = self.vocab_size as f64 * self.beta;
        self.topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &n)| {
                let denom = f64::from(n) + vbeta;
                row.iter().map(|&c| (f64::from(c) + self.beta) / denom).collect()
            })
            .collect()
    }
}

pub(crate) fn encode_chunks<S: AsRef<str>>(chunks: &[&[S]]) -> (Vec<String>, Vec<Vec<u32>>) {
    let mut index: BTreeMap<&str, u32> = BTreeMap::new();
    for chunk in chunks {
        for t in *chunk {
            index.entry(t.as_ref()).or_insert(0);
        }
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i as u32;
    }
    let docs = chunks
        .iter()
        .map(|c| c.iter().map(|t| index[t.as_ref()]).collect())
        .collect();
    let vocab = index.keys().map(|s| s.to_string()).collect();
    (vocab, docs)
}

pub fn fit_lda<S: AsRef<str>>(chunks: &[&[S]], config: &LdaConfig) -> Result<LdaModel> {
    if chunks.is_empty() || chunks.iter().all(|c| c.is_empty()) {
        return Err(Error::invalid("LDA needs at least one non-empty chunk"));
    }
    if config.topics == 0 || config.topics > usize::from(u16::MAX) {
        return Err(Error::invalid(format!("unsupported topic count {}", config.topics)));
    }
    if !(config.beta > 0.0) || !(config.alpha() > 0.0) {
        return Err(Error::invalid("LDA priors must be positive"));
    }
    let (vocab, docs) = encode_chunks(chunks);
    let mut sampler = GibbsSampler::new(docs, vocab.len(), config);
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(LdaModel {
        config: config.clone(),
        phi: sampler.phi(),
        topic_word_counts: sampler.topic_word.clone(),
        topic_counts: sampler.topic_total.clone(),
        vocab,
    })
}

/// The `n` most probable words of a topic; ties go to the lexicographically
/// smaller word. Weights are the raw `phi` values.
pub fn top_words(model: &LdaModel, topic: usize, n: usize) -> Result<TopicTopWords> {
    let row = model.phi.get(topic).ok_or_else(|| {
        Error::invalid(format!("topic {topic} out of range (K = {})", model.topics()))
    })?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    // vocab is sorted, so index order is lexicographic order
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let words = order
        .into_iter()
        .take(n)
        .map(|w| (model.vocab[w].clone(), row[w]))
        .collect();
    Ok(TopicTopWords { topic, words })
}

/// Dumps `topic,word,weight` rows for every topic-word pair.
pub fn write_phi_csv(model: &LdaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "topic,word,weight").map_err(io)?;
    for (k, row) in model.phi.iter().enumerate() {
        for (w, p) in row.iter().enumerate() {
            writeln!(out, "{k},{},{p}", model.vocab[w]).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
