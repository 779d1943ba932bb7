//! Fairness-regularized rating predictor: features, network, loss with a
//! HEM-gated pairwise penalty, training, evaluation and grid search.

mod evaluate;
mod features;
mod grid;
mod loss;
mod network;
mod train;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_views, rating_vectors, Gender, Race, TalkRecord, LABEL_COUNT};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::hem_stats::hem_pairs;
use crate::pipeline::TalkHem;
use crate::seeds;

pub use evaluate::{evaluate, BinRate, FairnessReport, LabelReport, PredictionCurve};
pub use features::{build_features, feature_dim, DocEmbedder, DocVector, DOC_DIM, FIXED_DIM};
pub use grid::{grid_search, mean_spd, GridConfig, GridRow};
pub use loss::{bce_gradients, gradients, hem_close, hem_penalty, pred_loss, total_loss, LossConfig, LossParts, Sample, LOG_CLIP};
pub use network::{sigmoid, Activations, Adam, Gradients, Network, DEFAULT_HIDDEN};
pub use train::{train, train_observed, Objective, TraceRow, TrainConfig, Trained};

/// One talk ready for the predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct TalkData {
    pub id: String,
    pub gender: Gender,
    pub race: Race,
    pub features: Vec<f64>,
    pub binary: [u8; LABEL_COUNT],
    /// Normalized `[hem_tr, hem_ges]`.
    pub hem: [f64; 2],
    pub all_oov: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub talks: Vec<TalkData>,
    pub s_max: usize,
    pub input_dim: usize,
}

/// Assembles features, targets and normalized HEM for every talk. `hems`
/// must be in corpus order. Manifest document vectors are used when every
/// talk has one; otherwise the TF-IDF projection baseline is fitted.
pub fn build_dataset(
    corpus: &[TalkRecord],
    hems: &[TalkHem],
    table: &EmbeddingTable,
    gesture_k: usize,
    seed: u64,
) -> Result<Dataset> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    if corpus.len() != hems.len() {
        return Err(Error::Dimension {
            expected: corpus.len(),
            got: hems.len(),
        });
    }
    if let Some((t, h)) = corpus.iter().zip(hems).find(|(t, h)| t.id != h.id) {
        return Err(Error::invalid(format!("HEM row `{}` does not match talk `{}`", h.id, t.id)));
    }
    let ratings = rating_vectors(corpus)?;
    let views = normalize_views(corpus)?;
    let tr: Vec<f64> = hems.iter().map(|h| h.hem_tr_raw).collect();
    let ges: Vec<f64> = hems.iter().map(|h| h.hem_ges_raw).collect();
    let pairs = hem_pairs(&tr, &ges)?;
    let s_max = hems.iter().map(|h| h.segment_eigs.len()).max().unwrap_or(0);

    let embedder = if corpus.iter().all(|t| t.doc_vec.is_some()) {
        None
    } else {
        let docs: Vec<&[String]> = corpus.iter().map(|t| t.transcript.as_slice()).collect();
        Some(DocEmbedder::fit(&docs, table.dim(), seed))
    };

    let mut talks = Vec::with_capacity(corpus.len());
    for (i, t) in corpus.iter().enumerate() {
        let build = || -> Result<TalkData> {
            let doc = match (&embedder, &t.doc_vec) {
                (None, Some(v)) => DocVector {
                    values: v.clone(),
                    all_oov: false,
                },
                (Some(e), _) => e.embed(&t.transcript, table)?,
                (None, None) => unreachable!("embedder exists whenever a vector is missing"),
            };
            let features = build_features(
                &doc.values,
                &hems[i].segment_eigs,
                gesture_k,
                s_max,
                t.gender,
                t.race,
                views.values[i],
            )?;
            Ok(TalkData {
                id: t.id.clone(),
                gender: t.gender,
                race: t.race,
                features,
                binary: ratings[i].binary,
                hem: pairs.pairs[i].point(),
                all_oov: doc.all_oov,
            })
        };
        talks.push(build().map_err(|e| e.for_talk(&t.id))?);
    }
    Ok(Dataset {
        talks,
        s_max,
        input_dim: feature_dim(s_max, gesture_k),
    })
}

/// Train and test indices, stratified by gender x race.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each gender x race stratum and sends `round(test_frac * n)`
/// of its talks to the test side. Both index lists are sorted.
pub fn stratified_split(talks: &[TalkData], test_frac: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_frac) {
        return Err(Error::invalid(format!("test fraction {test_frac} outside [0, 1)")));
    }
    let mut strata: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, t) in talks.iter().enumerate() {
        strata.entry((t.gender.index(), t.race.index())).or_default().push(i);
    }
    let mut rng = seeds::rng(seed, 0x7370_6c74);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let k = (test_frac * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    if train.is_empty() {
        return Err(Error::invalid("split leaves no training talks"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Per-feature centering and scaling fitted on the training talks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features keep a scale of 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let first = rows.first().ok_or_else(|| Error::invalid("no rows to standardize"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained network with the input transform it expects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub net: Network,
    pub scaler: Option<Standardizer>,
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<[f64; LABEL_COUNT]> {
        match &self.scaler {
            Some(s) => self.net.forward(&s.apply(x)),
            None => self.net.forward(x),
        }
    }
}

/// Trains on the `train` indices of `data`, standardizing inputs first
/// when the config asks for it.
pub fn fit(data: &Dataset, split: &Split, objective: Objective, cfg: &TrainConfig, seed: u64) -> Result<(Model, Vec<TraceRow>)> {
    let scaler = if cfg.standardize {
        Some(Standardizer::fit(split.train.iter().map(|&i| data.talks[i].features.as_slice()))?)
    } else {
        None
    };
    let samples: Vec<Sample> = split
        .train
        .iter()
        .map(|&i| {
            let t = &data.talks[i];
            Sample {
                x: scaler.as_ref().map_or_else(|| t.features.clone(), |s| s.apply(&t.features)),
                y: t.binary.map(f64::from),
                hem: t.hem,
            }
        })
        .collect();
    let trained = train(&samples, objective, cfg, seed)?;
    Ok((Model { net: trained.net, scaler }, trained.trace))
}

/// Probabilities for the given talks, in index order.
pub fn predict(model: &Model, data: &Dataset, idx: &[usize]) -> Result<Vec<[f64; LABEL_COUNT]>> {
    idx.iter().map(|&i| model.predict(&data.talks[i].features)).collect()
}

/// Evaluates predictions for the talks at `idx`.
pub fn evaluate_on(data: &Dataset, idx: &[usize], probs: &[[f64; LABEL_COUNT]]) -> Result<FairnessReport> {
    let (mut truth, mut genders, mut races, mut hems) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &i in idx {
        let t = &data.talks[i];
        truth.push(t.binary);
        genders.push(t.gender);
        races.push(t.race);
        hems.push(t.hem);
    }
    evaluate(probs, &truth, &genders, &races, &hems)
}

/// Versioned on-disk form of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub input_dim: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub s_max: usize,
    pub objective: Objective,
    pub train: TrainConfig,
    pub seed: u64,
    pub model: Model,
}

pub const CHECKPOINT_VERSION: u32 = 1;
