//! Mini-batch training with adaptive-moment updates.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

use super::loss::{bce_gradients, gradients, LossConfig, LossParts, Sample};
use super::network::{Adam, Network, DEFAULT_HIDDEN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop once the epoch loss changes by less than this.
    pub plateau: f64,
    /// Use the whole training set as one batch, so the pairwise term runs
    /// over all pairs.
    pub full_batch: bool,
    /// Center and scale inputs with training-set statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 200,
            plateau: 1e-5,
            full_batch: false,
            standardize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Cross-entropy only.
    Bce,
    Fair(LossConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossParts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub net: Network,
    pub trace: Vec<TraceRow>,
}

pub fn train(samples: &[Sample], objective: Objective, cfg: &TrainConfig, seed: u64) -> Result<Trained> {
    train_observed(samples, objective, cfg, seed, |_, _| {})
}

/// Like [`train`], calling `observe` with the network after every epoch.
pub fn train_observed(
    samples: &[Sample],
    objective: Objective,
    cfg: &TrainConfig,
    seed: u64,
    mut observe: impl FnMut(usize, &Network),
) -> Result<Trained> {
    let first = samples.first().ok_or_else(|| Error::invalid("training set is empty"))?;
    if cfg.batch_size == 0 || cfg.hidden == 0 {
        return Err(Error::invalid("batch size and hidden width must be positive"));
    }
    let dim = first.x.len();
    if let Some(bad) = samples.iter().find(|s| s.x.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: bad.x.len(),
        });
    }
    let mut net = Network::init(dim, cfg.hidden, seed);
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut rng = seeds::rng(seed, 0x7368_7566);
    let batch_size = if cfg.full_batch { samples.len() } else { cfg.batch_size };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (parts, grads) = match objective {
                Objective::Bce => {
                    let (l, g) = bce_gradients(&net, &batch)?;
                    (LossParts { pred: l, hem: 0.0, total: l }, g)
                }
                Objective::Fair(loss) => gradients(&net, &batch, &loss)?,
            };
            adam.update(&mut net, &grads);
            sum.pred += parts.pred;
            sum.hem += parts.hem;
            sum.total += parts.total;
            batches += 1;
        }
        let b = batches as f64;
        let row = TraceRow {
            epoch,
            loss: LossParts {
                pred: sum.pred / b,
                hem: sum.hem / b,
                total: sum.total / b,
            },
        };
        if !net.is_finite() {
            return Err(Error::invalid(format!("parameters diverged at epoch {epoch}")));
        }
        observe(epoch, &net);
        let plateaued = trace
            .last()
            .is_some_and(|prev: &TraceRow| (prev.loss.total - row.loss.total).abs() < cfg.plateau);
        trace.push(row);
        if plateaued {
            break;
        }
    }
    Ok(Trained { net, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LABEL_COUNT;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = seeds::rng(seed, 1);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = std::array::from_fn(|k| f64::from(u8::from(x[k % 6] + 0.3 * x[(k + 1) % 6] > 0.0)));
                Sample {
                    hem: [rng.random(), rng.random()],
                    x,
                    y,
                }
            })
            .collect()
    }

    fn small() -> TrainConfig {
        TrainConfig {
            hidden: 16,
            learning_rate: 1e-2,
            batch_size: 16,
            epochs: 60,
            plateau: 0.0,
            full_batch: false,
            standardize: false,
        }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let data = toy(200, 3);
        let t = train(&data, Objective::Bce, &small(), 1).unwrap();
        assert_eq!(t.trace.len(), 60);
        assert!(t.trace[59].loss.total < 0.5 * t.trace[0].loss.total);
        let correct: usize = data
            .iter()
            .map(|s| {
                let p = t.net.forward(&s.x).unwrap();
                (0..LABEL_COUNT).filter(|&k| (p[k] >= 0.5) == (s.y[k] == 1.0)).count()
            })
            .sum();
        assert!(correct as f64 / (200 * LABEL_COUNT) as f64 > 0.9);
    }

    #[test]
    fn zero_penalty_matches_plain_trajectory() {
        let data = toy(90, 4);
        let mut plain = Vec::new();
        let a = train_observed(&data, Objective::Bce, &small(), 7, |_, n| plain.push(n.clone())).unwrap();
        let mut fair = Vec::new();
        let cfg = LossConfig::new(0.0, 0.0).unwrap();
        let b = train_observed(&data, Objective::Fair(cfg), &small(), 7, |_, n| fair.push(n.clone())).unwrap();
        assert_eq!(plain, fair);
        assert_eq!(a.net, b.net);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn deterministic_and_stops_on_plateau() {
        let data = toy(50, 5);
        let cfg = LossConfig::new(0.2, 1.0).unwrap();
        let a = train(&data, Objective::Fair(cfg), &small(), 2).unwrap();
        let b = train(&data, Objective::Fair(cfg), &small(), 2).unwrap();
        assert_eq!(a.net, b.net);
        let mut loose = small();
        loose.plateau = 10.0;
        assert_eq!(train(&data, Objective::Bce, &loose, 2).unwrap().trace.len(), 2);
        assert!(train(&[], Objective::Bce, &small(), 2).is_err());
    }
}
