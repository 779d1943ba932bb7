use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Race, RatingLabel, LABEL_COUNT};
use crate::error::{Error, Result};
use crate::hem_stats::{cv_prob, discretize, spd_for, wilson_interval, CvProb, Modality, COMPARISONS, HEM_BINS, Z95};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: RatingLabel,
    pub accuracy: f64,
    pub positive_rate: f64,
    /// Male vs other genders; `None` when one side is empty.
    pub spd_gender: Option<f64>,
    /// White vs other races.
    pub spd_race: Option<f64>,
    /// The same differences measured on the true labels.
    pub true_spd_gender: Option<f64>,
    pub true_spd_race: Option<f64>,
    /// `None` when fewer than two intersection groups are present.
    pub cv_prob: Option<CvProb>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRate {
    pub bin: usize,
    pub n: usize,
    pub x: usize,
    pub rate: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

/// Predicted positive rate per HEM bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub label: RatingLabel,
    pub modality: Modality,
    pub bins: Vec<BinRate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub n: usize,
    pub mean_accuracy: f64,
    pub labels: Vec<LabelReport>,
    pub curves: Vec<PredictionCurve>,
}

impl FairnessReport {
    pub fn label(&self, label: RatingLabel) -> &LabelReport {
        &self.labels[label.index()]
    }
}

fn threshold(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

/// Binary accuracy at threshold 0.5, parity differences and `CV_prob` per
/// label, and predicted-rate curves over the normalized HEM bins.
pub fn evaluate(
    probs: &[[f64; LABEL_COUNT]],
    truth: &[[u8; LABEL_COUNT]],
    genders: &[Gender],
    races: &[Race],
    hems: &[[f64; 2]],
) -> Result<FairnessReport> {
    let n = probs.len();
    if n == 0 {
        return Err(Error::invalid("cannot evaluate an empty test set"));
    }
    for len in [truth.len(), genders.len(), races.len(), hems.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, got: len });
        }
    }
    let mut labels = Vec::with_capacity(LABEL_COUNT);
    let mut curves = Vec::new();
    for label in RatingLabel::ALL {
        let k = label.index();
        let pred: Vec<u8> = probs.iter().map(|p| threshold(p[k])).collect();
        let actual: Vec<u8> = truth.iter().map(|t| t[k]).collect();
        let correct = pred.iter().zip(&actual).filter(|(a, b)| a == b).count();
        let [gender_cmp, race_cmp] = COMPARISONS;
        labels.push(LabelReport {
            label,
            accuracy: correct as f64 / n as f64,
            positive_rate: pred.iter().map(|&p| f64::from(p)).sum::<f64>() / n as f64,
            spd_gender: spd_for(&pred, genders, races, gender_cmp.0).ok(),
            spd_race: spd_for(&pred, genders, races, race_cmp.0).ok(),
            true_spd_gender: spd_for(&actual, genders, races, gender_cmp.0).ok(),
            true_spd_race: spd_for(&actual, genders, races, race_cmp.0).ok(),
            cv_prob: cv_prob(&pred, genders, races).ok(),
        });
        for modality in Modality::ALL {
            let mut counts = vec![(0usize, 0usize); HEM_BINS];
            for (h, &p) in hems.iter().zip(&pred) {
                let v = match modality {
                    Modality::Transcript => h[0],
                    Modality::Gesture => h[1],
                };
                let b = usize::from(discretize(v)?);
                counts[b].0 += 1;
                counts[b].1 += usize::from(p);
            }
            let bins = counts
                .into_iter()
                .enumerate()
                .map(|(bin, (n, x))| BinRate {
                    bin,
                    n,
                    x,
                    rate: (n > 0).then(|| x as f64 / n as f64),
                    ci95: wilson_interval(x, n, Z95),
                })
                .collect();
            curves.push(PredictionCurve { label, modality, bins });
        }
    }
    let mean_accuracy = labels.iter().map(|l| l.accuracy).sum::<f64>() / LABEL_COUNT as f64;
    Ok(FairnessReport {
        n,
        mean_accuracy,
        labels,
        curves,
    })
}
