//! Model inputs: document vector, padded gesture eigenvalues, one-hot
//! sensitive attributes and normalized views.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Gender, Race};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seeds;

pub const DOC_DIM: usize = 200;

/// Width of everything except the gesture block.
pub const FIXED_DIM: usize = DOC_DIM + 3 + 4 + 1;

pub fn feature_dim(s_max: usize, gesture_k: usize) -> usize {
    FIXED_DIM + gesture_k * s_max
}

/// Baseline document embedder: the TF-IDF-weighted mean of a transcript's
/// word vectors, mapped to 200 dimensions by a seeded Gaussian projection.
#[derive(Clone, Debug, PartialEq)]
pub struct DocEmbedder {
    idf: HashMap<String, f64>,
    default_idf: f64,
    /// `DOC_DIM` rows of the embedding width.
    projection: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocVector {
    pub values: Vec<f64>,
    /// No transcript word was in the embedding table.
    pub all_oov: bool,
}

impl DocEmbedder {
    /// Smoothed idf `ln((1 + N) / (1 + df)) + 1` over the given transcripts.
    pub fn fit<S: AsRef<str>>(transcripts: &[&[S]], embedding_dim: usize, seed: u64) -> Self {
        let n = transcripts.len() as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in transcripts {
            let distinct: HashSet<&str> = doc.iter().map(|t| t.as_ref()).collect();
            for w in distinct {
                *df.entry(w.to_string()).or_default() += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(w, d)| (w, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let mut rng = seeds::rng(seed, 0x646f_6376);
        let scale = 1.0 / (DOC_DIM as f64).sqrt();
        let projection = (0..DOC_DIM)
            .map(|_| {
                (0..embedding_dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                    .collect()
            })
            .collect();
        Self {
            idf,
            default_idf: (1.0 + n).ln() + 1.0,
            projection,
        }
    }

    pub fn embed<S: AsRef<str>>(&self, tokens: &[S], table: &EmbeddingTable) -> Result<DocVector> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot embed an empty transcript"));
        }
        let width = self.projection.first().map_or(0, Vec::len);
        if table.dim() != width {
            return Err(Error::Dimension {
                expected: width,
                got: table.dim(),
            });
        }
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *tf.entry(t.as_ref()).or_default() += 1;
        }
        let mut words: Vec<(&str, usize)> = tf.into_iter().collect();
        words.sort_unstable();
        let mut mean = vec![0.0; width];
        let mut total = 0.0;
        for (w, count) in words {
            let (emb, known) = table.lookup(w);
            if !known {
                continue;
            }
            let weight = count as f64 * self.idf.get(w).copied().unwrap_or(self.default_idf);
            for (m, e) in mean.iter_mut().zip(emb) {
                *m += weight * e;
            }
            total += weight;
        }
        if total == 0.0 {
            return Ok(DocVector {
                values: vec![0.0; DOC_DIM],
                all_oov: true,
            });
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let values = self
            .projection
            .iter()
            .map(|row| row.iter().zip(&mean).map(|(a, b)| a * b).sum())
            .collect();
        Ok(DocVector { values, all_oov: false })
    }
}

/// Concatenates `doc_vec`, the per-segment eigenvalues (zero-padded to
/// `s_max` segments), one-hot gender, one-hot race and normalized views.
pub fn build_features(
    doc_vec: &[f64],
    segment_eigs: &[Vec<f64>],
    gesture_k: usize,
    s_max: usize,
    gender: Gender,
    race: Race,
    views_norm: f64,
) -> Result<Vec<f64>> {
    if doc_vec.len() != DOC_DIM {
        return Err(Error::Dimension {
            expected: DOC_DIM,
            got: doc_vec.len(),
        });
    }
    if segment_eigs.len() > s_max {
        return Err(Error::invalid(format!(
            "{} segments exceed the padded width of {s_max}",
            segment_eigs.len()
        )));
    }
    if !(0.0..=1.0).contains(&views_norm) {
        return Err(Error::invalid(format!("normalized views {views_norm} outside [0, 1]")));
    }
    let mut x = Vec::with_capacity(feature_dim(s_max, gesture_k));
    x.extend_from_slice(doc_vec);
    for eigs in segment_eigs {
        if eigs.len() > gesture_k {
            return Err(Error::Dimension {
                expected: gesture_k,
                got: eigs.len(),
            });
        }
        x.extend_from_slice(eigs);
        x.extend(std::iter::repeat_n(0.0, gesture_k - eigs.len()));
    }
    x.extend(std::iter::repeat_n(0.0, gesture_k * (s_max - segment_eigs.len())));
    x.extend(Gender::ALL.iter().map(|&g| f64::from(u8::from(g == gender))));
    x.extend(Race::ALL.iter().map(|&r| f64::from(u8::from(r == race))));
    x.push(views_norm);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_and_one_hot() {
        let doc = vec![0.5; DOC_DIM];
        let eigs = vec![vec![3.0, 2.0], vec![4.0, 1.0], vec![5.0, 0.5]];
        let x = build_features(&doc, &eigs, 2, 5, Gender::Male, Race::White, 0.25).unwrap();
        assert_eq!(x.len(), 208 + 2 * 5);
        assert_eq!(&x[DOC_DIM..DOC_DIM + 10], &[3.0, 2.0, 4.0, 1.0, 5.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&x[DOC_DIM + 10..DOC_DIM + 13], &[1.0, 0.0, 0.0]);
        assert_eq!(&x[DOC_DIM + 13..DOC_DIM + 17], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(x[DOC_DIM + 17], 0.25);

        let x = build_features(&doc, &[], 2, 3, Gender::OtherGender, Race::Asian, 1.0).unwrap();
        assert_eq!(x.len(), 214);
        assert_eq!(&x[206..209], &[0.0, 0.0, 1.0]);
        assert_eq!(&x[209..213], &[0.0, 0.0, 1.0, 0.0]);

        assert!(build_features(&doc, &eigs, 2, 2, Gender::Male, Race::White, 0.0).is_err());
        assert!(build_features(&doc[1..], &eigs, 2, 5, Gender::Male, Race::White, 0.0).is_err());
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(4);
        t.insert("cat", vec![1.0, 0.0, 2.0, -1.0]).unwrap();
        t.insert("dog", vec![0.0, 3.0, 0.0, 1.0]).unwrap();
        t
    }

    #[test]
    fn single_word_is_projected_directly() {
        let docs: Vec<Vec<&str>> = vec![vec!["cat", "dog"], vec!["dog"]];
        let refs: Vec<&[&str]> = docs.iter().map(Vec::as_slice).collect();
        let e = DocEmbedder::fit(&refs, 4, 3);
        let v = e.embed(&["cat", "cat", "zzz"], &table()).unwrap();
        assert!(!v.all_oov);
        for (d, row) in e.projection.iter().enumerate() {
            let expected: f64 = row.iter().zip([1.0, 0.0, 2.0, -1.0]).map(|(a, b)| a * b).sum();
            assert!((v.values[d] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn tf_idf_weights() {
        let docs: Vec<Vec<&str>> = vec![vec!["cat", "dog"], vec!["dog"], vec!["dog"]];
        let refs: Vec<&[&str]> = docs.iter().map(Vec::as_slice).collect();
        let e = DocEmbedder::fit(&refs, 4, 3);
        let idf_cat = (4.0f64 / 2.0).ln() + 1.0;
        let idf_dog = (4.0f64 / 4.0).ln() + 1.0;
        let (wc, wd) = (idf_cat, 2.0 * idf_dog);
        let mean: Vec<f64> = (0..4)
            .map(|i| (wc * [1.0, 0.0, 2.0, -1.0][i] + wd * [0.0, 3.0, 0.0, 1.0][i]) / (wc + wd))
            .collect();
        let v = e.embed(&["dog", "cat", "dog"], &table()).unwrap();
        for (d, row) in e.projection.iter().enumerate() {
            let expected: f64 = row.iter().zip(&mean).map(|(a, b)| a * b).sum();
            assert!((v.values[d] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_empty_and_determinism() {
        let docs: Vec<Vec<&str>> = vec![vec!["cat"]];
        let refs: Vec<&[&str]> = docs.iter().map(Vec::as_slice).collect();
        let e = DocEmbedder::fit(&refs, 4, 9);
        let v = e.embed(&["xx", "yy"], &table()).unwrap();
        assert!(v.all_oov);
        assert_eq!(v.values, vec![0.0; DOC_DIM]);
        assert!(e.embed::<&str>(&[], &table()).is_err());
        assert_eq!(e, DocEmbedder::fit(&refs, 4, 9));
        assert_eq!(e.embed(&["cat", "dog"], &table()).unwrap(), e.embed(&["cat", "dog"], &table()).unwrap());
    }
}
