//! Verbal heterogeneity: the volume spanned by a transcript's topics.
//!
//! Each LDA topic is summarized as the probability-weighted sum of the
//! embeddings of its top words. Stacking the summaries gives a K x d matrix
//! `T`; the metric is the product of the `k` largest eigenvalues of the
//! Gram matrix `U = T T^T`, i.e. the squared volume spanned by the `k` most
//! diverse topic directions.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::topic_model::{chunk_transcript, fit_lda, top_words, LdaConfig, TopicTopWords};

/// Dense symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from row-major data, averaging with the transpose.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix is not square"));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.data[i * self.n + j].powi(2);
                }
            }
        }
        s.sqrt()
    }
}

const MAX_JACOBI_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// All eigenvalues of a symmetric matrix in descending order, by cyclic
/// Jacobi rotations. Iterates until the off-diagonal Frobenius norm is at
/// most `1e-12 * ||U||_F`.
pub fn eig_sym(u: &SymMatrix) -> Result<Vec<f64>> {
    if u.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("eigensolver input has non-finite entries"));
    }
    let n = u.n;
    let mut a = u.clone();
    let target = JACOBI_REL_TOL * u.frobenius_norm();
    let mut converged = a.off_diagonal_norm() <= target;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    a.set(r, p, c * arp - s * arq);
                    a.set(r, q, s * arp + c * arq);
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
            }
        }
        converged = a.off_diagonal_norm() <= target;
    }
    if !converged {
        return Err(Error::invalid("Jacobi eigensolver did not converge"));
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// K x d matrix of topic summaries, one row per topic.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMatrix {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicSummary {
    pub vector: Vec<f64>,
    pub oov_words: usize,
}

impl TopicSummary {
    pub fn all_oov(&self, n_words: usize) -> bool {
        self.oov_words == n_words
    }
}

/// `sum_j weight(w_j) * embedding(w_j)` over the topic's top words.
pub fn topic_summary(top: &TopicTopWords, table: &EmbeddingTable) -> TopicSummary {
    let mut vector = vec![0.0; table.dim()];
    let mut oov_words = 0;
    for (word, weight) in &top.words {
        let (emb, known) = table.lookup(word);
        if !known {
            oov_words += 1;
            continue;
        }
        for (acc, e) in vector.iter_mut().zip(emb) {
            *acc += weight * e;
        }
    }
    TopicSummary { vector, oov_words }
}

/// `U = T T^T`, symmetrized.
pub fn similarity_matrix(t: &TopicMatrix) -> Result<SymMatrix> {
    if t.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("topic matrix has non-finite entries"));
    }
    let k = t.rows.len();
    let mut u = SymMatrix::zeros(k);
    for i in 0..k {
        for j in i..k {
            let dot: f64 = t.rows[i].iter().zip(&t.rows[j]).map(|(a, b)| a * b).sum();
            u.set(i, j, dot);
        }
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HemTr {
    pub value: f64,
    /// Eigenvalues of `U`, descending, after clamping rounding negatives.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
}

/// Eigenvalues this far below zero (relative to the spectrum's scale) are
/// treated as rounding noise of a PSD matrix.
const PSD_TOLERANCE: f64 = 1e-9;

pub fn hem_tr(u: &SymMatrix, k: usize) -> Result<HemTr> {
    if k == 0 || k > u.dim() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            u.dim()
        )));
    }
    let mut eigenvalues = eig_sym(u)?;
    let scale = eigenvalues.first().copied().unwrap_or(0.0).max(1.0);
    // below the solver's resolution an eigenvalue is indistinguishable from 0
    let resolution = JACOBI_REL_TOL * u.frobenius_norm();
    for lambda in &mut eigenvalues {
        if lambda.abs() <= resolution {
            *lambda = 0.0;
        } else if *lambda < 0.0 {
            if *lambda < -PSD_TOLERANCE * scale {
                return Err(Error::invalid(format!(
                    "similarity matrix is not PSD (eigenvalue {lambda})"
                )));
            }
            *lambda = 0.0;
        }
    }
    let value = eigenvalues[..k].iter().product();
    Ok(HemTr {
        value,
        eigenvalues,
        k,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerbalConfig {
    pub chunk_window: usize,
    pub lda: LdaConfig,
    /// Words per topic summary.
    pub top_n: usize,
    /// Eigenvalues in the product.
    pub k: usize,
    /// Scale each topic summary to unit length before forming `U`.
    pub normalize_topics: bool,
}

impl Default for VerbalConfig {
    fn default() -> Self {
        Self {
            chunk_window: crate::topic_model::DEFAULT_CHUNK_WINDOW,
            lda: LdaConfig::default(),
            top_n: 10,
            k: 5,
            normalize_topics: false,
        }
    }
}

/// HEM_tr of a topic matrix. Rows are put in lexicographic order first so
/// the result does not depend on how the topics were numbered.
pub fn topic_hem_tr(topics: &TopicMatrix, k: usize) -> Result<HemTr> {
    let mut rows: Vec<&Vec<f64>> = topics.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.len().cmp(&b.len()))
    });
    let sorted = TopicMatrix {
        rows: rows.into_iter().cloned().collect(),
    };
    hem_tr(&similarity_matrix(&sorted)?, k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerbalAnalysis {
    pub hem: HemTr,
    pub topics: TopicMatrix,
    /// Topics whose top words were all out of vocabulary.
    pub empty_topics: usize,
    pub oov_rate: f64,
}

/// Runs the whole verbal pipeline on one tokenized transcript.
pub fn analyze_transcript<S: AsRef<str>>(
    tokens: &[S],
    table: &EmbeddingTable,
    config: &VerbalConfig,
) -> Result<VerbalAnalysis> {
    let chunks = chunk_transcript(tokens, config.chunk_window)?;
    let model = fit_lda(&chunks, &config.lda)?;
    let mut rows = Vec::with_capacity(model.topics());
    let mut empty_topics = 0;
    for topic in 0..model.topics() {
        let top = top_words(&model, topic, config.top_n)?;
        let summary = topic_summary(&top, table);
        if summary.all_oov(top.words.len()) {
            empty_topics += 1;
        }
        let mut v = summary.vector;
        if config.normalize_topics {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        rows.push(v);
    }
    let topics = TopicMatrix { rows };
    let hem = topic_hem_tr(&topics, config.k)?;
    Ok(VerbalAnalysis {
        hem,
        topics,
        empty_topics,
        oov_rate: table.oov_rate(tokens),
    })
}
