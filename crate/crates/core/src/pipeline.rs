//! Corpus-level HEM computation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TalkRecord;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::hem_gesture::{analyze_series, SegmentConfig};
use crate::hem_verbal::{analyze_transcript, VerbalConfig};
use crate::seeds::{derive_seed, id_stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HemConfig {
    pub verbal: VerbalConfig,
    pub segments: SegmentConfig,
    /// Correlation eigenvalues kept per segment as gesture features.
    pub gesture_k: usize,
}

impl Default for HemConfig {
    fn default() -> Self {
        Self {
            verbal: VerbalConfig::default(),
            segments: SegmentConfig::default(),
            gesture_k: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalkHem {
    pub id: String,
    pub hem_tr_raw: f64,
    pub hem_ges_raw: f64,
    pub segment_eigs: Vec<Vec<f64>>,
    pub empty_topics: usize,
    pub oov_rate: f64,
}

/// Both metrics for one talk. The LDA seed is derived from `seed` and the
/// talk id, so a talk's score does not depend on its corpus position.
pub fn talk_hem(talk: &TalkRecord, table: &EmbeddingTable, config: &HemConfig, seed: u64) -> Result<TalkHem> {
    let run = || -> Result<TalkHem> {
        let mut verbal = config.verbal.clone();
        verbal.lda.seed = derive_seed(seed, id_stream(&talk.id));
        let v = analyze_transcript(&talk.transcript, table, &verbal)?;
        let g = analyze_series(&talk.au_series, &config.segments, config.gesture_k)?;
        Ok(TalkHem {
            id: talk.id.clone(),
            hem_tr_raw: v.hem.value,
            hem_ges_raw: g.hem.value,
            segment_eigs: g.segment_eigs,
            empty_topics: v.empty_topics,
            oov_rate: v.oov_rate,
        })
    };
    run().map_err(|e| e.for_talk(&talk.id))
}

/// Scores every talk, in corpus order. With `threads > 1` talks are scored
/// on a dedicated pool; results are identical to the sequential run.
pub fn corpus_hem(
    corpus: &[TalkRecord],
    table: &EmbeddingTable,
    config: &HemConfig,
    seed: u64,
    threads: usize,
) -> Result<Vec<TalkHem>> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    if threads <= 1 {
        return corpus.iter().map(|t| talk_hem(t, table, config, seed)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        corpus
            .par_iter()
            .map(|t| talk_hem(t, table, config, seed))
            .collect()
    })
}
