//! Non-verbal heterogeneity from facial action-unit streams.
//!
//! The AU stream is cut into overlapping windows. Each window is encoded
//! as the 136 pairwise Pearson correlations between its 17 channels, and
//! the talk's score is the largest Euclidean distance between any two of
//! those encodings.

use serde::{Deserialize, Serialize};

use crate::corpus::{AuFrameSeries, AU_COUNT};
use crate::error::{Error, Result};
use crate::hem_verbal::{eig_sym, SymMatrix};

/// Number of unordered AU pairs, C(17, 2).
pub const PAIR_COUNT: usize = AU_COUNT * (AU_COUNT - 1) / 2;

/// Largest possible distance inside `[-1, 1]^136`.
pub fn max_hem_ges() -> f64 {
    2.0 * (PAIR_COUNT as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub window_secs: f64,
    pub stride_secs: f64,
    /// Keep the final window when the stream ends inside it.
    pub keep_partial: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            window_secs: 10.0,
            stride_secs: 5.0,
            keep_partial: true,
        }
    }
}

/// A window of consecutive frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment<'a> {
    pub start: usize,
    pub frames: &'a [[f64; AU_COUNT]],
}

impl Segment<'_> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn channel(&self, j: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[j]).collect()
    }
}

/// Cuts the stream into windows starting every `stride` seconds. The
/// window that first reaches the end of the stream is truncated there and
/// closes the set; windows shorter than one second are dropped.
pub fn segment<'a>(series: &'a AuFrameSeries, config: &SegmentConfig) -> Result<Vec<Segment<'a>>> {
    let fps = series.fps;
    let one_sec = fps.round().max(1.0) as usize;
    let n = series.frames.len();
    if n < one_sec {
        return Err(Error::invalid(format!(
            "AU stream has {n} frames, shorter than one second at {fps} fps"
        )));
    }
    let window = (config.window_secs * fps).round() as usize;
    let stride = (config.stride_secs * fps).round() as usize;
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must span at least one frame"));
    }

    let mut segments = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let partial = end - start < window;
        if end - start >= one_sec && (!partial || config.keep_partial) {
            segments.push(Segment {
                start,
                frames: &series.frames[start..end],
            });
        }
        if end == n {
            break;
        }
        start += stride;
    }
    if segments.is_empty() {
        return Err(Error::invalid("AU stream yields no complete segment"));
    }
    Ok(segments)
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two observations"));
    }
    let cx = Centered::new(x);
    let cy = Centered::new(y);
    Ok(cx.correlation(&cy))
}

/// A series with its mean removed, kept alongside its norm.
struct Centered {
    values: Vec<f64>,
    norm: f64,
    constant: bool,
}

impl Centered {
    fn new(x: &[f64]) -> Self {
        let constant = x.iter().all(|&v| v == x[0]);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let values: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self {
            values,
            norm,
            constant: constant || norm == 0.0,
        }
    }

    fn correlation(&self, other: &Centered) -> f64 {
        if self.constant || other.constant {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        (dot / (self.norm * other.norm)).clamp(-1.0, 1.0)
    }
}

/// The 136 channel-pair correlations of one segment, pairs `(i, j)` with
/// `i < j` in column order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrVector(pub [f64; PAIR_COUNT]);

impl CorrVector {
    pub fn distance(&self, other: &CorrVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Expands to the full correlation matrix with unit diagonal.
    pub fn to_matrix(&self) -> SymMatrix {
        let mut m = SymMatrix::identity(AU_COUNT);
        for i in 0..AU_COUNT {
            for j in (i + 1)..AU_COUNT {
                m.set(i, j, self.0[pair_index(i, j)]);
            }
        }
        m
    }
}

/// Position of pair `(i, j)`, `i < j`, inside a [`CorrVector`].
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < AU_COUNT);
    i * (2 * AU_COUNT - i - 1) / 2 + (j - i - 1)
}

fn centered_channels(seg: &Segment<'_>) -> Result<Vec<Centered>> {
    if seg.len() < 2 {
        return Err(Error::invalid("segment needs at least two frames"));
    }
    Ok((0..AU_COUNT).map(|j| Centered::new(&seg.channel(j))).collect())
}

pub fn corr_vector(seg: &Segment<'_>) -> Result<CorrVector> {
    let channels = centered_channels(seg)?;
    let mut out = [0.0; PAIR_COUNT];
    let mut idx = 0;
    for i in 0..AU_COUNT {
        for j in (i + 1)..AU_COUNT {
            out[idx] = channels[i].correlation(&channels[j]);
            idx += 1;
        }
    }
    Ok(CorrVector(out))
}

/// The 17 x 17 correlation matrix of a segment, unit diagonal.
pub fn correlation_matrix(seg: &Segment<'_>) -> Result<SymMatrix> {
    Ok(corr_vector(seg)?.to_matrix())
}

/// Top `k` eigenvalues of the segment's correlation matrix, descending.
pub fn segment_eigs(seg: &Segment<'_>, k: usize) -> Result<Vec<f64>> {
    let m = correlation_matrix(seg)?;
    let mut e = eig_sym(&m)?;
    e.truncate(k);
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HemGes {
    pub value: f64,
    /// Indices of the two most distant segments.
    pub pair: (usize, usize),
}

/// Maximum pairwise distance; a single segment scores 0.
pub fn hem_ges(vectors: &[CorrVector]) -> Result<HemGes> {
    if vectors.is_empty() {
        return Err(Error::invalid("hem_ges needs at least one segment"));
    }
    let mut best = HemGes {
        value: 0.0,
        pair: (0, 0),
    };
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            let d = vectors[i].distance(&vectors[j]);
            if d > best.value {
                best = HemGes { value: d, pair: (i, j) };
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GestureAnalysis {
    pub hem: HemGes,
    pub segment_count: usize,
    /// Top-`k` correlation eigenvalues per segment, in segment order.
    pub segment_eigs: Vec<Vec<f64>>,
}

/// Segments a stream and computes both the metric and the per-segment
/// eigen-features.
pub fn analyze_series(series: &AuFrameSeries, config: &SegmentConfig, k: usize) -> Result<GestureAnalysis> {
    let segments = segment(series, config)?;
    let mut vectors = Vec::with_capacity(segments.len());
    let mut eigs = Vec::with_capacity(segments.len());
    for seg in &segments {
        let v = corr_vector(seg)?;
        let mut e = eig_sym(&v.to_matrix())?;
        e.truncate(k);
        eigs.push(e);
        vectors.push(v);
    }
    Ok(GestureAnalysis {
        hem: hem_ges(&vectors)?,
        segment_count: segments.len(),
        segment_eigs: eigs,
    })
}
