//! Talk records and their ingestion.
//!
//! A corpus is described by a JSON-lines manifest. Each line points at a
//! plain-text transcript and an OpenFace-style action-unit CSV, and carries
//! the talk's rating counts, view count and sensitive attributes. Relative
//! paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hem_stats::{minmax, MinMax};

/// Number of facial action-unit intensity channels.
pub const AU_COUNT: usize = 17;

/// OpenFace intensity columns, in the fixed channel order used everywhere.
pub const AU_COLUMNS: [&str; AU_COUNT] = [
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r", "AU10_r", "AU12_r",
    "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r", "AU25_r", "AU26_r", "AU45_r",
];

pub const DEFAULT_FPS: f64 = 30.0;

pub const LABEL_COUNT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RatingLabel {
    Fascinating,
    Ingenious,
    JawDropping,
    Longwinded,
    Unconvincing,
    Ok,
}

impl RatingLabel {
    pub const ALL: [RatingLabel; LABEL_COUNT] = [
        RatingLabel::Fascinating,
        RatingLabel::Ingenious,
        RatingLabel::JawDropping,
        RatingLabel::Longwinded,
        RatingLabel::Unconvincing,
        RatingLabel::Ok,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RatingLabel::Fascinating => "fascinating",
            RatingLabel::Ingenious => "ingenious",
            RatingLabel::JawDropping => "jaw-dropping",
            RatingLabel::Longwinded => "longwinded",
            RatingLabel::Unconvincing => "unconvincing",
            RatingLabel::Ok => "ok",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Desirable labels; the other three are undesirable.
    pub fn is_positive(self) -> bool {
        self.index() < 3
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.name() == name)
    }
}

impl fmt::Display for RatingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    OtherGender,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::OtherGender];

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::OtherGender => "OtherGender",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Gender::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown gender `{s}` (expected Male, Female or OtherGender)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Race {
    White,
    AfricanAmerican,
    Asian,
    OtherRace,
}

impl Race {
    pub const ALL: [Race; 4] = [Race::White, Race::AfricanAmerican, Race::Asian, Race::OtherRace];

    pub fn name(self) -> &'static str {
        match self {
            Race::White => "White",
            Race::AfricanAmerican => "AfricanAmerican",
            Race::Asian => "Asian",
            Race::OtherRace => "OtherRace",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Race {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Race::ALL.iter().copied().find(|r| r.name() == s).ok_or_else(|| {
            format!("unknown race `{s}` (expected White, AfricanAmerican, Asian or OtherRace)")
        })
    }
}

/// Per-frame intensities of the 17 action units.
#[derive(Clone, Debug, PartialEq)]
pub struct AuFrameSeries {
    pub fps: f64,
    pub frames: Vec<[f64; AU_COUNT]>,
}

impl AuFrameSeries {
    pub fn new(fps: f64, frames: Vec<[f64; AU_COUNT]>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("action-unit series has no frames"));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("action-unit series contains non-finite intensities"));
        }
        Ok(Self { fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TalkRecord {
    pub id: String,
    pub transcript: Vec<String>,
    pub au_series: AuFrameSeries,
    /// Counts for the six tracked labels, indexed by [`RatingLabel::index`].
    pub rating_counts: [u64; LABEL_COUNT],
    pub total_rating_count: u64,
    pub views: u64,
    pub gender: Gender,
    pub race: Race,
    /// Precomputed document vector, when the manifest supplies one.
    pub doc_vec: Option<Vec<f64>>,
}

/// Normalized and binarized ratings of one talk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingVector {
    pub normalized: [f64; LABEL_COUNT],
    pub binary: [u8; LABEL_COUNT],
}

/// One manifest line as it appears on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub transcript_path: String,
    pub au_csv_path: String,
    pub rating_counts: BTreeMap<String, u64>,
    pub total_rating_count: u64,
    pub views: u64,
    pub gender: String,
    pub race: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_vec: Option<Vec<f64>>,
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<TalkRecord>> {
    load_manifest_with_fps(path, DEFAULT_FPS)
}

pub fn load_manifest_with_fps(path: impl AsRef<Path>, fps: f64) -> Result<Vec<TalkRecord>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    read_manifest_entries(path)?
        .into_iter()
        .map(|(line, entry)| record_from_entry(&entry, line, &base, fps))
        .collect()
}

/// Parses the manifest without touching the referenced files.
pub fn read_manifest_entries(path: &Path) -> Result<Vec<(usize, ManifestEntry)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: line_no,
            field: "<record>".into(),
            msg: e.to_string(),
        })?;
        entries.push((line_no, entry));
    }
    Ok(entries)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn record_from_entry(entry: &ManifestEntry, line: usize, base: &Path, fps: f64) -> Result<TalkRecord> {
    let field_err = |field: &str, msg: String| Error::Manifest {
        line,
        field: field.into(),
        msg,
    };
    let gender: Gender = entry.gender.parse().map_err(|m| field_err("gender", m))?;
    let race: Race = entry.race.parse().map_err(|m| field_err("race", m))?;

    let mut rating_counts = [0u64; LABEL_COUNT];
    for (name, &count) in &entry.rating_counts {
        let label = RatingLabel::from_name(name)
            .ok_or_else(|| field_err("rating_counts", format!("unknown rating label `{name}`")))?;
        rating_counts[label.index()] = count;
    }
    let tracked: u64 = rating_counts.iter().sum();
    if entry.total_rating_count < tracked {
        return Err(field_err(
            "total_rating_count",
            format!(
                "{} is smaller than the sum of tracked label counts ({tracked})",
                entry.total_rating_count
            ),
        ));
    }
    if let Some(v) = &entry.doc_vec {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(field_err("doc_vec", "non-finite component".into()));
        }
    }

    let transcript_path = resolve(base, &entry.transcript_path);
    let text = fs::read_to_string(&transcript_path).map_err(|e| Error::io(&transcript_path, e))?;
    let au_series = load_au_csv(resolve(base, &entry.au_csv_path), fps)?;

    Ok(TalkRecord {
        id: entry.id.clone(),
        transcript: tokenize(&text),
        au_series,
        rating_counts,
        total_rating_count: entry.total_rating_count,
        views: entry.views,
        gender,
        race,
        doc_vec: entry.doc_vec.clone(),
    })
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for entry in entries {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads the 17 intensity columns of an OpenFace CSV. Header names are
/// trimmed (OpenFace pads them with spaces) and extra columns are ignored.
pub fn load_au_csv(path: impl AsRef<Path>, fps: f64) -> Result<AuFrameSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "empty file".into(),
        });
    }
    let mut columns = [0usize; AU_COUNT];
    for (slot, name) in columns.iter_mut().zip(AU_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.into(),
                column: name.into(),
            })?;
    }

    let mut frames = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut frame = [0.0; AU_COUNT];
        for (j, &col) in columns.iter().enumerate() {
            let cell = row.get(col).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                msg: format!("column {}: `{cell}` is not a number", AU_COLUMNS[j]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("column {}: non-finite intensity", AU_COLUMNS[j]),
                });
            }
            frame[j] = value;
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "no data rows".into(),
        });
    }
    AuFrameSeries::new(fps, frames)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Writes a frame-indexed CSV carrying the 17 intensity columns.
pub fn write_au_csv(path: impl AsRef<Path>, series: &AuFrameSeries) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(out, "frame").map_err(io)?;
    for name in AU_COLUMNS {
        write!(out, ",{name}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (i, frame) in series.frames.iter().enumerate() {
        write!(out, "{i}").map_err(io)?;
        for v in frame {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Min-max normalizes view counts across the corpus, in corpus order.
pub fn normalize_views(corpus: &[TalkRecord]) -> Result<MinMax> {
    let views: Vec<f64> = corpus.iter().map(|t| t.views as f64).collect();
    minmax(&views)
}

pub fn normalize_ratings(record: &TalkRecord) -> Result<[f64; LABEL_COUNT]> {
    if record.total_rating_count == 0 {
        return Err(Error::invalid(format!(
            "talk `{}` has total_rating_count = 0",
            record.id
        )));
    }
    let total = record.total_rating_count as f64;
    Ok(record.rating_counts.map(|c| c as f64 / total))
}

/// Midpoint of the two central order statistics for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Thresholds each label at its corpus median; values at or above it map to 1.
pub fn binarize_ratings(normalized: &[[f64; LABEL_COUNT]]) -> Vec<[u8; LABEL_COUNT]> {
    let mut thresholds = [0.0; LABEL_COUNT];
    for (l, t) in thresholds.iter_mut().enumerate() {
        let column: Vec<f64> = normalized.iter().map(|r| r[l]).collect();
        *t = median(&column).unwrap_or(0.0);
    }
    normalized
        .iter()
        .map(|r| std::array::from_fn(|l| u8::from(r[l] >= thresholds[l])))
        .collect()
}

/// Normalizes and binarizes the ratings of a whole corpus.
pub fn rating_vectors(corpus: &[TalkRecord]) -> Result<Vec<RatingVector>> {
    let normalized = corpus
        .iter()
        .map(normalize_ratings)
        .collect::<Result<Vec<_>>>()?;
    let binary = binarize_ratings(&normalized);
    Ok(normalized
        .into_iter()
        .zip(binary)
        .map(|(normalized, binary)| RatingVector { normalized, binary })
        .collect())
}
