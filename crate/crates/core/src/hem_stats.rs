//! Corpus-level statistics over HEM scores: normalization, 5-level
//! discretization, binned rating curves, conditional positive-rate tables
//! with Wilson intervals, statistical parity difference and `CV_prob`.

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Race, RatingLabel, LABEL_COUNT};
use crate::error::{Error, Result};

pub const HEM_BINS: usize = 5;

/// Two-sided 95% standard-normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// All inputs were equal; every output is then 0.5.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)` for every value.
pub fn minmax(values: &[f64]) -> Result<MinMax> {
    if values.is_empty() {
        return Err(Error::invalid("cannot min-max normalize an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot min-max normalize non-finite values"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = max <= min;
    let values = if degenerate {
        vec![0.5; values.len()]
    } else {
        values
            .iter()
            .map(|v| ((v - min) / (max - min)).clamp(0.0, 1.0))
            .collect()
    };
    Ok(MinMax {
        values,
        min,
        max,
        degenerate,
    })
}

/// Maps `[0, 0.2) -> 0, ..., [0.8, 1] -> 4`.
pub fn discretize(h: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::invalid(format!("HEM value {h} is outside [0, 1]")));
    }
    Ok(bin_of(h, HEM_BINS) as u8)
}

fn bin_of(h: f64, bins: usize) -> usize {
    ((h * bins as f64).floor() as usize).min(bins - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    Transcript,
    Gesture,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Transcript, Modality::Gesture];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Transcript => "tr",
            Modality::Gesture => "ges",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HemPair {
    pub hem_tr_raw: f64,
    pub hem_ges_raw: f64,
    pub hem_tr: f64,
    pub hem_ges: f64,
    pub hem_tr_dis: u8,
    pub hem_ges_dis: u8,
}

impl HemPair {
    pub fn normalized(&self, m: Modality) -> f64 {
        match m {
            Modality::Transcript => self.hem_tr,
            Modality::Gesture => self.hem_ges,
        }
    }

    pub fn bin(&self, m: Modality) -> u8 {
        match m {
            Modality::Transcript => self.hem_tr_dis,
            Modality::Gesture => self.hem_ges_dis,
        }
    }

    /// Normalized `(hem_tr, hem_ges)`, the similarity key of the loss.
    pub fn point(&self) -> [f64; 2] {
        [self.hem_tr, self.hem_ges]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HemPairs {
    pub pairs: Vec<HemPair>,
    pub tr_degenerate: bool,
    pub ges_degenerate: bool,
}

/// Normalizes and discretizes raw corpus scores.
pub fn hem_pairs(tr_raw: &[f64], ges_raw: &[f64]) -> Result<HemPairs> {
    if tr_raw.len() != ges_raw.len() {
        return Err(Error::Dimension {
            expected: tr_raw.len(),
            got: ges_raw.len(),
        });
    }
    let tr = minmax(tr_raw)?;
    let ges = minmax(ges_raw)?;
    let pairs = (0..tr_raw.len())
        .map(|i| {
            Ok(HemPair {
                hem_tr_raw: tr_raw[i],
                hem_ges_raw: ges_raw[i],
                hem_tr: tr.values[i],
                hem_ges: ges.values[i],
                hem_tr_dis: discretize(tr.values[i])?,
                hem_ges_dis: discretize(ges.values[i])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HemPairs {
        pairs,
        tr_degenerate: tr.degenerate,
        ges_degenerate: ges.degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub bin: usize,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 for a single talk.
    pub std_err: f64,
}

/// Mean rating per equal-width HEM bin; empty bins are `None`.
pub fn binned_rating_curve(hems: &[f64], ratings: &[f64], bins: usize) -> Result<Vec<Option<BinStat>>> {
    if hems.len() != ratings.len() {
        return Err(Error::Dimension {
            expected: hems.len(),
            got: ratings.len(),
        });
    }
    if bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (&h, &r) in hems.iter().zip(ratings) {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::invalid(format!("HEM value {h} is outside [0, 1]")));
        }
        members[bin_of(h, bins)].push(r);
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(bin, m)| {
            if m.is_empty() {
                return None;
            }
            let n = m.len();
            let mean = m.iter().sum::<f64>() / n as f64;
            let std_err = if n > 1 {
                let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            Some(BinStat { bin, n, mean, std_err })
        })
        .collect())
}

/// Qualitative shape of a binned curve, comparing the middle bin with the
/// outermost occupied bins. Each comparison allows one standard error of
/// the difference of the two bin means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveShape {
    pub concave: bool,
    pub increasing: bool,
    pub convex: bool,
    pub decreasing: bool,
}

impl CurveShape {
    pub fn concave_or_increasing(&self) -> bool {
        self.concave || self.increasing
    }

    pub fn convex_or_decreasing(&self) -> bool {
        self.convex || self.decreasing
    }
}

/// `None` when the middle bin or either side is empty.
pub fn curve_shape(curve: &[Option<BinStat>]) -> Option<CurveShape> {
    let occupied: Vec<&BinStat> = curve.iter().flatten().collect();
    let left = *occupied.first()?;
    let right = *occupied.last()?;
    let mid = curve.get(curve.len() / 2).copied().flatten()?;
    if left.bin == mid.bin || right.bin == mid.bin {
        return None;
    }
    let se = |a: &BinStat, b: &BinStat| (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    let (sl, sr) = (se(left, &mid), se(&mid, right));
    Some(CurveShape {
        concave: mid.mean >= left.mean - sl && mid.mean >= right.mean - sr,
        increasing: left.mean <= mid.mean + sl && mid.mean <= right.mean + sr,
        convex: mid.mean <= left.mean + sl && mid.mean <= right.mean + sr,
        decreasing: left.mean >= mid.mean - sl && mid.mean >= right.mean - sr,
    })
}

/// Wilson score interval for `x` successes out of `n`; `None` when `n = 0`.
pub fn wilson_interval(x: usize, n: usize, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n_f = n as f64;
    let p = x as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    // exact endpoints at the boundaries, where rounding could leave p outside
    let lo = if x == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if x == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Some((lo, hi))
}

/// A demographic selector; the `Not*` variants are complements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Gender(Gender),
    NotGender(Gender),
    Race(Race),
    NotRace(Race),
}

impl Group {
    pub fn contains(&self, gender: Gender, race: Race) -> bool {
        match *self {
            Group::Gender(g) => gender == g,
            Group::NotGender(g) => gender != g,
            Group::Race(r) => race == r,
            Group::NotRace(r) => race != r,
        }
    }

    pub fn attribute(&self) -> &'static str {
        match self {
            Group::Gender(_) | Group::NotGender(_) => "gender",
            Group::Race(_) | Group::NotRace(_) => "race",
        }
    }

    pub fn value(&self) -> String {
        match self {
            Group::Gender(g) => g.name().to_string(),
            Group::NotGender(g) => format!("non-{}", g.name()),
            Group::Race(r) => r.name().to_string(),
            Group::NotRace(r) => format!("non-{}", r.name()),
        }
    }
}

/// The two comparisons the analysis reports: Male vs other genders and
/// White vs other races.
pub const COMPARISONS: [(Group, Group); 2] = [
    (Group::Gender(Gender::Male), Group::NotGender(Gender::Male)),
    (Group::Race(Race::White), Group::NotRace(Race::White)),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: Group,
    pub n: usize,
    pub x: usize,
    /// `x / n`; `None` for an empty cell.
    pub rate: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

impl GroupRate {
    pub fn from_counts(group: Group, x: usize, n: usize) -> Self {
        Self {
            group,
            n,
            x,
            rate: (n > 0).then(|| x as f64 / n as f64),
            ci95: wilson_interval(x, n, Z95),
        }
    }

    /// Both intervals exist and are disjoint.
    pub fn ci_disjoint(&self, other: &GroupRate) -> bool {
        match (self.ci95, other.ci95) {
            (Some((alo, ahi)), Some((blo, bhi))) => ahi < blo || bhi < alo,
            _ => false,
        }
    }
}

/// What the analysis needs to know about one talk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisTalk {
    pub gender: Gender,
    pub race: Race,
    pub hem: HemPair,
    pub normalized: [f64; LABEL_COUNT],
    pub binary: [u8; LABEL_COUNT],
}

/// `P[Y_bin = 1 | group, HEM bin]` with its Wilson interval.
pub fn conditional_rate(
    talks: &[AnalysisTalk],
    label: RatingLabel,
    group: Group,
    modality: Modality,
    hem_bin: u8,
) -> GroupRate {
    let (mut n, mut x) = (0, 0);
    for t in talks {
        if t.hem.bin(modality) == hem_bin && group.contains(t.gender, t.race) {
            n += 1;
            x += usize::from(t.binary[label.index()]);
        }
    }
    GroupRate::from_counts(group, x, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCell {
    pub label: RatingLabel,
    pub modality: Modality,
    pub hem_bin: u8,
    pub first: GroupRate,
    pub second: GroupRate,
    /// `first.rate - second.rate` when both are defined.
    pub gap: Option<f64>,
    pub significant: bool,
}

/// Every label x modality x comparison x bin cell.
pub fn bias_table(talks: &[AnalysisTalk]) -> Vec<BiasCell> {
    let mut cells = Vec::new();
    for label in RatingLabel::ALL {
        for modality in Modality::ALL {
            for (g1, g2) in COMPARISONS {
                for bin in 0..HEM_BINS as u8 {
                    let first = conditional_rate(talks, label, g1, modality, bin);
                    let second = conditional_rate(talks, label, g2, modality, bin);
                    let gap = first.rate.zip(second.rate).map(|(a, b)| a - b);
                    cells.push(BiasCell {
                        label,
                        modality,
                        hem_bin: bin,
                        significant: first.ci_disjoint(&second),
                        first,
                        second,
                        gap,
                    });
                }
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingCurve {
    pub label: RatingLabel,
    pub modality: Modality,
    pub bins: Vec<Option<BinStat>>,
    pub shape: Option<CurveShape>,
}

pub fn rating_curves(talks: &[AnalysisTalk]) -> Result<Vec<RatingCurve>> {
    let mut curves = Vec::new();
    for label in RatingLabel::ALL {
        for modality in Modality::ALL {
            let hems: Vec<f64> = talks.iter().map(|t| t.hem.normalized(modality)).collect();
            let ratings: Vec<f64> = talks.iter().map(|t| t.normalized[label.index()]).collect();
            let bins = binned_rating_curve(&hems, &ratings, HEM_BINS)?;
            curves.push(RatingCurve {
                label,
                modality,
                shape: curve_shape(&bins),
                bins,
            });
        }
    }
    Ok(curves)
}

fn positive_rate(preds: &[u8]) -> f64 {
    preds.iter().filter(|&&p| p != 0).count() as f64 / preds.len() as f64
}

/// `|P(y = 1 | G1) - P(y = 1 | G2)|` from the predictions of each group.
pub fn spd(group1: &[u8], group2: &[u8]) -> Result<f64> {
    if group1.is_empty() || group2.is_empty() {
        return Err(Error::invalid("SPD needs two non-empty groups"));
    }
    Ok((positive_rate(group1) - positive_rate(group2)).abs())
}

/// SPD between the members and non-members of `group`.
pub fn spd_for(preds: &[u8], genders: &[Gender], races: &[Race], group: Group) -> Result<f64> {
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for ((&p, &g), &r) in preds.iter().zip(genders).zip(races) {
        if group.contains(g, r) {
            inside.push(p);
        } else {
            outside.push(p);
        }
    }
    spd(&inside, &outside)
}

/// Population standard deviation over mean; `None` when the mean is 0.
pub fn coefficient_of_variation(rates: &[f64]) -> Option<f64> {
    if rates.is_empty() {
        return None;
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRate {
    pub gender: Gender,
    pub race: Race,
    pub n: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvProb {
    /// `None` when every group's positive rate is 0.
    pub value: Option<f64>,
    pub groups: Vec<IntersectionRate>,
}

/// Coefficient of variation of positive rates across the non-empty
/// gender x race intersection groups.
pub fn cv_prob(preds: &[u8], genders: &[Gender], races: &[Race]) -> Result<CvProb> {
    if preds.len() != genders.len() || preds.len() != races.len() {
        return Err(Error::Dimension {
            expected: preds.len(),
            got: genders.len().min(races.len()),
        });
    }
    let mut groups = Vec::new();
    for g in Gender::ALL {
        for r in Race::ALL {
            let members: Vec<u8> = preds
                .iter()
                .zip(genders.iter().zip(races))
                .filter(|(_, (&pg, &pr))| pg == g && pr == r)
                .map(|(&p, _)| p)
                .collect();
            if !members.is_empty() {
                groups.push(IntersectionRate {
                    gender: g,
                    race: r,
                    n: members.len(),
                    rate: positive_rate(&members),
                });
            }
        }
    }
    if groups.len() < 2 {
        return Err(Error::invalid(
            "CV_prob needs at least two non-empty gender x race groups",
        ));
    }
    let rates: Vec<f64> = groups.iter().map(|g| g.rate).collect();
    Ok(CvProb {
        value: coefficient_of_variation(&rates),
        groups,
    })
}
