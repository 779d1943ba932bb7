use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::evaluate::FairnessReport;
use super::loss::LossConfig;
use super::train::{Objective, TrainConfig};
use super::{evaluate_on, fit, predict, Dataset, Split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Add an unregularized `(0, 0)` row.
    pub include_baseline: bool,
    /// Weight of mean SPD against mean accuracy in the sort key.
    pub spd_weight: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.01, 0.017, 0.02, 0.05, 0.1, 0.2],
            lambdas: vec![0.2, 1.0, 4.0, 5.0, 10.0],
            include_baseline: true,
            spd_weight: 1.0,
        }
    }
}

impl GridConfig {
    pub fn points(&self) -> Vec<LossConfig> {
        let mut points = Vec::new();
        if self.include_baseline {
            points.push(LossConfig { epsilon: 0.0, lambda: 0.0 });
        }
        for &epsilon in &self.epsilons {
            for &lambda in &self.lambdas {
                let p = LossConfig { epsilon, lambda };
                if !points.contains(&p) {
                    points.push(p);
                }
            }
        }
        points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub epsilon: f64,
    pub lambda: f64,
    /// `mean_accuracy - spd_weight * mean SPD`; rows sort by it, highest first.
    pub key: f64,
    pub report: FairnessReport,
}

/// Mean of every defined model SPD over labels and both comparisons.
pub fn mean_spd(report: &FairnessReport) -> f64 {
    let vals: Vec<f64> = report
        .labels
        .iter()
        .flat_map(|l| [l.spd_gender, l.spd_race])
        .flatten()
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Trains and evaluates one model per grid point. Every point uses the same
/// training seed, so rows differ only through `(epsilon, lambda)`.
pub fn grid_search(
    data: &Dataset,
    split: &Split,
    grid: &GridConfig,
    train: &TrainConfig,
    seed: u64,
    threads: usize,
) -> Result<Vec<GridRow>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("grid has no points"));
    }
    for p in &points {
        LossConfig::new(p.epsilon, p.lambda)?;
    }
    let run = |p: &LossConfig| -> Result<GridRow> {
        let (model, _) = fit(data, split, Objective::Fair(*p), train, seed)?;
        let probs = predict(&model, data, &split.test)?;
        let report = evaluate_on(data, &split.test, &probs)?;
        Ok(GridRow {
            epsilon: p.epsilon,
            lambda: p.lambda,
            key: report.mean_accuracy - grid.spd_weight * mean_spd(&report),
            report,
        })
    };
    let mut rows: Vec<GridRow> = if threads <= 1 {
        points.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(run).collect::<Result<_>>())?
    };
    rows.sort_by(|a, b| b.key.total_cmp(&a.key));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_points_include_baseline_and_picks() {
        let pts = GridConfig::default().points();
        assert_eq!(pts.len(), 31);
        assert_eq!(pts[0], LossConfig { epsilon: 0.0, lambda: 0.0 });
        assert!(pts.contains(&LossConfig { epsilon: 0.017, lambda: 5.0 }));
        assert!(pts.contains(&LossConfig { epsilon: 0.02, lambda: 4.0 }));
        let none = GridConfig {
            epsilons: vec![],
            include_baseline: false,
            ..GridConfig::default()
        };
        assert!(none.points().is_empty());
    }
}
