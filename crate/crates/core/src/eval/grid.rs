use ndarray::Axis;
use rand::seq::index::sample;

use super::metrics::compute_metrics;
use crate::classifier::{build_error_map, ErrorMode};
use crate::config::PipelineConfig;
use crate::error::{Result, VadError};
use crate::features::Standardizer;
use crate::pipeline::{fit_classifiers, split_dataset, train_branches, Dataset, Splits};
use crate::seed;
use crate::Real;

/// Training-set fractions × speech ratios to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub fractions: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            fractions: vec![0.25, 0.5, 0.75, 1.0],
            ratios: vec![0.2, 0.35, 0.5, 0.65, 0.8],
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.ratios.is_empty() {
            return Err(VadError::Config("grid fractions and ratios must be nonempty".into()));
        }
        if self.fractions.iter().chain(&self.ratios).any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(VadError::Config("grid fractions and ratios must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Largest DED training size that every ratio can be drawn at from
    /// pools of `n0` non-speech and `n1` speech rows.
    pub fn base_size(&self, n0: usize, n1: usize) -> usize {
        self.ratios
            .iter()
            .map(|&r| {
                let by_speech = n1 as f64 / r;
                let by_silence = if r < 1.0 { n0 as f64 / (1.0 - r) } else { f64::INFINITY };
                by_speech.min(by_silence)
            })
            .fold(f64::INFINITY, f64::min)
            .floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub fraction: f64,
    pub ratio: f64,
    /// Realtime-mode accuracy on the test split.
    pub accuracy: f64,
    pub batch_accuracy: f64,
    /// DED training rows for H⁰ and H¹.
    pub rows: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub base_size: usize,
    /// Hash of the test split shared by every cell.
    pub test_hash: String,
}

impl GridResult {
    pub fn cell(&self, fraction: f64, ratio: f64) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| (c.fraction - fraction).abs() < 1e-12 && (c.ratio - ratio).abs() < 1e-12)
    }
}

/// Retrains both networks and classifiers for every cell on a resampled
/// DED training split and evaluates on the one fixed test split.
pub fn run_grid<T: Real>(data: &Dataset<T>, grid: &ExperimentGrid, config: &PipelineConfig) -> Result<GridResult> {
    grid.validate()?;
    config.validate()?;
    let splits = split_dataset(&data.labels, &config.split)?;
    let pools = &splits.ded_train;
    let base = grid.base_size(pools[0].len(), pools[1].len());
    let min_rows = 10 * config.ded.batch_size;
    let mut plans = Vec::new();
    for &fraction in &grid.fractions {
        for &ratio in &grid.ratios {
            let total = (fraction * base as f64).floor() as usize;
            let n1 = (total as f64 * ratio).round() as usize;
            let n0 = total - n1;
            let infeasible = |reason: String| VadError::InfeasibleCell { fraction, ratio, reason };
            if total < min_rows {
                return Err(infeasible(format!(
                    "{total} training rows, need at least {min_rows} (10 × batch size)"
                )));
            }
            if n0.min(n1) <= config.diffusion.k {
                return Err(infeasible(format!(
                    "{n0}/{n1} rows per hypothesis cannot support a {}-neighbour graph",
                    config.diffusion.k
                )));
            }
            plans.push((fraction, ratio, [n0, n1]));
        }
    }
    let cls_y: Vec<u8> = splits.classifier.iter().map(|&i| data.labels[i]).collect();
    let test_y: Vec<u8> = splits.test.iter().map(|&i| data.labels[i]).collect();
    let mut cells = Vec::with_capacity(plans.len());
    for (c, (fraction, ratio, counts)) in plans.into_iter().enumerate() {
        log::info!("grid cell {}: fraction {fraction}, ratio {ratio}, rows {counts:?}", c + 1);
        let mut rng = seed::rng(config.seed, 0x6121 + c as u64);
        let rows: [Vec<usize>; 2] = [0, 1].map(|h| {
            let mut pick: Vec<usize> = sample(&mut rng, pools[h].len(), counts[h])
                .into_iter()
                .map(|i| pools[h][i])
                .collect();
            pick.sort_unstable();
            pick
        });
        let mut all: Vec<usize> = rows.iter().flatten().copied().collect();
        all.sort_unstable();
        let fit = data.features.select(Axis(0), &all);
        let standardizer = Standardizer::fit(fit.view())?;
        let normalized = standardizer.apply_rows(data.features.view());
        let [b0, b1] = train_branches(normalized.view(), &rows, config)?;
        let ded = [b0.model, b1.model];
        let embeddings = [b0.embedding, b1.embedding];
        let cls_x = normalized.select(Axis(0), &splits.classifier);
        let (svm_rt, svm_bt, _) = fit_classifiers(cls_x.view(), &cls_y, &ded, &embeddings, config)?;
        let test_x = normalized.select(Axis(0), &splits.test);
        let rt_map = build_error_map(test_x.view(), &ded[0], &ded[1], ErrorMode::Realtime, None)?;
        let accuracy = compute_metrics(&svm_rt.classify_map(&rt_map)?, &test_y)?.accuracy;
        let (t0, t1) = crate::pipeline::batch_targets_for(&test_x, &embeddings, config)?;
        let bt_map = build_error_map(test_x.view(), &ded[0], &ded[1], ErrorMode::Batch, Some((t0.view(), t1.view())))?;
        let batch_accuracy = compute_metrics(&svm_bt.classify_map(&bt_map)?, &test_y)?.accuracy;
        log::info!("grid cell {}: accuracy {accuracy:.4} (batch {batch_accuracy:.4})", c + 1);
        cells.push(GridCell {
            fraction,
            ratio,
            accuracy,
            batch_accuracy,
            rows: counts,
        });
    }
    Ok(GridResult {
        cells,
        base_size: base,
        test_hash: Splits::index_hash(&splits.test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_twenty_cells() {
        let g = ExperimentGrid::default();
        assert_eq!(g.fractions.len() * g.ratios.len(), 20);
        g.validate().unwrap();
    }

    #[test]
    fn base_size_respects_every_ratio() {
        let g = ExperimentGrid::default();
        let s = g.base_size(5000, 4000);
        for &r in &g.ratios {
            assert!((s as f64 * r).round() as usize <= 4000);
            assert!((s as f64 * (1.0 - r)).round() as usize <= 5000);
        }
        assert_eq!(s, 5000);
    }

    #[test]
    fn infeasible_cells_are_reported() {
        let data = Dataset::new(ndarray::Array2::<f64>::zeros((100, 72)), (0..100).map(|i| (i % 2) as u8).collect()).unwrap();
        let err = run_grid(&data, &ExperimentGrid::default(), &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, VadError::InfeasibleCell { .. }), "{err}");
    }
}
