use ndarray::Axis;

use super::dataset::Dataset;
use super::infer::Prediction;
use super::train::TrainedPipeline;
use crate::error::Result;
use crate::eval::{compute_metrics, roc, Metrics, RocCurve};
use crate::Real;

/// Both modes scored on the held-out test split.
#[derive(Debug, Clone)]
pub struct TestEvaluation<T> {
    pub labels: Vec<u8>,
    pub realtime: Prediction<T>,
    pub batch: Prediction<T>,
    pub realtime_metrics: Metrics,
    pub batch_metrics: Metrics,
    pub realtime_roc: RocCurve,
    pub batch_roc: RocCurve,
}

impl<T: Real> TrainedPipeline<T> {
    /// Scores the test split of `data`, which must be the training dataset.
    pub fn evaluate_test(&self, data: &Dataset<T>) -> Result<TestEvaluation<T>> {
        let idx = &self.splits.test;
        let raw = data.features.select(Axis(0), idx);
        let labels: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
        let realtime = self.bundle.predict_realtime(raw.view())?;
        let batch = self.bundle.predict_batch(raw.view(), self.bundle.config.per_batch_dm)?;
        let score = |p: &Prediction<T>| p.scores.iter().map(|s| s.as_f64()).collect::<Vec<_>>();
        Ok(TestEvaluation {
            realtime_metrics: compute_metrics(&realtime.labels, &labels)?,
            batch_metrics: compute_metrics(&batch.labels, &labels)?,
            realtime_roc: roc(&score(&realtime), &labels)?,
            batch_roc: roc(&score(&batch), &labels)?,
            labels,
            realtime,
            batch,
        })
    }
}
