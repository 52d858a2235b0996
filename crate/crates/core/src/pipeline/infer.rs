use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::train::{batch_targets, ModelBundle};
use crate::audio::FrameSequence;
use crate::classifier::{build_error_map, decoder_error, ErrorCoordinate, ErrorMap, ErrorMode};
use crate::error::{Result, VadError};
use crate::features::{extract_features, StreamingFeatures};
use crate::Real;

/// Below this many frames a per-batch diffusion map is not attempted.
pub const MIN_PER_BATCH_DM_ROWS: usize = 200;

/// Decision for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<T> {
    pub index: usize,
    pub label: u8,
    pub score: T,
}

/// Labels, scores and error coordinates of many frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub labels: Vec<u8>,
    pub scores: Vec<T>,
    pub map: ErrorMap<T>,
}

impl<T: Real> ModelBundle<T> {
    /// Standardized, range-mapped rows.
    pub fn normalize(&self, raw: ArrayView2<T>) -> Result<Array2<T>> {
        if raw.ncols() != self.standardizer.dim() {
            return Err(VadError::Dimension(format!(
                "feature rows are {}-dim, bundle expects {}",
                raw.ncols(),
                self.standardizer.dim()
            )));
        }
        Ok(self.standardizer.apply_rows(raw))
    }

    /// Decoder-error coordinate and decision of one normalized row.
    pub fn decide_row(&self, row: ArrayView1<T>) -> Result<(ErrorCoordinate<T>, T)> {
        let e0 = self.ded[0].forward(row)?;
        let e1 = self.ded[1].forward(row)?;
        let coord = ErrorCoordinate::Realtime([
            decoder_error(row, e0.reconstructed.view()),
            decoder_error(row, e1.reconstructed.view()),
        ]);
        let score = self.svm_realtime.score(&coord)?;
        Ok((coord, score))
    }

    /// Realtime-mode decisions for unstandardized feature rows.
    pub fn predict_realtime(&self, raw: ArrayView2<T>) -> Result<Prediction<T>> {
        let x = self.normalize(raw)?;
        let map = build_error_map(x.view(), &self.ded[0], &self.ded[1], ErrorMode::Realtime, None)?;
        finish(map, &self.svm_realtime)
    }

    /// Batch-mode decisions for unstandardized feature rows.
    pub fn predict_batch(&self, raw: ArrayView2<T>, per_batch_dm: bool) -> Result<Prediction<T>> {
        let x = self.normalize(raw)?;
        let (t0, t1) = batch_targets(x.view(), &self.embeddings, &self.config, per_batch_dm)?;
        let map = build_error_map(x.view(), &self.ded[0], &self.ded[1], ErrorMode::Batch, Some((t0.view(), t1.view())))?;
        let pred = finish(map, &self.svm_batch)?;
        if per_batch_dm && x.nrows() >= MIN_PER_BATCH_DM_ROWS {
            let speech = pred.labels.iter().filter(|&&y| y == 1).count() as f64 / pred.labels.len() as f64;
            if !(0.05..=0.95).contains(&speech) {
                log::warn!(
                    "batch looks single-hypothesis ({:.0}% speech); a per-batch diffusion map degenerates without both classes",
                    100.0 * speech
                );
            }
        }
        Ok(pred)
    }
}

fn finish<T: Real>(map: ErrorMap<T>, svm: &crate::classifier::SvmModel<T>) -> Result<Prediction<T>> {
    let scores = svm.score_map(&map)?;
    let labels = scores.iter().map(|&s| (s > T::zero()) as u8).collect();
    Ok(Prediction { labels, scores, map })
}

/// Frame-by-frame detector. Each frame's decision is emitted once its
/// context look-ahead has arrived.
pub struct RealtimeDetector<'a, T: Real> {
    bundle: &'a ModelBundle<T>,
    features: StreamingFeatures<T>,
    emitted: usize,
}

impl<'a, T: Real> RealtimeDetector<'a, T> {
    pub fn new(bundle: &'a ModelBundle<T>) -> Result<Self> {
        let c = &bundle.config;
        Ok(Self {
            bundle,
            features: StreamingFeatures::new(&c.mfcc, c.framing.frame_length, c.context_frames)?,
            emitted: 0,
        })
    }

    /// Frames of look-ahead before a decision is available.
    pub fn lookahead(&self) -> usize {
        self.features.lookahead()
    }

    pub fn push(&mut self, frame: ArrayView1<f64>) -> Result<Option<Decision<T>>> {
        match self.features.push(frame)? {
            Some(row) => {
                let d = decide(self.bundle, row, self.emitted)?;
                self.emitted += 1;
                Ok(Some(d))
            }
            None => Ok(None),
        }
    }

    /// Flushes the frames still waiting for look-ahead.
    pub fn finish(self) -> Result<Vec<Decision<T>>> {
        let RealtimeDetector { bundle, features, emitted } = self;
        features
            .finish()
            .into_iter()
            .enumerate()
            .map(|(i, row)| decide(bundle, row, emitted + i))
            .collect()
    }
}

fn decide<T: Real>(bundle: &ModelBundle<T>, raw: Array1<T>, index: usize) -> Result<Decision<T>> {
    let row = bundle.standardizer.apply(raw.view());
    let (_, score) = bundle.decide_row(row.view())?;
    Ok(Decision {
        index,
        label: (score > T::zero()) as u8,
        score,
    })
}

/// Streams every frame through a [`RealtimeDetector`].
pub fn infer_realtime<T: Real>(frames: &FrameSequence, bundle: &ModelBundle<T>) -> Result<Vec<Decision<T>>> {
    check_framing(frames, bundle)?;
    let mut det = RealtimeDetector::new(bundle)?;
    let mut out = Vec::with_capacity(frames.len());
    for n in 0..frames.len() {
        if let Some(d) = det.push(frames.frame(n))? {
            out.push(d);
        }
    }
    out.extend(det.finish()?);
    Ok(out)
}

/// Batch-mode decisions for a whole frame sequence.
pub fn infer_batch<T: Real>(frames: &FrameSequence, bundle: &ModelBundle<T>, per_batch_dm: bool) -> Result<Prediction<T>> {
    check_framing(frames, bundle)?;
    let raw = extract_features::<T>(frames, &bundle.config.mfcc, bundle.config.context_frames)?;
    if raw.nrows() < MIN_PER_BATCH_DM_ROWS {
        log::warn!(
            "batch of {} frames is small; encoder errors are only reliable for large batches",
            raw.nrows()
        );
    }
    bundle.predict_batch(raw.view(), per_batch_dm)
}

fn check_framing<T: Real>(frames: &FrameSequence, bundle: &ModelBundle<T>) -> Result<()> {
    let f = &bundle.config.framing;
    if frames.frame_length() != f.frame_length || frames.hop() != f.hop {
        return Err(VadError::Dimension(format!(
            "frames are {}/{} (length/hop), bundle expects {}/{}",
            frames.frame_length(),
            frames.hop(),
            f.frame_length,
            f.hop
        )));
    }
    Ok(())
}

/// Rows of `map` as decoder-only coordinates.
pub fn decoder_columns<T: Real>(map: &ErrorMap<T>) -> Array2<T> {
    match map.mode {
        ErrorMode::Realtime => map.values.clone(),
        ErrorMode::Batch => map.values.select(Axis(1), &[1, 3]),
    }
}
