use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1};

use super::context::base_row;
use super::mfcc::{MfccConfig, MfccExtractor, NoiseTracker};
use crate::error::Result;
use crate::Real;

/// Frame-by-frame feature extraction producing exactly the rows of
/// [`super::extract_features`], each delayed by `J + 2` frames: `J` for the
/// context window and two more for the Δ/ΔΔ central differences.
pub struct StreamingFeatures<T: Real> {
    extractor: MfccExtractor<T>,
    tracker: NoiseTracker<T>,
    j: usize,
    cepstra: VecDeque<Array1<T>>,
    /// absolute index of `cepstra[0]`
    offset: usize,
    pushed: usize,
    emitted: usize,
}

impl<T: Real> StreamingFeatures<T> {
    pub fn new(config: &MfccConfig, frame_length: usize, context_j: usize) -> Result<Self> {
        Ok(Self {
            extractor: MfccExtractor::new(config, frame_length)?,
            tracker: NoiseTracker::new(config),
            j: context_j,
            cepstra: VecDeque::new(),
            offset: 0,
            pushed: 0,
            emitted: 0,
        })
    }

    /// Frames of look-ahead needed before a row can be emitted.
    pub fn lookahead(&self) -> usize {
        self.j + 2
    }

    /// Feeds one frame; returns the next completed feature row, if any.
    pub fn push(&mut self, frame: ArrayView1<f64>) -> Result<Option<Array1<T>>> {
        let energies = self.extractor.mel_energies(frame)?;
        let noise = self.tracker.update(&energies);
        let c = self.extractor.cepstrum(&energies, &noise);
        self.cepstra.push_back(Array1::from(c));
        self.pushed += 1;
        if self.pushed > self.emitted + self.lookahead() {
            let row = self.row(self.emitted, self.pushed - 1);
            self.emitted += 1;
            self.trim();
            Ok(Some(row))
        } else {
            Ok(None)
        }
    }

    /// Flushes the rows still waiting on look-ahead, replicating the last frame.
    pub fn finish(mut self) -> Vec<Array1<T>> {
        let mut out = Vec::new();
        if self.pushed == 0 {
            return out;
        }
        let last = self.pushed - 1;
        while self.emitted < self.pushed {
            out.push(self.row(self.emitted, last));
            self.emitted += 1;
        }
        out
    }

    fn trim(&mut self) {
        let keep_from = self.emitted.saturating_sub(self.j + 2);
        while self.offset < keep_from {
            self.cepstra.pop_front();
            self.offset += 1;
        }
    }

    fn row(&self, n: usize, last: usize) -> Array1<T> {
        let ceps = |i: usize| self.cepstra[i - self.offset].view();
        let mut out = Vec::new();
        for o in -(self.j as isize)..=self.j as isize {
            let m = (n as isize + o).clamp(0, last as isize) as usize;
            out.extend(base_row(&ceps, m, last));
        }
        Array1::from(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_signal, synth, AudioSignal};
    use crate::features::extract_features;
    use rand::SeedableRng;

    #[test]
    fn streamed_rows_equal_offline_rows_bitwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let speech = synth::synthetic_speech(8000 * 6, 8000.0, Default::default(), &mut rng);
        let noise = synth::white_noise(speech.len(), &mut rng);
        let x: Vec<f64> = speech.iter().zip(&noise).map(|(s, n)| s + 0.02 * n).collect();
        let frames = frame_signal(&AudioSignal::new(x, 8000).unwrap(), 634, 317).unwrap();
        let cfg = MfccConfig::default();
        let offline = extract_features::<f64>(&frames, &cfg, 1).unwrap();
        let mut stream = StreamingFeatures::<f64>::new(&cfg, 634, 1).unwrap();
        let mut rows = Vec::new();
        for n in 0..frames.len() {
            if let Some(r) = stream.push(frames.frame(n)).unwrap() {
                rows.push(r);
            }
            // rows lag by exactly the look-ahead
            assert_eq!(rows.len(), (n + 1).saturating_sub(3));
        }
        rows.extend(stream.finish());
        assert_eq!(rows.len(), offline.nrows());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.view(), offline.row(i), "row {i}");
        }
    }

    #[test]
    fn short_streams_flush_everything() {
        let cfg = MfccConfig::default();
        let samples: Vec<f64> = (0..634 * 2).map(|t| (t as f64 * 0.1).sin() * 0.2).collect();
        let frames = frame_signal(&AudioSignal::new(samples, 8000).unwrap(), 634, 317).unwrap();
        let offline = extract_features::<f64>(&frames, &cfg, 1).unwrap();
        let mut stream = StreamingFeatures::<f64>::new(&cfg, 634, 1).unwrap();
        for n in 0..frames.len() {
            assert!(stream.push(frames.frame(n)).unwrap().is_none());
        }
        let rows = stream.finish();
        assert_eq!(rows.len(), frames.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.view(), offline.row(i));
        }
    }
}
