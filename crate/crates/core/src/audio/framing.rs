use ndarray::{Array2, ArrayView1};

use super::AudioSignal;
use crate::error::{Result, VadError};

/// Overlapping frames cut from a signal, one frame per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frame_length: usize,
    hop: usize,
    frames: Array2<f64>,
}

impl FrameSequence {
    pub fn from_rows(frames: Array2<f64>, hop: usize) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 || hop == 0 {
            return Err(VadError::InvalidSignal("empty frame sequence".into()));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(VadError::NonFinite("frame samples".into()));
        }
        Ok(Self {
            frame_length: frames.ncols(),
            hop,
            frames,
        })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn frame(&self, n: usize) -> ArrayView1<'_, f64> {
        self.frames.row(n)
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }
}

/// Number of frames produced by [`frame_signal`] for a signal of `len` samples.
pub fn frame_count(len: usize, frame_length: usize, hop: usize) -> usize {
    if len < frame_length || hop == 0 {
        0
    } else {
        (len - frame_length) / hop + 1
    }
}

/// Cuts `signal` into frames of `frame_length` samples starting every `hop` samples.
/// Trailing samples that do not fill a whole frame are dropped.
pub fn frame_signal(signal: &AudioSignal, frame_length: usize, hop: usize) -> Result<FrameSequence> {
    frame_samples(signal.samples(), frame_length, hop)
}

pub(crate) fn frame_samples(samples: &[f64], frame_length: usize, hop: usize) -> Result<FrameSequence> {
    if hop == 0 || frame_length == 0 {
        return Err(VadError::InvalidSignal("frame length and hop must be positive".into()));
    }
    if samples.len() < frame_length {
        return Err(VadError::SignalTooShort {
            len: samples.len(),
            frame_length,
        });
    }
    let n = frame_count(samples.len(), frame_length, hop);
    let frames = Array2::from_shape_fn((n, frame_length), |(i, j)| samples[i * hop + j]);
    FrameSequence::from_rows(frames, hop)
}

/// Binary speech-presence labels, one per frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameLabels(Vec<u8>);

impl FrameLabels {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(VadError::InvalidSignal(format!(
                "label {} at frame {pos} is not 0 or 1",
                labels[pos]
            )));
        }
        Ok(Self(labels))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_speech(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

/// Labels a frame as speech when its energy is within `threshold_db` of the
/// loudest frame of the clean speech signal.
pub fn label_frames(clean_frames: &FrameSequence, threshold_db: f64) -> Result<FrameLabels> {
    let energies: Vec<f64> = clean_frames
        .frames
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect();
    let e_max = energies.iter().copied().fold(0.0, f64::max);
    if e_max <= 0.0 {
        return Err(VadError::NoSpeechContent);
    }
    let labels = energies
        .iter()
        .map(|&e| {
            // e == 0 gives -inf dB
            let db = 10.0 * (e / e_max).log10();
            u8::from(db > threshold_db)
        })
        .collect();
    Ok(FrameLabels(labels))
}
