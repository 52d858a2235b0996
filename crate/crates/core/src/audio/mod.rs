//! Audio ingestion, synthetic scene generation and framing.

mod framing;
mod resample;
mod scene;
pub mod synth;

use std::path::Path;

pub use framing::{frame_signal, label_frames, FrameLabels, FrameSequence};
pub use resample::resample_sinc;
pub use scene::{
    active_frame_energy, mix_scene, Framing, NoiseSource, Scene, SceneSpec, SpeechSource,
    TransientSource,
};

use crate::error::{Result, VadError};

/// Canonical sample rate of the pipeline.
pub const DEFAULT_SAMPLE_RATE: u32 = 8000;

/// A mono signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(VadError::InvalidSignal("empty signal".into()));
        }
        if sample_rate_hz == 0 {
            return Err(VadError::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(VadError::NonFinite(format!("audio sample {pos}")));
        }
        if let Some(pos) = samples.iter().position(|s| s.abs() > 1.0) {
            return Err(VadError::InvalidSignal(format!(
                "sample {pos} = {} outside [-1, 1]",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Reads a 16-bit PCM mono WAV file.
///
/// When the file's rate differs from `expected_rate` the call fails unless
/// `allow_resample` is set, in which case the signal is resampled with a
/// 64-tap windowed-sinc interpolator.
pub fn load_audio(path: &Path, expected_rate: u32, allow_resample: bool) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => VadError::io(path, io),
        other => VadError::AudioDecode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(VadError::MultiChannel {
            channels: spec.channels,
        });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(VadError::AudioDecode {
            path: path.to_path_buf(),
            reason: format!(
                "expected 16-bit PCM, found {} bits {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| VadError::AudioDecode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let signal = AudioSignal::new(samples, spec.sample_rate)?;
    if spec.sample_rate == expected_rate {
        Ok(signal)
    } else if allow_resample {
        resample_sinc(&signal, expected_rate)
    } else {
        Err(VadError::RateMismatch {
            found: spec.sample_rate,
            expected: expected_rate,
        })
    }
}

/// Writes a signal as 16-bit PCM mono WAV via a temp file and rename.
pub fn save_wav(signal: &AudioSignal, path: &Path) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    crate::persist::write_atomic(path, |file| {
        let mut writer = hound::WavWriter::new(std::io::BufWriter::new(file), spec)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        for &s in &signal.samples {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer
                .write_sample(v)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
        writer
            .finalize()
            .map_err(|e| std::io::Error::other(e.to_string()))
    })
}
