use std::path::PathBuf;

use ndarray::{concatenate, Array2, Axis};

use crate::audio::{frame_signal, mix_scene, AudioSignal, NoiseSource, SceneSpec, SpeechSource, TransientSource};
use crate::config::PipelineConfig;
use crate::error::{Result, VadError};
use crate::features::extract_features;
use crate::seed::derive_seed;
use crate::Real;

/// Unstandardized feature rows with 0/1 frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Array2<T>,
    pub labels: Vec<u8>,
}

impl<T: Real> Dataset<T> {
    pub fn new(features: Array2<T>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(VadError::Dimension(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(VadError::InvalidSignal("labels must be 0 or 1".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(VadError::NonFinite("dataset features".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    /// Row-wise concatenation.
    pub fn concat(parts: &[Dataset<T>]) -> Result<Self> {
        let views: Vec<_> = parts.iter().map(|d| d.features.view()).collect();
        let features = concatenate(Axis(0), &views).map_err(|e| VadError::Dimension(e.to_string()))?;
        Ok(Self {
            features,
            labels: parts.iter().flat_map(|d| d.labels.iter().copied()).collect(),
        })
    }
}

/// Frames a signal and extracts unstandardized feature rows.
pub fn signal_features<T: Real>(signal: &AudioSignal, config: &PipelineConfig) -> Result<Array2<T>> {
    if signal.sample_rate_hz() != config.framing.sample_rate {
        return Err(VadError::RateMismatch {
            expected: config.framing.sample_rate,
            found: signal.sample_rate_hz(),
        });
    }
    let frames = frame_signal(signal, config.framing.frame_length, config.framing.hop)?;
    extract_features(&frames, &config.mfcc, config.context_frames)
}

/// Mixes each scene, extracts its features and concatenates the results.
/// The noise tracker restarts with every scene.
pub fn dataset_from_scenes<T: Real>(scenes: &[SceneSpec], config: &PipelineConfig) -> Result<Dataset<T>> {
    let mut parts = Vec::with_capacity(scenes.len());
    for spec in scenes {
        let scene = mix_scene(spec, &config.framing)?;
        let features = signal_features(&scene.noisy, config)?;
        parts.push(Dataset::new(features, scene.labels.into_inner())?);
    }
    Dataset::concat(&parts)
}

/// Synthetic desk-scale benchmark: `scenes` recordings of `scene_seconds`
/// each, alternating white and colored noise at `snr_db`, with clicks.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub scenes: usize,
    pub scene_seconds: f64,
    pub snr_db: f64,
    pub transients_per_minute: f64,
    pub transient_gain_db: f64,
    pub seed: u64,
    /// Recorded sources replacing the synthetic ones in every scene.
    pub speech_file: Option<PathBuf>,
    pub noise_file: Option<PathBuf>,
    pub transient_file: Option<PathBuf>,
}

impl Default for Benchmark {
    fn default() -> Self {
        Self {
            scenes: 4,
            scene_seconds: 150.0,
            snr_db: 10.0,
            transients_per_minute: 20.0,
            transient_gain_db: 0.0,
            seed: 2024,
            speech_file: None,
            noise_file: None,
            transient_file: None,
        }
    }
}

impl Benchmark {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || !(self.scene_seconds > 0.0 && self.scene_seconds.is_finite()) {
            return Err(VadError::Config(
                "benchmark needs at least one scene of positive duration".into(),
            ));
        }
        if self.snr_db.is_nan() || !(self.transients_per_minute >= 0.0) || !self.transient_gain_db.is_finite() {
            return Err(VadError::Config(
                "benchmark snr, transient rate and transient gain must be valid numbers".into(),
            ));
        }
        Ok(())
    }

    pub fn scene_specs(&self) -> Vec<SceneSpec> {
        (0..self.scenes)
            .map(|i| SceneSpec {
                speech: match &self.speech_file {
                    Some(p) => SpeechSource::File(p.clone()),
                    None => SpeechSource::Synthetic {
                        duration_s: self.scene_seconds,
                    },
                },
                stationary_noise: match (&self.noise_file, i % 3) {
                    (Some(p), _) => NoiseSource::File(p.clone()),
                    (None, 0) => NoiseSource::White,
                    (None, 1) => NoiseSource::Colored { pole: 0.9 },
                    (None, _) => NoiseSource::Colored { pole: -0.5 },
                },
                snr_db: self.snr_db,
                transient: match &self.transient_file {
                    Some(p) => TransientSource::File(p.clone()),
                    None => TransientSource::Clicks {
                        length: 400,
                        decay_samples: 60.0,
                    },
                },
                transients_per_minute: self.transients_per_minute,
                transient_gain_db: self.transient_gain_db,
                rng_seed: derive_seed(self.seed, i as u64),
            })
            .collect()
    }

    pub fn build<T: Real>(&self, config: &PipelineConfig) -> Result<Dataset<T>> {
        dataset_from_scenes(&self.scene_specs(), config)
    }

    /// Published settings except the network schedule, which is scaled to
    /// run on a desktop CPU: no sparsity penalty, narrower initial weights,
    /// a higher starting fine-tuning rate and a shorter epoch budget.
    pub fn config(seed: u64) -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.ded.regularization.sparsity_weight = 0.0;
        c.ded.init_std = 0.03;
        c.ded.finetune_lr = 1e-3;
        c.ded.max_epochs = 300;
        c.with_seed(seed)
    }
}
