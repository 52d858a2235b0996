use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::framing::{frame_samples, label_frames, FrameLabels};
use super::synth::{self, SpeechTiming};
use super::{load_audio, AudioSignal};
use crate::error::{Result, VadError};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum SpeechSource {
    File(PathBuf),
    Synthetic { duration_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    File(PathBuf),
    White,
    /// First-order IIR-colored noise with the given pole.
    Colored { pole: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransientSource {
    File(PathBuf),
    /// Exponentially decaying bursts of `length` samples.
    Clicks { length: usize, decay_samples: f64 },
}

/// Recipe for one noisy scene: speech plus scaled stationary noise plus
/// transient events.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub speech: SpeechSource,
    pub stationary_noise: NoiseSource,
    /// Speech-to-stationary-noise ratio over speech-active frames;
    /// `f64::INFINITY` disables the noise.
    pub snr_db: f64,
    pub transient: TransientSource,
    pub transients_per_minute: f64,
    /// RMS of each transient event relative to the active speech RMS.
    pub transient_gain_db: f64,
    pub rng_seed: u64,
}

/// Framing and labeling parameters shared by scene mixing and feature extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Framing {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop: usize,
    pub label_threshold_db: f64,
}

impl Default for Framing {
    fn default() -> Self {
        Self {
            sample_rate: super::DEFAULT_SAMPLE_RATE,
            frame_length: 634,
            hop: 317,
            label_threshold_db: -40.0,
        }
    }
}

/// A mixed scene with its components kept for auditing.
#[derive(Debug, Clone)]
pub struct Scene {
    pub noisy: AudioSignal,
    pub clean: AudioSignal,
    /// Stationary noise after SNR scaling.
    pub stationary: Vec<f64>,
    pub transients: Vec<f64>,
    pub labels: FrameLabels,
}

const STREAM_SPEECH: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_TRANSIENT: u64 = 3;

/// Sum of frame energies over the frames labeled as speech.
pub fn active_frame_energy(signal: &[f64], labels: &FrameLabels, framing: &Framing) -> f64 {
    labels
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 1)
        .map(|(n, _)| {
            let start = n * framing.hop;
            signal[start..start + framing.frame_length]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
        })
        .sum()
}

fn tile(source: &[f64], len: usize) -> Vec<f64> {
    source.iter().copied().cycle().take(len).collect()
}

/// Builds `noisy = clean + stationary + transients` following `spec`.
///
/// Labels come from the clean speech alone. If the mixture would clip, every
/// component is scaled by the same factor so the decomposition, the labels
/// and the SNR are unchanged.
pub fn mix_scene(spec: &SceneSpec, framing: &Framing) -> Result<Scene> {
    if !(spec.snr_db.is_finite() || spec.snr_db == f64::INFINITY) {
        return Err(VadError::ImpossibleSnr(format!("snr_db = {}", spec.snr_db)));
    }
    if !(spec.transients_per_minute >= 0.0) {
        return Err(VadError::Config("transients_per_minute must be nonnegative".into()));
    }
    let rate = framing.sample_rate;
    let mut clean = match &spec.speech {
        SpeechSource::File(path) => load_audio(path, rate, false)?.into_samples(),
        SpeechSource::Synthetic { duration_s } => {
            let len = (duration_s * rate as f64).round() as usize;
            let mut rng = seed::rng(spec.rng_seed, STREAM_SPEECH);
            synth::synthetic_speech(len, rate as f64, SpeechTiming::default(), &mut rng)
        }
    };
    let len = clean.len();
    let clean_frames = frame_samples(&clean, framing.frame_length, framing.hop)?;
    let labels = label_frames(&clean_frames, framing.label_threshold_db)?;
    let speech_energy = active_frame_energy(&clean, &labels, framing);
    let active_frames = labels.count_speech();

    let mut stationary = if spec.snr_db == f64::INFINITY {
        vec![0.0; len]
    } else {
        let mut rng = seed::rng(spec.rng_seed, STREAM_NOISE);
        let raw = match &spec.stationary_noise {
            NoiseSource::File(path) => tile(load_audio(path, rate, false)?.samples(), len),
            NoiseSource::White => synth::white_noise(len, &mut rng),
            NoiseSource::Colored { pole } => synth::colored_noise(len, *pole, &mut rng),
        };
        let noise_energy = active_frame_energy(&raw, &labels, framing);
        if noise_energy <= 0.0 {
            return Err(VadError::ImpossibleSnr("stationary noise source has zero energy".into()));
        }
        let gain = (speech_energy / (noise_energy * 10f64.powf(spec.snr_db / 10.0))).sqrt();
        raw.into_iter().map(|v| v * gain).collect()
    };

    let mut transients = vec![0.0; len];
    if spec.transients_per_minute > 0.0 {
        let mut rng = seed::rng(spec.rng_seed, STREAM_TRANSIENT);
        let template: Option<Vec<f64>> = match &spec.transient {
            TransientSource::File(path) => Some(load_audio(path, rate, false)?.into_samples()),
            TransientSource::Clicks { .. } => None,
        };
        let event_len = match (&template, &spec.transient) {
            (Some(t), _) => t.len(),
            (None, TransientSource::Clicks { length, .. }) => *length,
            (None, TransientSource::File(_)) => unreachable!(),
        };
        if event_len > len {
            return Err(VadError::TransientTooLong {
                transient: event_len,
                signal: len,
            });
        }
        let speech_rms =
            (speech_energy / (active_frames * framing.frame_length) as f64).sqrt();
        let target_rms = speech_rms * 10f64.powf(spec.transient_gain_db / 20.0);
        let minutes = len as f64 / rate as f64 / 60.0;
        let expected = spec.transients_per_minute * minutes;
        let count = if expected > 0.0 {
            Poisson::new(expected)
                .map_err(|e| VadError::Config(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            let offset = rng.gen_range(0..=len - event_len);
            let event = match (&template, &spec.transient) {
                (Some(t), _) => {
                    let rms = (t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64).sqrt();
                    if rms > 0.0 {
                        t.iter().map(|v| v / rms).collect()
                    } else {
                        t.clone()
                    }
                }
                (None, TransientSource::Clicks { length, decay_samples }) => {
                    synth::click(*length, *decay_samples, &mut rng)
                }
                (None, TransientSource::File(_)) => unreachable!(),
            };
            for (i, v) in event.iter().enumerate() {
                transients[offset + i] += v * target_rms;
            }
        }
    }

    let peak = (0..len)
        .map(|i| (clean[i] + stationary[i] + transients[i]).abs())
        .fold(0.0f64, f64::max);
    if peak > 0.99 {
        let g = 0.99 / peak;
        for v in clean
            .iter_mut()
            .chain(stationary.iter_mut())
            .chain(transients.iter_mut())
        {
            *v *= g;
        }
    }
    let noisy: Vec<f64> = (0..len)
        .map(|i| clean[i] + stationary[i] + transients[i])
        .collect();
    Ok(Scene {
        noisy: AudioSignal::new(noisy, rate)?,
        clean: AudioSignal::new(clean, rate)?,
        stationary,
        transients,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(snr_db: f64, rate: f64, seed: u64) -> SceneSpec {
        SceneSpec {
            speech: SpeechSource::Synthetic { duration_s: 20.0 },
            stationary_noise: NoiseSource::White,
            snr_db,
            transient: TransientSource::Clicks {
                length: 400,
                decay_samples: 64.0,
            },
            transients_per_minute: rate,
            transient_gain_db: 0.0,
            rng_seed: seed,
        }
    }

    #[test]
    fn noiseless_mix_is_identity() {
        let scene = mix_scene(&spec(f64::INFINITY, 0.0, 1), &Framing::default()).unwrap();
        assert_eq!(scene.noisy.samples(), scene.clean.samples());
    }

    #[test]
    fn measured_snr_matches_request() {
        let framing = Framing::default();
        for snr in [0.0, 10.0, 25.0] {
            let scene = mix_scene(&spec(snr, 30.0, 4), &framing).unwrap();
            let es = active_frame_energy(scene.clean.samples(), &scene.labels, &framing);
            let en = active_frame_energy(&scene.stationary, &scene.labels, &framing);
            let measured = 10.0 * (es / en).log10();
            assert!((measured - snr).abs() < 0.1, "{measured} vs {snr}");
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let framing = Framing::default();
        let a = mix_scene(&spec(10.0, 30.0, 9), &framing).unwrap();
        let b = mix_scene(&spec(10.0, 30.0, 9), &framing).unwrap();
        assert_eq!(a.noisy, b.noisy);
        let c = mix_scene(&spec(10.0, 30.0, 10), &framing).unwrap();
        assert_ne!(a.noisy, c.noisy);
    }

    #[test]
    fn decomposition_is_exact() {
        let scene = mix_scene(&spec(0.0, 60.0, 5), &Framing::default()).unwrap();
        assert!(scene.transients.iter().any(|&v| v != 0.0));
        let max_residual = (0..scene.noisy.len())
            .map(|i| {
                (scene.noisy.samples()[i]
                    - scene.clean.samples()[i]
                    - scene.stationary[i]
                    - scene.transients[i])
                    .abs()
            })
            .fold(0.0f64, f64::max);
        assert!(max_residual < 1e-15);
    }

    #[test]
    fn labels_ignore_noise() {
        let framing = Framing::default();
        let a = mix_scene(&spec(5.0, 30.0, 5), &framing).unwrap();
        let mut other = spec(20.0, 0.0, 5);
        other.stationary_noise = NoiseSource::Colored { pole: 0.9 };
        let b = mix_scene(&other, &framing).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn oversized_transient_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speech.wav");
        let tone: Vec<f64> = (0..2000).map(|t| 0.3 * (0.2 * t as f64).sin()).collect();
        crate::audio::save_wav(&AudioSignal::new(tone, 8000).unwrap(), &path).unwrap();
        let mut s = spec(10.0, 10.0, 1);
        s.speech = SpeechSource::File(path);
        s.transient = TransientSource::Clicks {
            length: 10_000,
            decay_samples: 64.0,
        };
        assert!(matches!(
            mix_scene(&s, &Framing::default()),
            Err(VadError::TransientTooLong { .. })
        ));
    }

    #[test]
    fn silent_noise_file_is_impossible_snr() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quiet.wav");
        crate::audio::save_wav(&AudioSignal::new(vec![0.0; 800], 8000).unwrap(), &path).unwrap();
        let mut s = spec(10.0, 0.0, 1);
        s.stationary_noise = NoiseSource::File(path);
        assert!(matches!(
            mix_scene(&s, &Framing::default()),
            Err(VadError::ImpossibleSnr(_))
        ));
    }
}
