//! Synthetic stand-ins for recorded material: voiced/unvoiced
//! speech, white and first-order colored noise, and decaying click bursts.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn white_noise<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// White noise through `y[n] = x[n] + pole * y[n-1]`, rescaled to unit variance.
pub fn colored_noise<R: Rng>(len: usize, pole: f64, rng: &mut R) -> Vec<f64> {
    let gain = (1.0 - pole * pole).sqrt();
    let mut prev = 0.0;
    (0..len)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            prev = x + pole * prev;
            prev * gain
        })
        .collect()
}

/// Exponentially decaying noise burst with unit RMS.
pub fn click<R: Rng>(len: usize, decay_samples: f64, rng: &mut R) -> Vec<f64> {
    let mut burst: Vec<f64> = (0..len)
        .map(|n| {
            let x: f64 = StandardNormal.sample(rng);
            x * (-(n as f64) / decay_samples).exp()
        })
        .collect();
    let rms = (burst.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        burst.iter_mut().for_each(|v| *v /= rms);
    }
    burst
}

/// Two-pole resonator.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new() -> Self {
        Self {
            a1: 0.0,
            a2: 0.0,
            gain: 1.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tune(&mut self, freq: f64, bandwidth: f64, rate: f64) {
        let r = (-PI * bandwidth / rate).exp();
        self.a1 = 2.0 * r * (2.0 * PI * freq / rate).cos();
        self.a2 = -r * r;
        self.gain = 1.0 - self.a1 - self.a2;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

// (F1, F2, F3) in Hz
const VOWELS: [(f64, f64, f64); 8] = [
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
    (660.0, 1720.0, 2410.0),
    (490.0, 1350.0, 1690.0),
    (440.0, 1020.0, 2240.0),
];

#[derive(Debug, Clone, Copy)]
struct Voice {
    f0: f64,
    formant_scale: f64,
}

const VOICES: [Voice; 6] = [
    Voice { f0: 105.0, formant_scale: 0.92 },
    Voice { f0: 125.0, formant_scale: 0.97 },
    Voice { f0: 145.0, formant_scale: 1.0 },
    Voice { f0: 190.0, formant_scale: 1.08 },
    Voice { f0: 215.0, formant_scale: 1.12 },
    Voice { f0: 240.0, formant_scale: 1.15 },
];

/// Layout of utterances and pauses in a synthetic recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeechTiming {
    pub utterance_s: (f64, f64),
    pub pause_s: (f64, f64),
    pub syllable_s: (f64, f64),
}

impl Default for SpeechTiming {
    fn default() -> Self {
        Self {
            utterance_s: (0.8, 3.0),
            pause_s: (0.5, 2.2),
            syllable_s: (0.12, 0.32),
        }
    }
}

/// Speech-like signal of `len` samples: sentences of formant-filtered
/// harmonic syllables with occasional fricative onsets, separated by silent
/// pauses. Peak amplitude is normalized to 0.5.
pub fn synthetic_speech<R: Rng>(len: usize, rate: f64, timing: SpeechTiming, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let nyquist = rate / 2.0;
    let mut pos = (rng.gen_range(timing.pause_s.0..timing.pause_s.1) * rate) as usize;
    while pos < len {
        let voice = VOICES[rng.gen_range(0..VOICES.len())];
        let utt_len = (rng.gen_range(timing.utterance_s.0..timing.utterance_s.1) * rate) as usize;
        let utt_end = (pos + utt_len).min(len);
        let mut phase = 0.0;
        let mut vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
        let mut t = pos;
        while t < utt_end {
            let syl_len = ((rng.gen_range(timing.syllable_s.0..timing.syllable_s.1) * rate) as usize)
                .min(utt_end - t);
            if syl_len < 16 {
                break;
            }
            let next = VOWELS[rng.gen_range(0..VOWELS.len())];
            let level = rng.gen_range(0.35..1.0);
            let f0_start = voice.f0 * rng.gen_range(0.85..1.15);
            let f0_end = voice.f0 * rng.gen_range(0.8..1.1);
            let fricative = if rng.gen_bool(0.4) {
                (rng.gen_range(0.03..0.08) * rate) as usize
            } else {
                0
            }
            .min(syl_len / 2);
            let fric_center = rng.gen_range(2200.0..3400.0f64).min(nyquist * 0.9);
            let mut fric = Resonator::new();
            fric.tune(fric_center, 900.0, rate);
            let mut formants = [Resonator::new(), Resonator::new(), Resonator::new()];
            let attack = (0.02 * rate) as usize;
            for i in 0..syl_len {
                let u = i as f64 / syl_len as f64;
                let env = {
                    let a = (i as f64 / attack as f64).min(1.0);
                    let r = ((syl_len - i) as f64 / attack as f64).min(1.0);
                    (0.5 - 0.5 * (PI * a).cos()) * (0.5 - 0.5 * (PI * r).cos())
                };
                let sample = if i < fricative {
                    let x: f64 = StandardNormal.sample(rng);
                    0.35 * fric.step(x) * env
                } else {
                    let f0 = f0_start + (f0_end - f0_start) * u;
                    let jitter = 1.0 + 0.01 * rng.gen_range(-1.0..1.0);
                    phase = (phase + f0 * jitter / rate).fract();
                    let harmonics = ((nyquist * 0.95) / f0) as usize;
                    let mut src = 0.0;
                    for h in 1..=harmonics {
                        src += (2.0 * PI * h as f64 * phase).sin() / h as f64;
                    }
                    let glide = |a: f64, b: f64| (a + (b - a) * u) * voice.formant_scale;
                    let f = [
                        glide(vowel.0, next.0),
                        glide(vowel.1, next.1),
                        glide(vowel.2, next.2).min(nyquist * 0.92),
                    ];
                    let bw = [90.0, 120.0, 180.0];
                    let mut y = src;
                    for (k, res) in formants.iter_mut().enumerate() {
                        if i % 32 == 0 || i == fricative {
                            res.tune(f[k], bw[k], rate);
                        }
                        y = res.step(y);
                    }
                    y * env
                };
                out[t + i] += level * sample;
            }
            vowel = next;
            t += syl_len;
        }
        let pause = (rng.gen_range(timing.pause_s.0..timing.pause_s.1) * rate) as usize;
        pos = utt_end + pause;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn colored_noise_has_unit_variance_and_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = colored_noise(200_000, 0.9, &mut rng);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
        let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / x.len() as f64;
        assert!((lag1 - 0.9).abs() < 0.05, "{lag1}");
    }

    #[test]
    fn click_is_unit_rms_and_decays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = click(400, 64.0, &mut rng);
        let rms = (c.iter().map(|v| v * v).sum::<f64>() / 400.0).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let head: f64 = c[..100].iter().map(|v| v * v).sum();
        let tail: f64 = c[300..].iter().map(|v| v * v).sum();
        assert!(head > 100.0 * tail);
    }

    #[test]
    fn speech_has_pauses_and_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = synthetic_speech(8000 * 20, 8000.0, SpeechTiming::default(), &mut rng);
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        let silent = s.chunks(317).filter(|c| c.iter().all(|&v| v == 0.0)).count();
        let total = s.len() / 317;
        assert!(silent > total / 5 && silent < total * 4 / 5, "{silent}/{total}");
    }
}
