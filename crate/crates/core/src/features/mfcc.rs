use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::FrameSequence;
use crate::error::{Result, VadError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hamming,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        let denom = (len.max(2) - 1) as f64;
        (0..len)
            .map(|n| {
                let c = (2.0 * std::f64::consts::PI * n as f64 / denom).cos();
                match self {
                    Window::Hamming => 0.54 - 0.46 * c,
                    Window::Hann => 0.5 - 0.5 * c,
                }
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hamming => "hamming",
            Window::Hann => "hann",
        }
    }
}

/// Cepstral front-end settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub num_ceps: usize,
    pub num_mel_filters: usize,
    pub fft_length: usize,
    pub window: Window,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
    pub weighting_enabled: bool,
    /// Minimum-statistics window in frames.
    pub noise_window: usize,
    pub noise_bias: f64,
    /// First-order smoothing of band powers before minimum tracking.
    pub noise_smoothing: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            num_ceps: 8,
            num_mel_filters: 26,
            fft_length: 1024,
            window: Window::Hamming,
            low_hz: 0.0,
            high_hz: 4000.0,
            log_floor: 1e-10,
            weighting_enabled: true,
            noise_window: 50,
            noise_bias: 1.5,
            noise_smoothing: 0.7,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, frame_length: usize) -> Result<()> {
        let fail = |m: String| Err(VadError::Config(m));
        if self.num_ceps == 0 || self.num_ceps > self.num_mel_filters {
            return fail(format!(
                "num_ceps ({}) must be in 1..=num_mel_filters ({})",
                self.num_ceps, self.num_mel_filters
            ));
        }
        if self.fft_length < frame_length {
            return fail(format!(
                "fft_length ({}) shorter than frame length ({frame_length})",
                self.fft_length
            ));
        }
        if !(self.low_hz >= 0.0 && self.low_hz < self.high_hz)
            || self.high_hz > self.sample_rate as f64 / 2.0
        {
            return fail(format!(
                "filterbank range {}..{} Hz invalid for rate {}",
                self.low_hz, self.high_hz, self.sample_rate
            ));
        }
        if !(self.log_floor > 0.0) {
            return fail("log_floor must be positive".into());
        }
        if self.noise_window == 0 || !(self.noise_bias > 0.0) {
            return fail("noise_window and noise_bias must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise_smoothing) {
            return fail("noise_smoothing must be in [0, 1)".into());
        }
        Ok(())
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    /// `num_filters × (fft_length/2 + 1)`
    weights: Array2<T>,
    centers_hz: Vec<f64>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn new(config: &MfccConfig) -> Self {
        let bins = config.fft_length / 2 + 1;
        let m_lo = hz_to_mel(config.low_hz);
        let m_hi = hz_to_mel(config.high_hz);
        let n = config.num_mel_filters;
        let edges: Vec<f64> = (0..n + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n + 1) as f64))
            .collect();
        let bin_hz = config.sample_rate as f64 / config.fft_length as f64;
        let weights = Array2::from_shape_fn((n, bins), |(b, k)| {
            let f = k as f64 * bin_hz;
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            let w = ((f - l) / (c - l)).min((r - f) / (r - c)).max(0.0);
            T::lit(w)
        });
        Self {
            weights,
            centers_hz: edges[1..=n].to_vec(),
        }
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn apply(&self, power: ArrayView1<T>) -> Array1<T> {
        self.weights.dot(&power)
    }
}

/// Reusable spectral analysis state for one frame length.
pub struct MfccExtractor<T: Real> {
    config: MfccConfig,
    frame_length: usize,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    buffer: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    filterbank: MelFilterbank<T>,
    /// DCT-II rows 1..=num_ceps, orthonormal scaling.
    dct: Array2<T>,
}

impl<T: Real> MfccExtractor<T> {
    pub fn new(config: &MfccConfig, frame_length: usize) -> Result<Self> {
        config.validate(frame_length)?;
        let fft = FftPlanner::<T>::new().plan_fft_forward(config.fft_length);
        let scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        let b = config.num_mel_filters;
        let dct = Array2::from_shape_fn((config.num_ceps, b), |(k, j)| {
            let angle = std::f64::consts::PI * (k + 1) as f64 * (j as f64 + 0.5) / b as f64;
            T::lit((2.0 / b as f64).sqrt() * angle.cos())
        });
        Ok(Self {
            window: config
                .window
                .coefficients(frame_length)
                .into_iter()
                .map(T::lit)
                .collect(),
            buffer: vec![Complex::new(T::zero(), T::zero()); config.fft_length],
            scratch,
            fft,
            filterbank: MelFilterbank::new(config),
            dct,
            frame_length,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    /// One-sided power spectrum of the windowed, zero-padded frame.
    pub fn power_spectrum(&mut self, frame: ArrayView1<f64>) -> Result<Array1<T>> {
        if frame.len() != self.frame_length {
            return Err(VadError::Dimension(format!(
                "frame has {} samples, extractor expects {}",
                frame.len(),
                self.frame_length
            )));
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(VadError::NonFinite("frame samples".into()));
        }
        for (i, slot) in self.buffer.iter_mut().enumerate() {
            let v = if i < self.frame_length {
                T::lit(frame[i]) * self.window[i]
            } else {
                T::zero()
            };
            *slot = Complex::new(v, T::zero());
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let bins = self.config.fft_length / 2 + 1;
        Ok(Array1::from_iter(
            self.buffer[..bins].iter().map(|c| c.norm_sqr()),
        ))
    }

    pub fn mel_energies(&mut self, frame: ArrayView1<f64>) -> Result<Array1<T>> {
        let power = self.power_spectrum(frame)?;
        Ok(self.filterbank.apply(power.view()))
    }

    /// Weighted log-mel cepstrum (coefficients 1..=num_ceps) from band
    /// energies and a per-band noise estimate.
    pub fn cepstrum(&self, energies: &Array1<T>, noise: &Array1<T>) -> Vec<T> {
        let floor = T::lit(self.config.log_floor);
        let min_gain = T::lit(0.1);
        let logs: Array1<T> = energies
            .iter()
            .zip(noise.iter())
            .map(|(&e, &nz)| {
                let weighted = if self.config.weighting_enabled && e > T::zero() {
                    let gain = (T::one() - nz / e).max(min_gain);
                    gain * e
                } else {
                    e
                };
                weighted.max(floor).ln()
            })
            .collect();
        self.dct.dot(&logs).to_vec()
    }

    pub fn filterbank(&self) -> &MelFilterbank<T> {
        &self.filterbank
    }
}

/// Weighted MFCCs of a single frame against a given noise estimate.
pub fn compute_mfcc<T: Real>(
    frame: ArrayView1<f64>,
    noise_psd: &Array1<T>,
    config: &MfccConfig,
) -> Result<Vec<T>> {
    let mut ex = MfccExtractor::<T>::new(config, frame.len())?;
    let energies = ex.mel_energies(frame)?;
    if noise_psd.len() != energies.len() {
        return Err(VadError::Dimension(format!(
            "noise estimate has {} bands, filterbank has {}",
            noise_psd.len(),
            energies.len()
        )));
    }
    Ok(ex.cepstrum(&energies, noise_psd))
}

/// Causal minimum-statistics noise tracker over mel band powers.
#[derive(Debug, Clone)]
pub struct NoiseTracker<T> {
    window: usize,
    bias: T,
    smoothing: T,
    floor: T,
    smoothed: Option<Array1<T>>,
    history: std::collections::VecDeque<Array1<T>>,
}

impl<T: Real> NoiseTracker<T> {
    pub fn new(config: &MfccConfig) -> Self {
        Self {
            window: config.noise_window,
            bias: T::lit(config.noise_bias),
            smoothing: T::lit(config.noise_smoothing),
            floor: T::lit(config.log_floor),
            smoothed: None,
            history: std::collections::VecDeque::with_capacity(config.noise_window),
        }
    }

    /// Consumes one frame's band energies and returns the current estimate.
    pub fn update(&mut self, energies: &Array1<T>) -> Array1<T> {
        let a = self.smoothing;
        let next = match &self.smoothed {
            None => energies.clone(),
            Some(prev) => prev * a + energies * (T::one() - a),
        };
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(next.clone());
        self.smoothed = Some(next);
        let bands = energies.len();
        Array1::from_shape_fn(bands, |b| {
            let min = self
                .history
                .iter()
                .map(|h| h[b])
                .fold(T::infinity(), |m, v| m.min(v));
            (min * self.bias).max(self.floor)
        })
    }
}

/// Per-frame, per-band noise power estimate (`N × num_mel_filters`).
pub fn estimate_noise_psd<T: Real>(frames: &FrameSequence, config: &MfccConfig) -> Result<Array2<T>> {
    let mut ex = MfccExtractor::<T>::new(config, frames.frame_length())?;
    let mut tracker = NoiseTracker::new(config);
    let mut out = Array2::zeros((frames.len(), config.num_mel_filters));
    for n in 0..frames.len() {
        let e = ex.mel_energies(frames.frame(n))?;
        out.row_mut(n).assign(&tracker.update(&e));
    }
    Ok(out)
}
