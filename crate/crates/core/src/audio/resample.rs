use std::f64::consts::PI;

use super::AudioSignal;
use crate::error::Result;

const TAPS: usize = 64;

fn blackman(t: f64, half_width: f64) -> f64 {
    // t in [-half_width, half_width]
    let x = (t + half_width) / (2.0 * half_width);
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resamples to `target_rate` with a 64-tap Blackman-windowed sinc kernel.
///
/// The cutoff sits at the lower of the two Nyquist frequencies, so
/// downsampling is anti-aliased.
pub fn resample_sinc(signal: &AudioSignal, target_rate: u32) -> Result<AudioSignal> {
    let src_rate = signal.sample_rate_hz();
    if src_rate == target_rate {
        return Ok(signal.clone());
    }
    let ratio = target_rate as f64 / src_rate as f64;
    // normalized cutoff in cycles per input sample
    let cutoff = 0.5 * ratio.min(1.0);
    let input = signal.samples();
    let out_len = ((input.len() as f64) * ratio).round().max(1.0) as usize;
    let half = (TAPS / 2) as f64;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let t = m as f64 / ratio;
        let center = t.floor() as i64;
        let mut acc = 0.0;
        for j in (center - TAPS as i64 / 2 + 1)..=(center + TAPS as i64 / 2) {
            if j < 0 || j as usize >= input.len() {
                continue;
            }
            let d = t - j as f64;
            acc += input[j as usize] * 2.0 * cutoff * sinc(2.0 * cutoff * d) * blackman(d, half);
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    AudioSignal::new(out, target_rate)
}
