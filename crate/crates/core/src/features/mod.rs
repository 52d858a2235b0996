//! Weighted-MFCC context features: framed audio in, standardized and
//! range-mapped 72-dimensional vectors out.

mod context;
mod mfcc;
mod standardize;
mod stream;

pub use context::{append_deltas, concat_context, BASE_DIM_FACTOR};
pub use mfcc::{
    compute_mfcc, estimate_noise_psd, MelFilterbank, MfccConfig, MfccExtractor, NoiseTracker,
    Window,
};
pub use standardize::Standardizer;
pub use stream::StreamingFeatures;

use ndarray::Array2;

use crate::audio::FrameSequence;
use crate::error::Result;
use crate::Real;

/// Full offline feature pipeline: weighted MFCCs with a causal noise
/// estimate, Δ/ΔΔ, and `2J+1`-frame context. Rows are unstandardized.
pub fn extract_features<T: Real>(
    frames: &FrameSequence,
    config: &MfccConfig,
    context_j: usize,
) -> Result<Array2<T>> {
    let mut extractor = MfccExtractor::<T>::new(config, frames.frame_length())?;
    let mut tracker = NoiseTracker::<T>::new(config);
    let mut mfcc = Array2::<T>::zeros((frames.len(), config.num_ceps));
    for n in 0..frames.len() {
        let energies = extractor.mel_energies(frames.frame(n))?;
        let noise = tracker.update(&energies);
        let coeffs = extractor.cepstrum(&energies, &noise);
        mfcc.row_mut(n).assign(&ndarray::ArrayView1::from(&coeffs[..]));
    }
    let base = append_deltas(mfcc.view());
    Ok(concat_context(base.view(), context_j))
}

/// Feature dimension for a given cepstral order and context half-width.
pub fn feature_dim(num_ceps: usize, context_j: usize) -> usize {
    BASE_DIM_FACTOR * num_ceps * (2 * context_j + 1)
}
