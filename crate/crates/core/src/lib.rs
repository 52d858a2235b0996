//! Voice activity detection with diffusion encoder-decoder networks.
//!
//! Each hypothesis (speech present, speech absent) gets a feed-forward
//! encoder-decoder whose bottleneck is trained to match diffusion-maps
//! coordinates of that hypothesis' frames. A frame's reconstruction and
//! mapping errors under both networks place it in a low-dimensional error
//! space, where a linear SVM makes the decision.

pub mod audio;
pub mod classifier;
pub mod config;
pub mod ded;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod features;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod seed;

pub use config::PipelineConfig;
pub use error::{Result, VadError};
pub use scalar::Real;

/// Double-precision network.
pub type Ded = ded::DedModel<f64>;
/// Double-precision trained bundle.
pub type Bundle = pipeline::ModelBundle<f64>;
/// Double-precision dataset.
pub type FeatureSet = pipeline::Dataset<f64>;
/// Double-precision diffusion embedding.
pub type Embedding = diffusion::DiffusionEmbedding<f64>;
/// Double-precision classifier.
pub type Svm = classifier::SvmModel<f64>;
