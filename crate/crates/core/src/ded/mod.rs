//! Diffusion encoder-decoder networks.

mod activation;
mod loss;
mod network;
mod train;

pub use activation::{pslt, pslt_grad};
pub use loss::{loss_and_gradients, Gradients, LayerGradient, LossParts, Regularization, Stage};
pub use network::{Architecture, DedModel, ForwardOutput, Hypothesis, Layer};
pub use train::{
    finetune_stage, full_loss, pretrain_layerwise, toy_sphere, train_ded, PretrainReport, StageReport, StopReason,
    TrainConfig, TrainReport,
};
