//! End-to-end training and inference flows.

mod dataset;
mod evaluate;
mod infer;
mod split;
mod train;

pub use dataset::{dataset_from_scenes, signal_features, Benchmark, Dataset};
pub use evaluate::TestEvaluation;
pub use infer::{decoder_columns, infer_batch, infer_realtime, Decision, Prediction, RealtimeDetector, MIN_PER_BATCH_DM_ROWS};
pub use split::{split_dataset, SplitSpec, Splits};
pub use train::{train_pipeline, BundleMetadata, ModelBundle, TrainedPipeline};
pub(crate) use train::{batch_targets_for, fit_classifiers, train_branches};
