//! Error maps and the linear decision rule built on them.

mod errors;
mod svm;

pub use errors::{build_error_map, decoder_error, encoder_error, ErrorCoordinate, ErrorMap, ErrorMode};
pub use svm::{class_weights, svm_objective, train_linear_svm, train_svm, ClassWeighting, SvmModel, SvmSolver, SvmTrainConfig};
