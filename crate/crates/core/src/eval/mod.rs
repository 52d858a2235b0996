//! Accuracy, ROC and the training-size × speech-ratio experiment grid.

mod grid;
mod metrics;
mod roc;

pub use grid::{run_grid, ExperimentGrid, GridCell, GridResult};
pub use metrics::{compute_metrics, Metrics};
pub use roc::{roc, RocCurve, RocPoint};
