#![allow(dead_code)]

pub mod svm;

use dedvad::pipeline::{train_pipeline, Benchmark, TrainedPipeline};
use dedvad::{FeatureSet, PipelineConfig};

/// Two short scenes, enough for every split to hold both classes.
pub fn small_benchmark() -> Benchmark {
    Benchmark {
        scenes: 2,
        scene_seconds: 24.0,
        ..Benchmark::default()
    }
}

/// Benchmark settings with a narrow network and a short schedule.
pub fn small_config(seed: u64) -> PipelineConfig {
    let mut c = Benchmark::config(seed);
    c.ded.architecture.hidden = vec![24, 24];
    c.ded.pretrain_epochs = 3;
    c.ded.max_epochs = 12;
    c
}

pub fn trained(seed: u64) -> (FeatureSet, TrainedPipeline<f64>) {
    let config = small_config(seed);
    let data = small_benchmark().build::<f64>(&config).unwrap();
    let trained = train_pipeline(&data, &config).unwrap();
    (data, trained)
}
