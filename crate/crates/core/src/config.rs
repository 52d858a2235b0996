//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::audio::Framing;
use crate::classifier::{ClassWeighting, SvmSolver, SvmTrainConfig};
use crate::ded::{Architecture, TrainConfig};
use crate::diffusion::DiffusionParams;
use crate::error::{Result, VadError};
use crate::eval::ExperimentGrid;
use crate::features::{feature_dim, MfccConfig, Window};
use crate::pipeline::{Benchmark, SplitSpec};
use crate::seed::derive_seed;

/// Every tunable of the pipeline. Defaults are the published values.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub framing: Framing,
    pub mfcc: MfccConfig,
    /// Context half-width J; rows stack `2J + 1` frames.
    pub context_frames: usize,
    pub diffusion: DiffusionParams,
    pub ded: TrainConfig,
    pub svm: SvmTrainConfig,
    pub split: SplitSpec,
    pub grid: ExperimentGrid,
    /// Synthetic scene generator behind `mix` and the benchmark dataset.
    pub benchmark: Benchmark,
    /// Batch-mode encoder targets from a fresh diffusion map of each batch
    /// instead of Nyström extension.
    pub per_batch_dm: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut c = Self {
            framing: Framing::default(),
            mfcc: MfccConfig::default(),
            context_frames: 1,
            diffusion: DiffusionParams::default(),
            ded: TrainConfig::default(),
            svm: SvmTrainConfig::default(),
            split: SplitSpec::default(),
            grid: ExperimentGrid::default(),
            benchmark: Benchmark::default(),
            per_batch_dm: false,
            seed: 0,
        };
        c.sync();
        c
    }
}

const SEED_SPLIT: u64 = 1;
const SEED_DM: u64 = 2;
const SEED_DED: u64 = 3;
const SEED_SVM: u64 = 4;

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| VadError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(VadError::Config(format!("{key}: expected true/false, got {value:?}"))),
    }
}

fn parse_list<V: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_path(value: &str) -> Option<std::path::PathBuf> {
    (!value.is_empty()).then(|| value.into())
}

fn show_path(p: &Option<std::path::PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Pushes the master seed and derived dimensions into the sub-configs.
    fn sync(&mut self) {
        self.mfcc.sample_rate = self.framing.sample_rate;
        self.split.seed = derive_seed(self.seed, SEED_SPLIT);
        self.diffusion.seed = derive_seed(self.seed, SEED_DM);
        self.ded.seed = derive_seed(self.seed, SEED_DED);
        self.svm.seed = derive_seed(self.seed, SEED_SVM);
        self.ded.architecture.input = feature_dim(self.mfcc.num_ceps, self.context_frames);
        self.ded.architecture.bottleneck = self.diffusion.dim;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync();
        self
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(self.mfcc.num_ceps, self.context_frames)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "sample_rate" => self.framing.sample_rate = parse_num(key, v)?,
            "frame_length" => self.framing.frame_length = parse_num(key, v)?,
            "hop" => self.framing.hop = parse_num(key, v)?,
            "label_threshold_db" => self.framing.label_threshold_db = parse_num(key, v)?,
            "num_ceps" => self.mfcc.num_ceps = parse_num(key, v)?,
            "num_mel_filters" => self.mfcc.num_mel_filters = parse_num(key, v)?,
            "fft_length" => self.mfcc.fft_length = parse_num(key, v)?,
            "window" => {
                self.mfcc.window = match v {
                    "hamming" => Window::Hamming,
                    "hann" => Window::Hann,
                    _ => return Err(VadError::Config(format!("window: unknown window {v:?}"))),
                }
            }
            "low_hz" => self.mfcc.low_hz = parse_num(key, v)?,
            "high_hz" => self.mfcc.high_hz = parse_num(key, v)?,
            "log_floor" => self.mfcc.log_floor = parse_num(key, v)?,
            "noise_weighting" => self.mfcc.weighting_enabled = parse_bool(key, v)?,
            "noise_window" => self.mfcc.noise_window = parse_num(key, v)?,
            "noise_bias" => self.mfcc.noise_bias = parse_num(key, v)?,
            "noise_smoothing" => self.mfcc.noise_smoothing = parse_num(key, v)?,
            "context_frames" => self.context_frames = parse_num(key, v)?,
            "dm_neighbors" => self.diffusion.k = parse_num(key, v)?,
            "dm_dim" => self.diffusion.dim = parse_num(key, v)?,
            "dm_max_points" => self.diffusion.max_points = parse_num(key, v)?,
            "hidden_layers" => self.ded.architecture.hidden = parse_list(key, v)?,
            "pretrain_epochs" => self.ded.pretrain_epochs = parse_num(key, v)?,
            "pretrain_lr" => self.ded.pretrain_lr = parse_num(key, v)?,
            "finetune_lr" => self.ded.finetune_lr = parse_num(key, v)?,
            "momentum" => self.ded.momentum = parse_num(key, v)?,
            "max_epochs" => self.ded.max_epochs = parse_num(key, v)?,
            "min_gradient" => self.ded.min_gradient = parse_num(key, v)?,
            "batch_size" => self.ded.batch_size = parse_num(key, v)?,
            "l2_weight" => self.ded.regularization.l2_weight = parse_num(key, v)?,
            "sparsity_weight" => self.ded.regularization.sparsity_weight = parse_num(key, v)?,
            "sparsity_target" => self.ded.regularization.sparsity_target = parse_num(key, v)?,
            "init_std" => self.ded.init_std = parse_num(key, v)?,
            "init_bias" => self.ded.init_bias = parse_num(key, v)?,
            "lr_increase" => self.ded.lr_increase = parse_num(key, v)?,
            "lr_decrease" => self.ded.lr_decrease = parse_num(key, v)?,
            "max_loss_increase" => self.ded.max_loss_increase = parse_num(key, v)?,
            "svm_c" => self.svm.c = parse_num(key, v)?,
            "svm_epochs" => self.svm.epochs = parse_num(key, v)?,
            "svm_solver" => {
                self.svm.solver = match v {
                    "smo" => SvmSolver::Smo,
                    "subgradient" => SvmSolver::Subgradient,
                    _ => return Err(VadError::Config(format!("svm_solver: unknown value {v:?}"))),
                }
            }
            "svm_class_weighting" => {
                self.svm.class_weighting = match v {
                    "inverse-frequency" => ClassWeighting::InverseFrequency,
                    "uniform" => ClassWeighting::Uniform,
                    _ => return Err(VadError::Config(format!("svm_class_weighting: unknown value {v:?}"))),
                }
            }
            "svm_standardize" => self.svm.standardize = parse_bool(key, v)?,
            "ded_train_fraction" => self.split.ded_train_fraction = parse_num(key, v)?,
            "classifier_fraction" => self.split.classifier_fraction = parse_num(key, v)?,
            "test_fraction" => self.split.test_fraction = parse_num(key, v)?,
            "grid_fractions" => self.grid.fractions = parse_list(key, v)?,
            "grid_ratios" => self.grid.ratios = parse_list(key, v)?,
            "benchmark_scenes" => self.benchmark.scenes = parse_num(key, v)?,
            "benchmark_scene_seconds" => self.benchmark.scene_seconds = parse_num(key, v)?,
            "benchmark_snr_db" => self.benchmark.snr_db = parse_num(key, v)?,
            "benchmark_transients_per_minute" => self.benchmark.transients_per_minute = parse_num(key, v)?,
            "benchmark_transient_gain_db" => self.benchmark.transient_gain_db = parse_num(key, v)?,
            "benchmark_seed" => self.benchmark.seed = parse_num(key, v)?,
            "scene_speech_file" => self.benchmark.speech_file = parse_path(v),
            "scene_noise_file" => self.benchmark.noise_file = parse_path(v),
            "scene_transient_file" => self.benchmark.transient_file = parse_path(v),
            "per_batch_dm" => self.per_batch_dm = parse_bool(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Err(VadError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// `(key, value)` pairs in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = &self.framing;
        let m = &self.mfcc;
        let d = &self.ded;
        let r = &d.regularization;
        vec![
            ("sample_rate", f.sample_rate.to_string()),
            ("frame_length", f.frame_length.to_string()),
            ("hop", f.hop.to_string()),
            ("label_threshold_db", f.label_threshold_db.to_string()),
            ("num_ceps", m.num_ceps.to_string()),
            ("num_mel_filters", m.num_mel_filters.to_string()),
            ("fft_length", m.fft_length.to_string()),
            ("window", m.window.name().to_string()),
            ("low_hz", m.low_hz.to_string()),
            ("high_hz", m.high_hz.to_string()),
            ("log_floor", m.log_floor.to_string()),
            ("noise_weighting", m.weighting_enabled.to_string()),
            ("noise_window", m.noise_window.to_string()),
            ("noise_bias", m.noise_bias.to_string()),
            ("noise_smoothing", m.noise_smoothing.to_string()),
            ("context_frames", self.context_frames.to_string()),
            ("dm_neighbors", self.diffusion.k.to_string()),
            ("dm_dim", self.diffusion.dim.to_string()),
            ("dm_max_points", self.diffusion.max_points.to_string()),
            ("hidden_layers", join(&d.architecture.hidden)),
            ("pretrain_epochs", d.pretrain_epochs.to_string()),
            ("pretrain_lr", d.pretrain_lr.to_string()),
            ("finetune_lr", d.finetune_lr.to_string()),
            ("momentum", d.momentum.to_string()),
            ("max_epochs", d.max_epochs.to_string()),
            ("min_gradient", d.min_gradient.to_string()),
            ("batch_size", d.batch_size.to_string()),
            ("l2_weight", r.l2_weight.to_string()),
            ("sparsity_weight", r.sparsity_weight.to_string()),
            ("sparsity_target", r.sparsity_target.to_string()),
            ("init_std", d.init_std.to_string()),
            ("init_bias", d.init_bias.to_string()),
            ("lr_increase", d.lr_increase.to_string()),
            ("lr_decrease", d.lr_decrease.to_string()),
            ("max_loss_increase", d.max_loss_increase.to_string()),
            ("svm_c", self.svm.c.to_string()),
            ("svm_epochs", self.svm.epochs.to_string()),
            ("svm_solver", self.svm.solver.as_str().to_string()),
            (
                "svm_class_weighting",
                match self.svm.class_weighting {
                    ClassWeighting::InverseFrequency => "inverse-frequency",
                    ClassWeighting::Uniform => "uniform",
                }
                .to_string(),
            ),
            ("svm_standardize", self.svm.standardize.to_string()),
            ("ded_train_fraction", self.split.ded_train_fraction.to_string()),
            ("classifier_fraction", self.split.classifier_fraction.to_string()),
            ("test_fraction", self.split.test_fraction.to_string()),
            ("grid_fractions", join(&self.grid.fractions)),
            ("grid_ratios", join(&self.grid.ratios)),
            ("benchmark_scenes", self.benchmark.scenes.to_string()),
            ("benchmark_scene_seconds", self.benchmark.scene_seconds.to_string()),
            ("benchmark_snr_db", self.benchmark.snr_db.to_string()),
            ("benchmark_transients_per_minute", self.benchmark.transients_per_minute.to_string()),
            ("benchmark_transient_gain_db", self.benchmark.transient_gain_db.to_string()),
            ("benchmark_seed", self.benchmark.seed.to_string()),
            ("scene_speech_file", show_path(&self.benchmark.speech_file)),
            ("scene_noise_file", show_path(&self.benchmark.noise_file)),
            ("scene_transient_file", show_path(&self.benchmark.transient_file)),
            ("per_batch_dm", self.per_batch_dm.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Parses and validates a document; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                VadError::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(VadError::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            config
                .set(key, value.trim())
                .map_err(|e| VadError::Config(format!("line {}: {}", lineno + 1, strip_prefix(&e))))?;
        }
        config.sync();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VadError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of the serialized document.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.serialize().as_bytes()))
    }

    /// Module invariants plus cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(VadError::Config(m));
        let f = &self.framing;
        if f.sample_rate == 0 || f.frame_length == 0 || f.hop == 0 || f.hop > f.frame_length {
            return fail(format!(
                "framing needs sample_rate, frame_length > 0 and 1 <= hop <= frame_length (got {}, {}, {})",
                f.sample_rate, f.frame_length, f.hop
            ));
        }
        if !f.label_threshold_db.is_finite() || f.label_threshold_db >= 0.0 {
            return fail("label_threshold_db must be negative".into());
        }
        self.mfcc.validate(f.frame_length)?;
        if self.diffusion.k == 0 {
            return fail("dm_neighbors (k) must be at least 1".into());
        }
        if self.diffusion.dim == 0 {
            return fail("dm_dim must be at least 1".into());
        }
        if self.diffusion.max_points <= self.diffusion.k {
            return fail("dm_max_points must exceed dm_neighbors".into());
        }
        self.ded.validate()?;
        let expect = Architecture {
            input: self.feature_dim(),
            hidden: self.ded.architecture.hidden.clone(),
            bottleneck: self.diffusion.dim,
        };
        if self.ded.architecture != expect {
            return fail("network widths disagree with feature and diffusion dimensions".into());
        }
        if !(self.svm.c > 0.0) || self.svm.epochs == 0 {
            return fail("svm_c must be positive and svm_epochs at least 1".into());
        }
        self.split.validate()?;
        self.grid.validate()?;
        self.benchmark.validate()?;
        Ok(())
    }
}

fn strip_prefix(e: &VadError) -> String {
    match e {
        VadError::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_published_defaults() {
        let c = PipelineConfig::parse("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.framing.frame_length, 634);
        assert_eq!(c.framing.hop, 317);
        assert_eq!(c.mfcc.num_ceps, 8);
        assert_eq!(c.diffusion.k, 10);
        assert_eq!(c.diffusion.dim, 3);
        assert_eq!(c.ded.finetune_lr, 1e-5);
        assert_eq!(c.ded.momentum, 0.9);
        assert_eq!(c.ded.batch_size, 128);
        assert_eq!(c.ded.architecture, Architecture::default());
        assert_eq!(c.grid.fractions.len() * c.grid.ratios.len(), 20);
    }

    #[test]
    fn comments_and_whitespace() {
        let c = PipelineConfig::parse("# header\n  dm_neighbors = 12   # more\n\nseed=7\n").unwrap();
        assert_eq!(c.diffusion.k, 12);
        assert_eq!(c.seed, 7);
        assert_eq!(c.ded.seed, derive_seed(7, SEED_DED));
    }

    #[test]
    fn rejects_bad_documents() {
        let err = PipelineConfig::parse("dm_neighbors = 0").unwrap_err().to_string();
        assert!(err.contains("k"), "{err}");
        let err = PipelineConfig::parse("foo = 1").unwrap_err().to_string();
        assert!(err.contains("foo"), "{err}");
        assert!(PipelineConfig::parse("momentum = fast").is_err());
        assert!(PipelineConfig::parse("num_ceps = 30").is_err());
        assert!(PipelineConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(PipelineConfig::parse("test_fraction = 0.3").is_err());
        assert!(PipelineConfig::parse("just words").is_err());
        assert!(PipelineConfig::parse("grid_ratios = 0.5,1.5").is_err());
        assert!(PipelineConfig::parse("benchmark_scenes = 0").is_err());
    }

    #[test]
    fn scene_sources_round_trip() {
        let c = PipelineConfig::parse("scene_noise_file = /data/babble.wav\nbenchmark_snr_db = inf").unwrap();
        assert_eq!(c.benchmark.noise_file.as_deref(), Some(Path::new("/data/babble.wav")));
        assert!(c.benchmark.speech_file.is_none());
        assert_eq!(c.benchmark.snr_db, f64::INFINITY);
        assert_eq!(PipelineConfig::parse(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn dimensions_follow_features_and_embedding() {
        let c = PipelineConfig::parse("num_ceps = 6\ncontext_frames = 2\ndm_dim = 4").unwrap();
        assert_eq!(c.ded.architecture.input, 3 * 6 * 5);
        assert_eq!(c.ded.architecture.bottleneck, 4);
    }

    proptest! {
        #[test]
        fn serialize_round_trip(
            k in 1usize..40,
            lr in 1e-9f64..1.0,
            mom in 0.0f64..0.99,
            seed in any::<u64>(),
            ceps in 1usize..26,
            hidden in proptest::collection::vec(1usize..300, 1..4),
            frac in 0.05f64..0.9,
            dm in any::<bool>(),
        ) {
            let mut c = PipelineConfig::default();
            c.diffusion.k = k;
            c.ded.finetune_lr = lr;
            c.ded.momentum = mom;
            c.mfcc.num_ceps = ceps;
            c.ded.architecture.hidden = hidden;
            c.split.ded_train_fraction = frac;
            c.split.classifier_fraction = (1.0 - frac) / 2.0;
            c.split.test_fraction = 1.0 - frac - c.split.classifier_fraction;
            c.per_batch_dm = dm;
            let c = c.with_seed(seed);
            prop_assume!(c.validate().is_ok());
            let back = PipelineConfig::parse(&c.serialize()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.hash(), c.hash());
        }
    }
}
