//! Command-line front end: scene mixing, feature extraction, training,
//! inference and evaluation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dedvad::audio::{frame_signal, load_audio, mix_scene, save_wav};
use dedvad::eval::{compute_metrics, roc, run_grid};
use dedvad::persist::{bundle_hash, load_bundle, save_bundle};
use dedvad::pipeline::{infer_batch, infer_realtime, signal_features, split_dataset, train_pipeline, Prediction, Splits};
use dedvad::{report, Bundle, FeatureSet, PipelineConfig, VadError};

#[derive(Parser)]
#[command(name = "dedvad", version, about = "Voice activity detection with diffusion encoder-decoder networks")]
struct Cli {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Batch-mode encoder targets from a diffusion map of each batch.
    #[arg(long, global = true)]
    per_batch_dm: bool,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mix the configured scenes into noisy/clean WAV pairs and frame labels.
    Mix {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Extract unstandardized feature rows from a WAV file or the configured scenes.
    Features {
        #[command(flatten)]
        source: AudioSource,
        /// Frame labels (`frame_index,label`) to append to the rows.
        #[arg(long, requires = "input")]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both networks and classifiers and write a model bundle.
    Train {
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        out: PathBuf,
        /// Directory for loss curves and diffusion embeddings.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Per-frame decisions from a trained bundle.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        source: InferSource,
        /// Resample input at another rate instead of rejecting it.
        #[arg(long)]
        resample: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the error-space coordinates of every frame.
        #[arg(long)]
        error_map: Option<PathBuf>,
    },
    /// Accuracy and error rates of both modes on labeled features.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        eval: EvalData,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold sweep of the classifier score.
    Roc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "realtime")]
        mode: Mode,
        #[command(flatten)]
        eval: EvalData,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain over the configured fractions × speech ratios.
    Grid {
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Realtime,
    Batch,
}

#[derive(Args)]
struct AudioSource {
    /// Mono 16-bit WAV; the configured scenes are used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Resample input at another rate instead of rejecting it.
    #[arg(long)]
    resample: bool,
}

#[derive(Args)]
struct DataSource {
    /// Labeled feature CSV; the configured scenes are used when absent.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InferSource {
    /// Mono 16-bit WAV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Unstandardized feature CSV.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct EvalData {
    /// Labeled feature CSV.
    #[arg(long)]
    features: PathBuf,
    /// Restrict to the held-out split; the rows must be the training data.
    #[arg(long)]
    test_split: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, VadError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if cli.per_batch_dm {
        config.per_batch_dm = true;
    }
    Ok(config)
}

fn dataset(config: &PipelineConfig, features: Option<&Path>) -> Result<FeatureSet, VadError> {
    match features {
        Some(path) => {
            let (x, labels) = report::read_features::<f64>(path)?;
            let labels = labels.ok_or_else(|| {
                VadError::InsufficientData(format!("{} has no label column", path.display()))
            })?;
            FeatureSet::new(x, labels)
        }
        None => config.benchmark.build(config),
    }
}

fn bundle(cli: &Cli, path: &Path) -> Result<Bundle, VadError> {
    let mut b: Bundle = load_bundle(path)?;
    if cli.per_batch_dm {
        b.config.per_batch_dm = true;
    }
    Ok(b)
}

/// Labeled rows to score, optionally narrowed to the bundle's test split.
fn eval_rows(b: &Bundle, eval: &EvalData) -> Result<FeatureSet, VadError> {
    let data = dataset(&b.config, Some(&eval.features))?;
    if !eval.test_split {
        return Ok(data);
    }
    let splits = split_dataset(&data.labels, &b.config.split)?;
    for h in 0..2 {
        if Splits::index_hash(&splits.ded_train[h]) != b.metadata.ded_train_hash[h] {
            return Err(VadError::InsufficientData(
                "features are not the bundle's training data, so its test split cannot be recovered".into(),
            ));
        }
    }
    Ok(data.select(&splits.test))
}

fn predict(b: &Bundle, rows: &FeatureSet, mode: Mode) -> Result<Prediction<f64>, VadError> {
    match mode {
        Mode::Realtime => b.predict_realtime(rows.features.view()),
        Mode::Batch => b.predict_batch(rows.features.view(), b.config.per_batch_dm),
    }
}

fn run(cli: Cli) -> Result<(), VadError> {
    match &cli.command {
        Command::Mix { out_dir } => {
            let config = load_config(&cli)?;
            std::fs::create_dir_all(out_dir).map_err(|e| VadError::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            for (i, spec) in config.benchmark.scene_specs().iter().enumerate() {
                let scene = mix_scene(spec, &config.framing)?;
                save_wav(&scene.noisy, &out_dir.join(format!("scene{i}_noisy.wav")))?;
                save_wav(&scene.clean, &out_dir.join(format!("scene{i}_clean.wav")))?;
                report::write_labels(&out_dir.join(format!("scene{i}_labels.csv")), scene.labels.as_slice())?;
                println!(
                    "scene {i}: {} frames, {} speech",
                    scene.labels.len(),
                    scene.labels.count_speech()
                );
            }
        }
        Command::Features { source, labels, out } => {
            let config = load_config(&cli)?;
            let (x, y) = match &source.input {
                Some(path) => {
                    let signal = load_audio(path, config.framing.sample_rate, source.resample)?;
                    let x = signal_features::<f64>(&signal, &config)?;
                    let y = labels.as_deref().map(report::read_labels).transpose()?;
                    if let Some(y) = &y {
                        if y.len() != x.nrows() {
                            return Err(VadError::Dimension(format!(
                                "{} labels for {} frames",
                                y.len(),
                                x.nrows()
                            )));
                        }
                    }
                    (x, y)
                }
                None => {
                    let data = config.benchmark.build::<f64>(&config)?;
                    (data.features, Some(data.labels))
                }
            };
            report::write_features(out, x.view(), y.as_deref())?;
            println!("{} rows of {} features", x.nrows(), x.ncols());
        }
        Command::Train { data, out, report_dir } => {
            let config = load_config(&cli)?;
            let data = dataset(&config, data.features.as_deref())?;
            let start = Instant::now();
            let trained = train_pipeline(&data, &config)?;
            save_bundle(&trained.bundle, out)?;
            if let Some(dir) = report_dir {
                std::fs::create_dir_all(dir).map_err(|e| VadError::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                report::write_loss_curves(&dir.join("loss_curves.csv"), &trained.reports)?;
                for (h, e) in trained.bundle.embeddings.iter().enumerate() {
                    report::write_embedding(&dir.join(format!("embedding{h}.csv")), e)?;
                }
            }
            println!(
                "trained on {} frames in {:.1}s, bundle {}",
                data.len(),
                start.elapsed().as_secs_f64(),
                bundle_hash(&trained.bundle)
            );
        }
        Command::Infer {
            model,
            mode,
            source,
            resample,
            out,
            error_map,
        } => {
            let b = bundle(&cli, model)?;
            let (labels, scores, map) = if let Some(path) = &source.input {
                let signal = load_audio(path, b.config.framing.sample_rate, *resample)?;
                let frames = frame_signal(&signal, b.config.framing.frame_length, b.config.framing.hop)?;
                match mode {
                    Mode::Batch => {
                        let p = infer_batch(&frames, &b, b.config.per_batch_dm)?;
                        (p.labels, p.scores, Some(p.map))
                    }
                    Mode::Realtime => {
                        let decisions = infer_realtime(&frames, &b)?;
                        // the streamed decisions equal the offline ones, which also carry the map
                        let map = match error_map {
                            Some(_) => Some(b.predict_realtime(signal_features::<f64>(&signal, &b.config)?.view())?.map),
                            None => None,
                        };
                        (
                            decisions.iter().map(|d| d.label).collect(),
                            decisions.iter().map(|d| d.score).collect(),
                            map,
                        )
                    }
                }
            } else {
                let path = source.features.as_ref().expect("clap enforces one source");
                let (x, _) = report::read_features::<f64>(path)?;
                let rows = FeatureSet::new(x.clone(), vec![0; x.nrows()])?;
                let p = predict(&b, &rows, *mode)?;
                (p.labels, p.scores, Some(p.map))
            };
            report::write_predictions(out, &labels, &scores)?;
            if let (Some(path), Some(map)) = (error_map, &map) {
                report::write_error_map(path, map, &labels)?;
            }
            let speech = labels.iter().filter(|&&y| y == 1).count();
            println!("{} frames, {speech} speech", labels.len());
        }
        Command::Evaluate { model, eval, out } => {
            let b = bundle(&cli, model)?;
            let rows = eval_rows(&b, eval)?;
            let rt = predict(&b, &rows, Mode::Realtime)?;
            let bt = predict(&b, &rows, Mode::Batch)?;
            let rt_m = compute_metrics(&rt.labels, &rows.labels)?;
            let bt_m = compute_metrics(&bt.labels, &rows.labels)?;
            let rt_auc = roc(&rt.scores, &rows.labels)?.auc;
            let bt_auc = roc(&bt.scores, &rows.labels)?.auc;
            report::write_metrics(out, &[("realtime", &rt_m, Some(rt_auc)), ("batch", &bt_m, Some(bt_auc))])?;
            println!(
                "{} frames: realtime accuracy {:.4} (auc {rt_auc:.4}), batch accuracy {:.4} (auc {bt_auc:.4})",
                rows.len(),
                rt_m.accuracy,
                bt_m.accuracy
            );
        }
        Command::Roc { model, mode, eval, out } => {
            let b = bundle(&cli, model)?;
            let rows = eval_rows(&b, eval)?;
            let pred = predict(&b, &rows, *mode)?;
            let curve = roc(&pred.scores, &rows.labels)?;
            report::write_roc(out, &curve)?;
            println!("{} thresholds, auc {:.4}", curve.points.len(), curve.auc);
        }
        Command::Grid { data, out } => {
            let config = load_config(&cli)?;
            let data = dataset(&config, data.features.as_deref())?;
            let result = run_grid(&data, &config.grid, &config)?;
            report::write_grid(out, &result)?;
            for c in &result.cells {
                println!(
                    "fraction {} ratio {}: accuracy {:.4} (batch {:.4})",
                    c.fraction, c.ratio, c.accuracy, c.batch_accuracy
                );
            }
        }
    }
    Ok(())
}
