use ndarray::{Array2, ArrayView2, Axis};

use super::dataset::Dataset;
use super::split::{split_dataset, Splits};
use crate::classifier::{build_error_map, train_svm, ErrorMap, ErrorMode, SvmModel};
use crate::config::PipelineConfig;
use crate::ded::{train_ded, DedModel, Hypothesis, TrainReport};
use crate::diffusion::{DiffusionEmbedding, DiffusionParams};
use crate::error::{Result, VadError};
use crate::features::Standardizer;
use crate::seed::derive_seed;
use crate::Real;

/// Provenance stored alongside the trained parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleMetadata {
    pub crate_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// DED training row counts for H⁰ and H¹.
    pub ded_train_rows: [usize; 2],
    /// Hashes of the DED training index sets.
    pub ded_train_hash: [String; 2],
    pub classifier_rows: usize,
}

/// Everything inference needs; self-describing through its config.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub config: PipelineConfig,
    pub standardizer: Standardizer<T>,
    /// Networks for H⁰ and H¹.
    pub ded: [DedModel<T>; 2],
    pub svm_realtime: SvmModel<T>,
    pub svm_batch: SvmModel<T>,
    /// Diffusion embeddings of each hypothesis' training rows, for Nyström targets.
    pub embeddings: [DiffusionEmbedding<T>; 2],
    pub metadata: BundleMetadata,
}

/// A trained bundle plus training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedPipeline<T> {
    pub bundle: ModelBundle<T>,
    pub reports: [TrainReport; 2],
    pub splits: Splits,
    /// Classifier-split error maps (realtime, batch).
    pub classifier_maps: [ErrorMap<T>; 2],
}

/// Parameters of one hypothesis branch.
pub(crate) struct Branch<T> {
    pub embedding: DiffusionEmbedding<T>,
    pub model: DedModel<T>,
    pub report: TrainReport,
}

pub(crate) fn diffusion_params(config: &PipelineConfig, hypothesis: Hypothesis) -> DiffusionParams {
    DiffusionParams {
        seed: derive_seed(config.diffusion.seed, hypothesis.label() as u64),
        ..config.diffusion
    }
}

/// Diffusion map of one hypothesis' rows, then DED training against it.
pub(crate) fn train_branch<T: Real>(rows: ArrayView2<T>, hypothesis: Hypothesis, config: &PipelineConfig) -> Result<Branch<T>> {
    log::info!("hypothesis {}: diffusion map over {} rows", hypothesis.label(), rows.nrows());
    let embedding = DiffusionEmbedding::fit(rows, &diffusion_params(config, hypothesis)).map_err(|e| e.in_stage("diffusion"))?;
    let (model, report) =
        train_ded(rows, embedding.softmax.view(), hypothesis, &config.ded).map_err(|e| e.in_stage("ded training"))?;
    log::info!(
        "hypothesis {}: stacked loss {:.4e} → {:.4e} in {:.1} s",
        hypothesis.label(),
        report.initial_stacked_loss,
        report.final_stacked_loss,
        report.wall_time_s
    );
    Ok(Branch {
        embedding,
        model,
        report,
    })
}

pub(crate) fn train_branches<T: Real>(
    normalized: ArrayView2<T>,
    rows: &[Vec<usize>; 2],
    config: &PipelineConfig,
) -> Result<[Branch<T>; 2]> {
    let x0 = normalized.select(Axis(0), &rows[0]);
    let x1 = normalized.select(Axis(0), &rows[1]);
    let (b0, b1) = rayon::join(
        || train_branch(x0.view(), Hypothesis::Absent, config),
        || train_branch(x1.view(), Hypothesis::Present, config),
    );
    Ok([b0?, b1?])
}

/// Encoder targets for batch mode: each row extended into each hypothesis'
/// embedding, or one joint diffusion map over the rows themselves.
pub(crate) fn batch_targets<T: Real>(
    normalized: ArrayView2<T>,
    embeddings: &[DiffusionEmbedding<T>; 2],
    config: &PipelineConfig,
    per_batch_dm: bool,
) -> Result<(Array2<T>, Array2<T>)> {
    if per_batch_dm {
        if normalized.nrows() < super::MIN_PER_BATCH_DM_ROWS {
            log::warn!(
                "batch of {} frames is below {}; using Nyström targets instead of a per-batch diffusion map",
                normalized.nrows(),
                super::MIN_PER_BATCH_DM_ROWS
            );
        } else {
            let params = DiffusionParams {
                seed: derive_seed(config.diffusion.seed, 0xBA7C),
                ..config.diffusion
            };
            let emb = DiffusionEmbedding::fit(normalized, &params).map_err(|e| e.in_stage("per-batch diffusion"))?;
            return Ok((emb.softmax.clone(), emb.softmax));
        }
    }
    let t0 = embeddings[0].nystrom_rows(normalized).map_err(|e| e.in_stage("nystrom"))?;
    let t1 = embeddings[1].nystrom_rows(normalized).map_err(|e| e.in_stage("nystrom"))?;
    Ok((t0, t1))
}

pub(crate) fn batch_targets_for<T: Real>(
    normalized: &Array2<T>,
    embeddings: &[DiffusionEmbedding<T>; 2],
    config: &PipelineConfig,
) -> Result<(Array2<T>, Array2<T>)> {
    batch_targets(normalized.view(), embeddings, config, config.per_batch_dm)
}

/// Splits the data, trains both hypothesis branches and both classifiers.
pub fn train_pipeline<T: Real>(data: &Dataset<T>, config: &PipelineConfig) -> Result<TrainedPipeline<T>> {
    config.validate()?;
    if data.features.ncols() != config.feature_dim() {
        return Err(VadError::Dimension(format!(
            "dataset rows are {}-dim, config expects {}",
            data.features.ncols(),
            config.feature_dim()
        )));
    }
    let splits = split_dataset(&data.labels, &config.split).map_err(|e| e.in_stage("split"))?;
    for (h, rows) in splits.ded_train.iter().enumerate() {
        debug_assert!(rows.iter().all(|&i| data.labels[i] as usize == h));
        log::info!(
            "ded{h} training rows: {} (index hash {})",
            rows.len(),
            &Splits::index_hash(rows)[..16]
        );
    }
    let train_rows = data.features.select(Axis(0), &splits.ded_train_all());
    let standardizer = Standardizer::fit(train_rows.view()).map_err(|e| e.in_stage("standardize"))?;
    let normalized = standardizer.apply_rows(data.features.view());
    let [b0, b1] = train_branches(normalized.view(), &splits.ded_train, config)?;
    let embeddings = [b0.embedding, b1.embedding];
    let ded = [b0.model, b1.model];

    let cls_x = normalized.select(Axis(0), &splits.classifier);
    let cls_y: Vec<u8> = splits.classifier.iter().map(|&i| data.labels[i]).collect();
    let (svm_realtime, svm_batch, maps) = fit_classifiers(cls_x.view(), &cls_y, &ded, &embeddings, config)?;

    let metadata = BundleMetadata {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        ded_train_rows: [splits.ded_train[0].len(), splits.ded_train[1].len()],
        ded_train_hash: [
            Splits::index_hash(&splits.ded_train[0]),
            Splits::index_hash(&splits.ded_train[1]),
        ],
        classifier_rows: splits.classifier.len(),
    };
    Ok(TrainedPipeline {
        bundle: ModelBundle {
            config: config.clone(),
            standardizer,
            ded,
            svm_realtime,
            svm_batch,
            embeddings,
            metadata,
        },
        reports: [b0.report, b1.report],
        splits,
        classifier_maps: maps,
    })
}

pub(crate) fn fit_classifiers<T: Real>(
    x: ArrayView2<T>,
    labels: &[u8],
    ded: &[DedModel<T>; 2],
    embeddings: &[DiffusionEmbedding<T>; 2],
    config: &PipelineConfig,
) -> Result<(SvmModel<T>, SvmModel<T>, [ErrorMap<T>; 2])> {
    let stage = |e: VadError| e.in_stage("error map");
    let realtime = build_error_map(x, &ded[0], &ded[1], ErrorMode::Realtime, None).map_err(stage)?;
    let (t0, t1) = batch_targets(x, embeddings, config, config.per_batch_dm)?;
    let batch = build_error_map(x, &ded[0], &ded[1], ErrorMode::Batch, Some((t0.view(), t1.view()))).map_err(stage)?;
    let svm_rt = train_svm(&realtime, labels, &config.svm).map_err(|e| e.in_stage("svm"))?;
    let svm_bt = train_svm(&batch, labels, &config.svm).map_err(|e| e.in_stage("svm"))?;
    Ok((svm_rt, svm_bt, [realtime, batch]))
}
