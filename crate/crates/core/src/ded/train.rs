use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::loss::{chain_loss, loss_and_gradients, Gradients, LayerGradient, LossParts, Regularization, Role, Stage};
use super::network::{Architecture, DedModel, Hypothesis, Layer};
use crate::error::{Result, VadError};
use crate::seed;
use crate::Real;

/// Hyperparameters of DED training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub finetune_lr: f64,
    pub momentum: f64,
    /// Epoch cap for each fine-tuning stage.
    pub max_epochs: usize,
    /// Stop a stage once the full-data gradient infinity-norm falls below this.
    pub min_gradient: f64,
    pub batch_size: usize,
    pub regularization: Regularization,
    /// Standard deviation of the initial weights.
    pub init_std: f64,
    /// Learning-rate growth after an epoch that lowered the loss.
    pub lr_increase: f64,
    /// Learning-rate cut after a rejected epoch.
    pub lr_decrease: f64,
    /// An epoch whose loss exceeds the previous one by more than this factor
    /// is undone and its momentum discarded.
    pub max_loss_increase: f64,
    /// Initial bias of every unit; the middle of the PSLT linear range keeps
    /// units off the flat segments at the start.
    pub init_bias: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::default(),
            pretrain_epochs: 1,
            pretrain_lr: 0.1,
            finetune_lr: 1e-5,
            momentum: 0.9,
            max_epochs: 1000,
            min_gradient: 1e-6,
            batch_size: 128,
            regularization: Regularization::default(),
            init_std: 0.1,
            init_bias: 0.5,
            lr_increase: 1.05,
            lr_decrease: 0.7,
            max_loss_increase: 1.04,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pretrain_lr", self.pretrain_lr),
            ("finetune_lr", self.finetune_lr),
            ("init_std", self.init_std),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(VadError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let reg = &self.regularization;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(VadError::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.lr_increase >= 1.0 && self.lr_increase.is_finite()) || !(self.max_loss_increase >= 1.0) {
            return Err(VadError::Config("lr_increase and max_loss_increase must be at least 1".into()));
        }
        if !(self.lr_decrease > 0.0 && self.lr_decrease <= 1.0) {
            return Err(VadError::Config(format!("lr_decrease must lie in (0, 1], got {}", self.lr_decrease)));
        }
        if !(0.0..=1.0).contains(&self.init_bias) {
            return Err(VadError::Config(format!("init_bias must lie in [0, 1], got {}", self.init_bias)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(VadError::Config("batch_size and max_epochs must be at least 1".into()));
        }
        if !(self.min_gradient >= 0.0) || !(reg.l2_weight >= 0.0) || !(reg.sparsity_weight >= 0.0) {
            return Err(VadError::Config("min_gradient and regularization weights must be non-negative".into()));
        }
        if !(reg.sparsity_target > 0.0 && reg.sparsity_target < 1.0) {
            return Err(VadError::Config("sparsity_target must lie in (0, 1)".into()));
        }
        let a = &self.architecture;
        if a.input == 0 || a.bottleneck == 0 || a.hidden.iter().any(|&h| h == 0) {
            return Err(VadError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    MinGradient,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max-epochs",
            StopReason::MinGradient => "min-gradient",
        }
    }
}

/// Reconstruction loss of one pretrained layer, measured on the full layer input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainReport {
    pub loss_before: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    /// Full-data loss after each epoch (after any rejection).
    pub losses: Vec<f64>,
    /// Full-data gradient infinity-norm after each epoch.
    pub gradient_norms: Vec<f64>,
    pub stop_reason: StopReason,
    pub wall_time_s: f64,
}

impl StageReport {
    pub fn epochs(&self) -> usize {
        self.losses.len()
    }

    pub fn final_gradient_norm(&self) -> f64 {
        self.gradient_norms.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub hypothesis: Hypothesis,
    pub pretrain: Vec<PretrainReport>,
    pub stages: Vec<StageReport>,
    /// Stacked loss of a freshly initialized network.
    pub initial_stacked_loss: f64,
    /// Stacked loss right after layer-wise pretraining.
    pub pretrained_stacked_loss: f64,
    pub final_stacked_loss: f64,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

fn batches<R: Rng>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

fn sgd_step<T: Real>(layer: &mut Layer<T>, velocity: &mut LayerGradient<T>, grad: &LayerGradient<T>, lr: T, momentum: T) {
    velocity.weights.mapv_inplace(|v| v * momentum);
    velocity.weights.scaled_add(-lr, &grad.weights);
    velocity.biases.mapv_inplace(|v| v * momentum);
    velocity.biases.scaled_add(-lr, &grad.biases);
    layer.weights += &velocity.weights;
    layer.biases += &velocity.biases;
}

fn check_inputs<T: Real>(features: ArrayView2<T>, targets: ArrayView2<T>, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    let a = &config.architecture;
    if features.ncols() != a.input || targets.ncols() != a.bottleneck {
        return Err(VadError::Dimension(format!(
            "training data is {}-dim → {}-dim, architecture expects {} → {}",
            features.ncols(),
            targets.ncols(),
            a.input,
            a.bottleneck
        )));
    }
    if features.nrows() != targets.nrows() {
        return Err(VadError::Dimension("features and targets differ in row count".into()));
    }
    if features.nrows() == 0 {
        return Err(VadError::InsufficientData("no training rows".into()));
    }
    if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(VadError::NonFinite("training data".into()));
    }
    Ok(())
}

fn hidden_role<'a, T>(sparse: bool) -> Role<'a, T> {
    if sparse {
        Role::Hidden
    } else {
        Role::Free
    }
}

/// Trains every encoder layer as a one-hidden-layer autoencoder on the
/// previous layer's output. Decoder layers reuse the autoencoders'
/// reconstruction halves in reverse order.
pub fn pretrain_layerwise<T: Real>(
    data: ArrayView2<T>,
    config: &TrainConfig,
    hypothesis: Hypothesis,
) -> Result<(DedModel<T>, Vec<PretrainReport>)> {
    config.validate()?;
    if data.ncols() != config.architecture.input {
        return Err(VadError::Dimension(format!(
            "pretraining data is {}-dim, architecture expects {}",
            data.ncols(),
            config.architecture.input
        )));
    }
    let mut rng = seed::rng(config.seed, 0x9e37 + hypothesis.label() as u64);
    let reg = &config.regularization;
    let lr = T::lit(config.pretrain_lr);
    let dims = config.architecture.encoder_dims();
    let last = dims.len() - 1;
    let mut input = data.to_owned();
    let mut encoder = Vec::with_capacity(dims.len());
    let mut decoder = Vec::with_capacity(dims.len());
    let mut reports = Vec::with_capacity(dims.len());
    for (l, &(din, dout)) in dims.iter().enumerate() {
        let mut enc = Layer::<T>::random(din, dout, config.init_std, &mut rng).with_bias(config.init_bias);
        let mut dec = Layer::<T>::random(dout, din, config.init_std, &mut rng).with_bias(config.init_bias);
        let sparse = l != last;
        let eval = |enc: &Layer<T>, dec: &Layer<T>| {
            chain_loss(&[enc, dec], &[hidden_role(sparse), Role::Fit(input.view())], input.view(), reg)
                .0
                .total
                .as_f64()
        };
        let loss_before = eval(&enc, &dec);
        for _ in 0..config.pretrain_epochs {
            for idx in batches(input.nrows(), config.batch_size, &mut rng) {
                let x = input.select(Axis(0), &idx);
                let (parts, g) = chain_loss(&[&enc, &dec], &[hidden_role(sparse), Role::Fit(x.view())], x.view(), reg);
                if !parts.total.is_finite() {
                    return Err(VadError::Diverged(format!("pretraining layer {l} loss is not finite")));
                }
                enc.weights.scaled_add(-lr, &g[0].weights);
                enc.biases.scaled_add(-lr, &g[0].biases);
                dec.weights.scaled_add(-lr, &g[1].weights);
                dec.biases.scaled_add(-lr, &g[1].biases);
            }
        }
        let loss_after = eval(&enc, &dec);
        log::debug!("pretrain layer {l} ({din}→{dout}): loss {loss_before:.6} → {loss_after:.6}");
        reports.push(PretrainReport {
            loss_before,
            loss_after,
        });
        input = enc.forward(input.view());
        encoder.push(enc);
        decoder.push(dec);
    }
    decoder.reverse();
    Ok((
        DedModel {
            encoder,
            decoder,
            hypothesis,
        },
        reports,
    ))
}

/// Loss of one stage evaluated over the full data set (no minibatching).
pub fn full_loss<T: Real>(
    model: &DedModel<T>,
    stage: Stage,
    features: ArrayView2<T>,
    targets: ArrayView2<T>,
    reg: &Regularization,
) -> Result<LossParts<T>> {
    Ok(loss_and_gradients(model, stage, features, targets, reg)?.0)
}

/// Consecutive non-finite epochs after which the adaptive schedule gives up.
const MAX_NON_FINITE_EPOCHS: usize = 10;

/// Momentum-SGD fine-tuning of a single stage.
pub fn finetune_stage<T: Real>(
    model: &mut DedModel<T>,
    stage: Stage,
    features: ArrayView2<T>,
    targets: ArrayView2<T>,
    config: &TrainConfig,
) -> Result<StageReport> {
    check_inputs(features, targets, config)?;
    let start = Instant::now();
    let stream = match stage {
        Stage::EncoderOnly => 1,
        Stage::DecoderOnly => 2,
        Stage::Stacked => 3,
    };
    let mut rng = seed::rng(config.seed, (model.hypothesis.label() as u64) << 8 | stream);
    let mut lr = config.finetune_lr;
    let mu = T::lit(config.momentum);
    let n = features.nrows();
    let reg = &config.regularization;
    let with_epoch = |e: VadError, epoch: usize| match e {
        VadError::Diverged(msg) => VadError::Diverged(format!("{msg} at epoch {epoch}")),
        other => other,
    };
    let mut velocity = Gradients::zeros_like(model);
    let mut losses = Vec::new();
    let mut norms = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let (mut prev, mut full_grad) = loss_and_gradients(model, stage, features, targets, reg)?;
    let mut non_finite_run = 0;
    for epoch in 1..=config.max_epochs {
        let snapshot = model.clone();
        let adaptive = config.lr_decrease < 1.0;
        let mut diverged = false;
        for idx in batches(n, config.batch_size, &mut rng) {
            let x = features.select(Axis(0), &idx);
            let t = targets.select(Axis(0), &idx);
            let grad = match loss_and_gradients(model, stage, x.view(), t.view(), reg) {
                Ok((_, g)) => g,
                Err(VadError::Diverged(_)) if adaptive => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(with_epoch(e, epoch)),
            };
            let step = T::lit(lr);
            let (layers, vel, g) = match stage {
                Stage::EncoderOnly => (&mut model.encoder[..], &mut velocity.encoder[..], &grad.encoder[..]),
                Stage::DecoderOnly => (&mut model.decoder[..], &mut velocity.decoder[..], &grad.decoder[..]),
                Stage::Stacked => {
                    for ((l, v), g) in model.encoder.iter_mut().zip(&mut velocity.encoder).zip(&grad.encoder) {
                        sgd_step(l, v, g, step, mu);
                    }
                    (&mut model.decoder[..], &mut velocity.decoder[..], &grad.decoder[..])
                }
            };
            for ((l, v), g) in layers.iter_mut().zip(vel.iter_mut()).zip(g) {
                sgd_step(l, v, g, step, mu);
            }
        }
        let evaluated = if diverged {
            None
        } else {
            match loss_and_gradients(model, stage, features, targets, reg) {
                Ok(r) => Some(r),
                Err(VadError::Diverged(_)) if adaptive => None,
                Err(e) => return Err(with_epoch(e, epoch)),
            }
        };
        if evaluated.is_none() {
            non_finite_run += 1;
            if non_finite_run >= MAX_NON_FINITE_EPOCHS {
                return Err(VadError::Diverged(format!(
                    "{} loss non-finite for {non_finite_run} consecutive epochs (lr {lr:.3e}) at epoch {epoch}",
                    stage.name()
                )));
            }
        } else {
            non_finite_run = 0;
        }
        let accepted = evaluated
            .filter(|(parts, _)| !adaptive || parts.total.as_f64() <= prev.total.as_f64() * config.max_loss_increase);
        if let Some((parts, grad)) = accepted {
            if parts.total.as_f64() < prev.total.as_f64() {
                lr *= config.lr_increase;
            }
            prev = parts;
            full_grad = grad;
        } else {
            *model = snapshot;
            velocity = Gradients::zeros_like(model);
            lr *= config.lr_decrease;
        }
        let norm = full_grad.inf_norm().as_f64();
        log::trace!("{} epoch {epoch}: loss {:.6e} lr {lr:.3e} |g|∞ {norm:.3e}", stage.name(), prev.total.as_f64());
        losses.push(prev.total.as_f64());
        norms.push(norm);
        if norm < config.min_gradient {
            stop = StopReason::MinGradient;
            break;
        }
    }
    if model.layers().any(|l| !l.is_finite()) {
        return Err(VadError::Diverged(format!("{} stage produced non-finite weights", stage.name())));
    }
    let report = StageReport {
        stage,
        losses,
        gradient_norms: norms,
        stop_reason: stop,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    log::info!(
        "{} fine-tune: {} epochs, loss {:.6e} → {:.6e}, stop {}",
        stage.name(),
        report.epochs(),
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN),
        stop.as_str()
    );
    Ok(report)
}

/// Pretrains, then fine-tunes encoder, decoder and the stacked network in turn.
///
/// `features` are normalized feature rows in `[0, 1]`; `targets` the
/// softmax-normalized diffusion coordinates of the same rows.
pub fn train_ded<T: Real>(
    features: ArrayView2<T>,
    targets: ArrayView2<T>,
    hypothesis: Hypothesis,
    config: &TrainConfig,
) -> Result<(DedModel<T>, TrainReport)> {
    check_inputs(features, targets, config)?;
    let start = Instant::now();
    let reg = &config.regularization;
    let fresh = {
        let mut rng = seed::rng(config.seed, 0x51ed + hypothesis.label() as u64);
        let mut m = DedModel::<T>::random(&config.architecture, hypothesis, config.init_std, &mut rng);
        for l in m.encoder.iter_mut().chain(m.decoder.iter_mut()) {
            l.biases.fill(T::lit(config.init_bias));
        }
        m
    };
    let initial = full_loss(&fresh, Stage::Stacked, features, targets, reg)?.total.as_f64();
    let (mut model, pretrain) = pretrain_layerwise(features, config, hypothesis)?;
    let pretrained = full_loss(&model, Stage::Stacked, features, targets, reg)?.total.as_f64();
    let mut stages = Vec::with_capacity(3);
    for stage in [Stage::EncoderOnly, Stage::DecoderOnly, Stage::Stacked] {
        stages.push(finetune_stage(&mut model, stage, features, targets, config)?);
    }
    let final_loss = full_loss(&model, Stage::Stacked, features, targets, reg)?.total.as_f64();
    Ok((
        model,
        TrainReport {
            hypothesis,
            pretrain,
            stages,
            initial_stacked_loss: initial,
            pretrained_stacked_loss: pretrained,
            final_stacked_loss: final_loss,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Feature rows and diffusion targets for the toy-manifold check: points on
/// a noisy 2-sphere pushed through a fixed random map into `dim` dimensions
/// and squashed into `[0, 1]`.
pub fn toy_sphere<R: Rng>(n: usize, dim: usize, noise: f64, rng: &mut R) -> Array2<f64> {
    let lift = Array2::from_shape_fn((3, dim), |_| rng.gen_range(-1.0..1.0));
    let mut pts = Array2::zeros((n, 3));
    for mut row in pts.rows_mut() {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
        for k in 0..3 {
            row[k] = v[k] / r + noise * rng.gen_range(-1.0..1.0);
        }
    }
    let lifted = pts.dot(&lift);
    lifted.mapv(|v| 1.0 / (1.0 + (-v).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{DiffusionEmbedding, DiffusionParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            architecture: Architecture {
                input: 12,
                hidden: vec![16, 16],
                bottleneck: 3,
            },
            max_epochs: 3,
            batch_size: 32,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    fn tiny_data() -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = toy_sphere(200, 12, 0.05, &mut rng);
        let t = Array2::from_shape_fn((200, 3), |(i, j)| x[[i, j]] / 3.0 + 0.2);
        (x, t)
    }

    #[test]
    fn forced_stop_reports_max_epochs() {
        let (x, t) = tiny_data();
        let cfg = TrainConfig {
            max_epochs: 1,
            ..tiny_config()
        };
        let (_, report) = train_ded(x.view(), t.view(), Hypothesis::Present, &cfg).unwrap();
        assert_eq!(report.stages.len(), 3);
        for s in &report.stages {
            assert_eq!(s.stop_reason, StopReason::MaxEpochs);
            assert_eq!(s.epochs(), 1);
            assert!(s.losses.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn min_gradient_stop() {
        let (x, t) = tiny_data();
        let cfg = TrainConfig {
            min_gradient: 1e6,
            ..tiny_config()
        };
        let (_, report) = train_ded(x.view(), t.view(), Hypothesis::Absent, &cfg).unwrap();
        assert!(report.stages.iter().all(|s| s.stop_reason == StopReason::MinGradient && s.epochs() == 1));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, t) = tiny_data();
        let cfg = tiny_config();
        let (a, _) = train_ded(x.view(), t.view(), Hypothesis::Present, &cfg).unwrap();
        let (b, _) = train_ded(x.view(), t.view(), Hypothesis::Present, &cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = train_ded(x.view(), t.view(), Hypothesis::Present, &TrainConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pretraining_chain_and_improvement() {
        let (x, _) = tiny_data();
        let cfg = TrainConfig {
            architecture: Architecture::default(),
            regularization: Regularization {
                sparsity_weight: 0.0,
                ..Regularization::default()
            },
            ..tiny_config()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x72 = toy_sphere(300, 72, 0.05, &mut rng);
        let (model, reports) = pretrain_layerwise(x72.view(), &cfg, Hypothesis::Present).unwrap();
        assert_eq!(model.architecture(), Architecture::default());
        model.validate().unwrap();
        for r in &reports {
            assert!(r.loss_after <= r.loss_before, "{r:?}");
        }
        let (again, _) = pretrain_layerwise(x72.view(), &cfg, Hypothesis::Present).unwrap();
        assert_eq!(model, again);
        assert!(pretrain_layerwise(x.view(), &cfg, Hypothesis::Present).is_err());
    }

    #[test]
    fn hypothesis_models_do_not_share_storage() {
        let (x, t) = tiny_data();
        let cfg = tiny_config();
        let (mut h0, _) = train_ded(x.view(), t.view(), Hypothesis::Absent, &cfg).unwrap();
        let (h1, _) = train_ded(x.view(), t.view(), Hypothesis::Present, &cfg).unwrap();
        let before = h1.clone();
        h0.encoder[0].weights.fill(0.0);
        assert_eq!(h1, before);
    }

    #[test]
    fn rejects_bad_shapes_and_config() {
        let (x, t) = tiny_data();
        let cfg = tiny_config();
        let t4 = Array2::<f64>::zeros((200, 4));
        assert!(train_ded(x.view(), t4.view(), Hypothesis::Absent, &cfg).is_err());
        let bad = TrainConfig {
            momentum: 1.5,
            ..cfg
        };
        assert!(matches!(
            train_ded(x.view(), t.view(), Hypothesis::Absent, &bad),
            Err(VadError::Config(_))
        ));
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let (x, t) = tiny_data();
        let cfg = TrainConfig {
            finetune_lr: 1e12,
            lr_decrease: 1.0,
            ..tiny_config()
        };
        assert!(matches!(
            train_ded(x.view(), t.view(), Hypothesis::Absent, &cfg),
            Err(VadError::Diverged(_))
        ));
    }

    #[test]
    fn adaptive_schedule_backs_off_from_huge_rate() {
        let (x, t) = tiny_data();
        let cfg = TrainConfig {
            finetune_lr: 1e3,
            max_epochs: 30,
            ..tiny_config()
        };
        let (m, r) = train_ded(x.view(), t.view(), Hypothesis::Absent, &cfg).unwrap();
        m.validate().unwrap();
        for s in &r.stages {
            // rejected epochs repeat the previous loss, so the curve never rises
            assert!(s.losses.windows(2).all(|w| w[1] <= w[0] * cfg.max_loss_increase));
        }
    }

    #[test]
    fn toy_sphere_stacked_loss_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = toy_sphere(500, 72, 0.05, &mut rng);
        let emb = DiffusionEmbedding::fit(x.view(), &DiffusionParams::default()).unwrap();
        let cfg = TrainConfig {
            max_epochs: 60,
            finetune_lr: 1e-2,
            init_std: 0.03,
            regularization: Regularization {
                sparsity_weight: 0.0,
                ..Regularization::default()
            },
            seed: 1,
            ..TrainConfig::default()
        };
        let (_, report) = train_ded(x.view(), emb.softmax.view(), Hypothesis::Present, &cfg).unwrap();
        let stacked = report.stage(Stage::Stacked).unwrap();
        let best = stacked.losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(best <= stacked.losses[0]);
        assert!(
            report.final_stacked_loss <= 0.5 * report.initial_stacked_loss,
            "{} vs {}",
            report.final_stacked_loss,
            report.initial_stacked_loss
        );
    }

    #[test]
    fn f32_training_runs() {
        let (x, t) = tiny_data();
        let (xf, tf) = (x.mapv(|v| v as f32), t.mapv(|v| v as f32));
        let (m, r) = train_ded(xf.view(), tf.view(), Hypothesis::Present, &tiny_config()).unwrap();
        m.validate().unwrap();
        assert!(r.final_stacked_loss.is_finite());
    }
}
