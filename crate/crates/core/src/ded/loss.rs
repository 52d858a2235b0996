use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::activation::pslt_grad;
use super::network::{DedModel, Layer};
use crate::error::{Result, VadError};
use crate::Real;

const RHO_CLAMP: f64 = 1e-6;

/// Regularization weights shared by every training stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    /// Weight decay on connection weights (biases are not decayed).
    pub l2_weight: f64,
    /// β, weight of the KL sparsity penalty on hidden layers.
    pub sparsity_weight: f64,
    /// ρ, target mean activation of hidden units.
    pub sparsity_target: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            l2_weight: 1e-7,
            sparsity_weight: 4.0,
            sparsity_target: 0.1,
        }
    }
}

/// Which parameters a loss evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Encoder alone, input → diffusion target.
    EncoderOnly,
    /// Decoder alone, diffusion target → input.
    DecoderOnly,
    /// Full network: bottleneck pinned to the target, output to the input.
    Stacked,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::EncoderOnly => "encoder",
            Stage::DecoderOnly => "decoder",
            Stage::Stacked => "stacked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
}

impl<T: Real> LayerGradient<T> {
    pub fn zeros_like(layer: &Layer<T>) -> Self {
        Self {
            weights: Array2::zeros(layer.weights.raw_dim()),
            biases: Array1::zeros(layer.biases.raw_dim()),
        }
    }

    pub fn inf_norm(&self) -> T {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled_add(&mut self, alpha: T, other: &Self) {
        self.weights.scaled_add(alpha, &other.weights);
        self.biases.scaled_add(alpha, &other.biases);
    }
}

/// Gradient with respect to every parameter of a model. Layers outside
/// the evaluated stage carry zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub encoder: Vec<LayerGradient<T>>,
    pub decoder: Vec<LayerGradient<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &DedModel<T>) -> Self {
        Self {
            encoder: model.encoder.iter().map(LayerGradient::zeros_like).collect(),
            decoder: model.decoder.iter().map(LayerGradient::zeros_like).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &LayerGradient<T>> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn inf_norm(&self) -> T {
        self.iter().fold(T::zero(), |m, g| m.max(g.inf_norm()))
    }

    pub fn scaled_add(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.encoder.iter_mut().zip(&other.encoder) {
            a.scaled_add(alpha, b);
        }
        for (a, b) in self.decoder.iter_mut().zip(&other.decoder) {
            a.scaled_add(alpha, b);
        }
    }
}

/// Loss value broken into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    /// Sum of the mean-squared-error terms.
    pub fit: T,
    pub l2: T,
    pub sparsity: T,
}

pub(crate) fn mse<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> T {
    let n = T::from_usize_lossy(a.len().max(1));
    Zip::from(&a).and(&b).fold(T::zero(), |s, &x, &y| s + (x - y) * (x - y)) / n
}

/// Role of a layer's output inside a chain.
#[derive(Debug)]
pub(crate) enum Role<'a, T> {
    /// Sparsity-penalized hidden representation.
    Hidden,
    /// Output compared against a target by MSE.
    Fit(ArrayView2<'a, T>),
    /// Neither (unused).
    Free,
}

impl<T> Clone for Role<'_, T> {
    fn clone(&self) -> Self {
        match self {
            Role::Hidden => Role::Hidden,
            Role::Fit(t) => Role::Fit(t.reborrow()),
            Role::Free => Role::Free,
        }
    }
}

/// Forward + backward through a sequence of layers.
pub(crate) fn chain_loss<T: Real>(
    layers: &[&Layer<T>],
    roles: &[Role<'_, T>],
    input: ArrayView2<T>,
    reg: &Regularization,
) -> (LossParts<T>, Vec<LayerGradient<T>>) {
    debug_assert_eq!(layers.len(), roles.len());
    let batch = T::from_usize_lossy(input.nrows().max(1));
    let beta = T::lit(reg.sparsity_weight);
    let rho = T::lit(reg.sparsity_target);
    let lambda = T::lit(reg.l2_weight);
    let lo = T::lit(RHO_CLAMP);
    let hi = T::one() - lo;

    let mut pre = Vec::with_capacity(layers.len());
    let mut act: Vec<Array2<T>> = Vec::with_capacity(layers.len());
    for layer in layers {
        let z = match act.last() {
            Some(a) => layer.preactivate(a.view()),
            None => layer.preactivate(input.view()),
        };
        act.push(z.mapv(super::activation::pslt));
        pre.push(z);
    }

    let mut fit = T::zero();
    let mut sparsity = T::zero();
    // dL/da for each layer output from its own role
    let mut local: Vec<Option<Array2<T>>> = Vec::with_capacity(layers.len());
    for (a, role) in act.iter().zip(roles) {
        match role {
            Role::Fit(target) => {
                fit += mse(a.view(), target.view());
                let scale = T::lit(2.0) / T::from_usize_lossy(a.len().max(1));
                local.push(Some((a - &target.view()) * scale));
            }
            Role::Hidden if reg.sparsity_weight != 0.0 => {
                let mean = a.sum_axis(Axis(0)) / batch;
                let mut coef = Array1::zeros(mean.len());
                for (j, &m) in mean.iter().enumerate() {
                    let clamped = m.max(lo).min(hi);
                    sparsity += rho * (rho / clamped).ln()
                        + (T::one() - rho) * ((T::one() - rho) / (T::one() - clamped)).ln();
                    if m > lo && m < hi {
                        coef[j] = beta * (-rho / m + (T::one() - rho) / (T::one() - m)) / batch;
                    }
                }
                local.push(Some(Array2::from_shape_fn(a.raw_dim(), |(_, j)| coef[j])));
            }
            _ => local.push(None),
        }
    }
    sparsity *= beta;

    let mut l2 = T::zero();
    for layer in layers {
        l2 += layer.weights.iter().fold(T::zero(), |s, &w| s + w * w);
    }
    l2 *= lambda;

    let mut grads: Vec<LayerGradient<T>> = layers.iter().map(|l| LayerGradient::zeros_like(l)).collect();
    let mut upstream: Option<Array2<T>> = None;
    for l in (0..layers.len()).rev() {
        let mut da = match (upstream.take(), local[l].take()) {
            (Some(u), Some(v)) => u + v,
            (Some(u), None) => u,
            (None, Some(v)) => v,
            (None, None) => Array2::zeros(act[l].raw_dim()),
        };
        Zip::from(&mut da).and(&pre[l]).for_each(|d, &z| *d *= pslt_grad(z));
        grads[l].weights = if l == 0 {
            da.t().dot(&input)
        } else {
            da.t().dot(&act[l - 1])
        };
        grads[l].weights.scaled_add(T::lit(2.0) * lambda, &layers[l].weights);
        grads[l].biases = da.sum_axis(Axis(0));
        if l > 0 {
            upstream = Some(da.dot(&layers[l].weights));
        }
    }

    let parts = LossParts {
        total: fit + l2 + sparsity,
        fit,
        l2,
        sparsity,
    };
    (parts, grads)
}

fn last_hidden<T>(n: usize, target: Role<'_, T>) -> Vec<Role<'_, T>> {
    let mut r = vec![Role::Hidden; n];
    r[n - 1] = target;
    r
}

/// Loss and full parameter gradient of one training stage on a minibatch.
///
/// `inputs` are feature rows and `targets` the diffusion coordinates of the
/// same rows.
pub fn loss_and_gradients<T: Real>(
    model: &DedModel<T>,
    stage: Stage,
    inputs: ArrayView2<T>,
    targets: ArrayView2<T>,
    reg: &Regularization,
) -> Result<(LossParts<T>, Gradients<T>)> {
    let arch = model.architecture();
    if inputs.ncols() != arch.input || targets.ncols() != arch.bottleneck || inputs.nrows() != targets.nrows() {
        return Err(VadError::Dimension(format!(
            "batch shapes {:?} / {:?} do not fit architecture {}→{}",
            inputs.dim(),
            targets.dim(),
            arch.input,
            arch.bottleneck
        )));
    }
    let mut grads = Gradients::zeros_like(model);
    let ne = model.encoder.len();
    let parts = match stage {
        Stage::EncoderOnly => {
            let layers: Vec<_> = model.encoder.iter().collect();
            let roles = last_hidden(ne, Role::Fit(targets));
            let (p, g) = chain_loss(&layers, &roles, inputs, reg);
            grads.encoder = g;
            p
        }
        Stage::DecoderOnly => {
            let layers: Vec<_> = model.decoder.iter().collect();
            let roles = last_hidden(model.decoder.len(), Role::Fit(inputs));
            let (p, g) = chain_loss(&layers, &roles, targets, reg);
            grads.decoder = g;
            p
        }
        Stage::Stacked => {
            let layers: Vec<_> = model.layers().collect();
            let mut roles = last_hidden(layers.len(), Role::Fit(inputs.view()));
            roles[ne - 1] = Role::Fit(targets.view());
            let (p, mut g) = chain_loss(&layers, &roles, inputs, reg);
            grads.decoder = g.split_off(ne);
            grads.encoder = g;
            p
        }
    };
    if !parts.total.is_finite() {
        return Err(VadError::Diverged(format!("{} loss is not finite", stage.name())));
    }
    Ok((parts, grads))
}
