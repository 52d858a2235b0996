use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::activation::pslt;
use crate::error::{Result, VadError};
use crate::Real;

/// Which hypothesis a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// H⁰: speech absent.
    Absent = 0,
    /// H¹: speech present.
    Present = 1,
}

impl Hypothesis {
    pub fn from_label(label: u8) -> Self {
        if label == 0 {
            Hypothesis::Absent
        } else {
            Hypothesis::Present
        }
    }

    pub fn label(self) -> u8 {
        self as u8
    }
}

/// Fully connected layer, `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out × in`
    pub weights: Array2<T>,
    pub biases: Array1<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            biases: Array1::zeros(output),
        }
    }

    /// Weights drawn from N(0, std²), zero biases.
    pub fn random<R: Rng>(input: usize, output: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("valid std");
        Self {
            weights: Array2::from_shape_fn((output, input), |_| T::lit(normal.sample(rng))),
            biases: Array1::zeros(output),
        }
    }

    /// Sets every bias to `b`.
    pub fn with_bias(mut self, b: f64) -> Self {
        self.biases.fill(T::lit(b));
        self
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Pre-activations for a batch (rows are samples).
    pub fn preactivate(&self, x: ArrayView2<T>) -> Array2<T> {
        x.dot(&self.weights.t()) + &self.biases.view().insert_axis(Axis(0))
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        self.preactivate(x).mapv(pslt)
    }

    /// Single-row forward pass; its result does not depend on batch shape.
    pub fn forward_row(&self, x: ArrayView1<T>) -> Array1<T> {
        (self.weights.dot(&x) + &self.biases).mapv(pslt)
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.is_finite())
    }
}

/// Layer widths of an encoder-decoder: `input → hidden… → bottleneck`,
/// mirrored back to `input`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub bottleneck: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input: 72,
            hidden: vec![200, 200],
            bottleneck: 3,
        }
    }
}

impl Architecture {
    /// `(in, out)` pairs of the encoder layers.
    pub fn encoder_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input];
        widths.extend(&self.hidden);
        widths.push(self.bottleneck);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn decoder_dims(&self) -> Vec<(usize, usize)> {
        self.encoder_dims()
            .into_iter()
            .rev()
            .map(|(i, o)| (o, i))
            .collect()
    }
}

/// Diffusion encoder-decoder: the encoder's output is trained to match
/// diffusion coordinates, the decoder maps them back to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct DedModel<T> {
    pub encoder: Vec<Layer<T>>,
    pub decoder: Vec<Layer<T>>,
    pub hypothesis: Hypothesis,
}

/// Activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// Bottleneck activation.
    pub mapped: Array1<T>,
    /// Reconstruction.
    pub reconstructed: Array1<T>,
}

impl<T: Real> DedModel<T> {
    pub fn zeros(arch: &Architecture, hypothesis: Hypothesis) -> Self {
        Self {
            encoder: arch
                .encoder_dims()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
            decoder: arch
                .decoder_dims()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
            hypothesis,
        }
    }

    pub fn random<R: Rng>(arch: &Architecture, hypothesis: Hypothesis, std: f64, rng: &mut R) -> Self {
        Self {
            encoder: arch
                .encoder_dims()
                .into_iter()
                .map(|(i, o)| Layer::random(i, o, std, rng))
                .collect(),
            decoder: arch
                .decoder_dims()
                .into_iter()
                .map(|(i, o)| Layer::random(i, o, std, rng))
                .collect(),
            hypothesis,
        }
    }

    pub fn architecture(&self) -> Architecture {
        let input = self.encoder.first().map_or(0, |l| l.input_dim());
        let bottleneck = self.encoder.last().map_or(0, |l| l.output_dim());
        let hidden = self.encoder[..self.encoder.len().saturating_sub(1)]
            .iter()
            .map(|l| l.output_dim())
            .collect();
        Architecture {
            input,
            hidden,
            bottleneck,
        }
    }

    /// Checks that layer widths chain and mirror, and that parameters are finite.
    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.encoder.len() != self.decoder.len() {
            return Err(VadError::Dimension("encoder/decoder depth mismatch".into()));
        }
        let arch = self.architecture();
        let expect = |layers: &[Layer<T>], dims: Vec<(usize, usize)>| {
            layers
                .iter()
                .zip(dims)
                .all(|(l, (i, o))| l.input_dim() == i && l.output_dim() == o && l.biases.len() == o)
        };
        if !expect(&self.encoder, arch.encoder_dims()) || !expect(&self.decoder, arch.decoder_dims()) {
            return Err(VadError::Dimension("layer widths do not chain".into()));
        }
        if !self.layers().all(|l| l.is_finite()) {
            return Err(VadError::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer<T>> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.num_params()).sum()
    }

    fn run(layers: &[Layer<T>], x: ArrayView2<T>) -> Array2<T> {
        let width = layers.last().map_or(x.ncols(), |l| l.output_dim());
        let mut out = Array2::zeros((x.nrows(), width));
        for (i, row) in x.rows().into_iter().enumerate() {
            let mut a = row.to_owned();
            for layer in layers {
                a = layer.forward_row(a.view());
            }
            out.row_mut(i).assign(&a);
        }
        out
    }

    pub fn encode_batch(&self, x: ArrayView2<T>) -> Array2<T> {
        Self::run(&self.encoder, x)
    }

    pub fn decode_batch(&self, m: ArrayView2<T>) -> Array2<T> {
        Self::run(&self.decoder, m)
    }

    /// Bottleneck and reconstruction for many inputs. Rows are processed
    /// independently, so each row's result matches [`DedModel::forward`] bitwise.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<(Array2<T>, Array2<T>)> {
        let mapped = self.encode_batch(x);
        let recon = self.decode_batch(mapped.view());
        if mapped.iter().chain(recon.iter()).any(|v| !v.is_finite()) {
            return Err(VadError::NonFinite("network activations (corrupt parameters?)".into()));
        }
        Ok((mapped, recon))
    }

    pub fn forward(&self, x: ArrayView1<T>) -> Result<ForwardOutput<T>> {
        let (m, a) = self.forward_batch(x.insert_axis(Axis(0)))?;
        Ok(ForwardOutput {
            mapped: m.row(0).to_owned(),
            reconstructed: a.row(0).to_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_dimension_chain() {
        let arch = Architecture::default();
        assert_eq!(arch.encoder_dims(), vec![(72, 200), (200, 200), (200, 3)]);
        assert_eq!(arch.decoder_dims(), vec![(3, 200), (200, 200), (200, 72)]);
        let m = DedModel::<f64>::zeros(&arch, Hypothesis::Present);
        m.validate().unwrap();
        assert_eq!(m.architecture(), arch);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = DedModel::<f64>::zeros(&Architecture::default(), Hypothesis::Absent);
        let out = m.forward(Array1::from_elem(72, 0.7).view()).unwrap();
        assert!(out.mapped.iter().all(|&v| v == 0.0));
        assert!(out.reconstructed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_straight_line_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = Architecture::default();
        let m = DedModel::<f64>::random(&arch, Hypothesis::Present, 0.3, &mut rng);
        let x: Vec<f64> = (0..72).map(|_| rng.gen_range(0.0..1.0)).collect();
        let out = m.forward(ArrayView1::from(&x[..])).unwrap();
        // naive loops
        let mut a = x.clone();
        let mut mapped = Vec::new();
        for (li, layer) in m.encoder.iter().chain(m.decoder.iter()).enumerate() {
            let mut next = vec![0.0; layer.output_dim()];
            for o in 0..layer.output_dim() {
                let mut z = layer.biases[o];
                for i in 0..layer.input_dim() {
                    z += layer.weights[[o, i]] * a[i];
                }
                next[o] = z.max(0.0).min(1.0);
            }
            a = next;
            if li == m.encoder.len() - 1 {
                mapped = a.clone();
            }
        }
        for (u, v) in out.mapped.iter().zip(&mapped) {
            assert!((u - v).abs() < 1e-12);
        }
        for (u, v) in out.reconstructed.iter().zip(&a) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(out.reconstructed.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn corrupt_parameters_are_detected() {
        let mut m = DedModel::<f64>::zeros(&Architecture::default(), Hypothesis::Absent);
        m.encoder[1].weights[[0, 0]] = f64::NAN;
        assert!(m.validate().is_err());
        m.encoder[1].weights[[0, 0]] = 0.0;
        m.decoder[0].biases = Array1::zeros(5);
        assert!(m.validate().is_err());
    }
}
