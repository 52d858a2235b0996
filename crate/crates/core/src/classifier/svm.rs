use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use super::errors::{ErrorCoordinate, ErrorMap, ErrorMode};
use crate::ded::Hypothesis;
use crate::error::{Result, VadError};
use crate::seed;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeighting {
    /// Each class weighted by `N / (2 N_y)`.
    InverseFrequency,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmSolver {
    /// Exact dual solver with second-order working-set selection.
    Smo,
    /// Seeded stochastic subgradient descent with iterate averaging.
    Subgradient,
}

impl SvmSolver {
    pub fn as_str(self) -> &'static str {
        match self {
            SvmSolver::Smo => "smo",
            SvmSolver::Subgradient => "subgradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrainConfig {
    /// Soft-margin constant; the penalty on ‖w‖² is `1 / (2C)`.
    pub c: f64,
    pub solver: SvmSolver,
    /// Passes over the data for the subgradient solver.
    pub epochs: usize,
    pub class_weighting: ClassWeighting,
    /// Train on per-column standardized inputs and fold the scaling back
    /// into `(w, b)`.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            solver: SvmSolver::Smo,
            epochs: 200,
            class_weighting: ClassWeighting::InverseFrequency,
            standardize: true,
            seed: 0,
        }
    }
}

/// Linear decision function `w·e + b`; positive means speech.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub mode: ErrorMode,
}

impl<T: Real> SvmModel<T> {
    fn check(&self, values: &[T]) -> Result<()> {
        if values.len() != self.weights.len() {
            return Err(VadError::ModeMismatch {
                expected: self.mode.as_str().into(),
                found: format!("{}-dim coordinate", values.len()),
            });
        }
        Ok(())
    }

    fn raw_score(&self, values: &[T]) -> T {
        self.weights.iter().zip(values).fold(self.bias, |s, (&w, &v)| s + w * v)
    }

    pub fn score(&self, coord: &ErrorCoordinate<T>) -> Result<T> {
        if coord.mode() != self.mode {
            return Err(VadError::ModeMismatch {
                expected: self.mode.as_str().into(),
                found: coord.mode().as_str().into(),
            });
        }
        Ok(self.raw_score(coord.values()))
    }

    /// H¹ strictly inside the positive region; the boundary belongs to H⁰.
    pub fn classify(&self, coord: &ErrorCoordinate<T>) -> Result<Hypothesis> {
        Ok(decide(self.score(coord)?))
    }

    pub fn score_map(&self, map: &ErrorMap<T>) -> Result<Vec<T>> {
        if map.mode != self.mode {
            return Err(VadError::ModeMismatch {
                expected: self.mode.as_str().into(),
                found: map.mode.as_str().into(),
            });
        }
        map.values
            .rows()
            .into_iter()
            .map(|r| {
                let v = r.to_vec();
                self.check(&v)?;
                Ok(self.raw_score(&v))
            })
            .collect()
    }

    pub fn classify_map(&self, map: &ErrorMap<T>) -> Result<Vec<u8>> {
        Ok(self.score_map(map)?.into_iter().map(|s| decide(s).label()).collect())
    }
}

fn decide<T: Real>(score: T) -> Hypothesis {
    if score > T::zero() {
        Hypothesis::Present
    } else {
        Hypothesis::Absent
    }
}

/// Per-sample weights for the hinge term.
pub fn class_weights(labels: &[u8], weighting: ClassWeighting) -> Vec<f64> {
    let n = labels.len() as f64;
    let n1 = labels.iter().filter(|&&y| y != 0).count() as f64;
    let n0 = n - n1;
    labels
        .iter()
        .map(|&y| match weighting {
            ClassWeighting::Uniform => 1.0,
            ClassWeighting::InverseFrequency => n / (2.0 * if y != 0 { n1 } else { n0 }),
        })
        .collect()
}

/// `(1/2C)‖w‖² + Σ c_i max(0, 1 − y_i (w·x_i + b))` with `y ∈ {−1, +1}`.
pub fn svm_objective(x: ArrayView2<f64>, labels: &[u8], sample_weights: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let reg = w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c);
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(labels)
        .zip(sample_weights)
        .map(|((row, &y), &cw)| {
            let yy = if y != 0 { 1.0 } else { -1.0 };
            let s = row.iter().zip(w).fold(b, |s, (a, w)| s + a * w);
            cw * (1.0 - yy * s).max(0.0)
        })
        .sum();
    reg + hinge
}

/// Exact minimizer of the objective over `b` for fixed `w`: the objective is
/// convex piecewise linear in `b`, so walk the sorted hinge breakpoints until
/// the slope turns nonnegative.
fn best_bias(x: ArrayView2<f64>, labels: &[u8], sw: &[f64], w: &[f64]) -> f64 {
    let mut points: Vec<(f64, f64)> = x
        .rows()
        .into_iter()
        .zip(labels)
        .zip(sw)
        .map(|((row, &y), &c)| {
            let s = row.iter().zip(w).fold(0.0, |s, (a, w)| s + a * w);
            if y != 0 {
                (1.0 - s, c)
            } else {
                (-1.0 - s, c)
            }
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut slope: f64 = -labels.iter().zip(sw).filter(|(&y, _)| y != 0).map(|(_, &c)| c).sum::<f64>();
    for &(t, c) in &points {
        slope += c;
        if slope >= 0.0 {
            return t;
        }
    }
    points.last().map_or(0.0, |p| p.0)
}

/// Pegasos-style stochastic subgradient descent on the objective divided by
/// `N`, so `λ = 1 / (C N)` and `η_t = 1 / (λ t)`.
/// Returns the best by objective of the last iterate and the average over
/// the second half of training, each with its bias re-optimized.
fn pegasos(x: ArrayView2<f64>, labels: &[u8], sw: &[f64], cfg: &SvmTrainConfig) -> (Vec<f64>, f64) {
    let (n, d) = x.dim();
    let lambda = 1.0 / (cfg.c * n as f64);
    let mut rng = seed::rng(cfg.seed, 0x5F3);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut avg_count = 0.0;
    let mut best = (w.clone(), b, svm_objective(x, labels, sw, &w, b, cfg.c));
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = if labels[i] != 0 { 1.0 } else { -1.0 };
            let row = x.row(i);
            let margin = y * row.iter().zip(&w).fold(b, |s, (a, w)| s + a * w);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let step = eta * sw[i] * y;
                w.iter_mut().zip(row.iter()).for_each(|(v, a)| *v += step * a);
                b += step;
            }
            if epoch >= cfg.epochs / 2 {
                avg_count += 1.0;
                let k = 1.0 / avg_count;
                avg_w.iter_mut().zip(&w).for_each(|(a, v)| *a += (v - *a) * k);
                avg_b += (b - avg_b) * k;
            }
        }
        let mut candidates = vec![(w.clone(), b)];
        if avg_count > 0.0 {
            candidates.push((avg_w.clone(), avg_b));
        }
        for (cw, cb) in candidates {
            let refined = best_bias(x, labels, sw, &cw);
            let cb = if svm_objective(x, labels, sw, &cw, refined, cfg.c) < svm_objective(x, labels, sw, &cw, cb, cfg.c) {
                refined
            } else {
                cb
            };
            let obj = svm_objective(x, labels, sw, &cw, cb, cfg.c);
            if obj < best.2 {
                best = (cw, cb, obj);
            }
        }
    }
    (best.0, best.1)
}

/// Sequential minimal optimization on the dual
/// `max Σα − ½‖Σ α_i y_i x_i‖²` s.t. `0 ≤ α_i ≤ C c_i`, `Σ α_i y_i = 0`,
/// which is the objective above multiplied by `C`. Stops when the maximal
/// KKT violation drops below `tol`.
fn smo(x: ArrayView2<f64>, labels: &[u8], sw: &[f64], c: f64) -> (Vec<f64>, f64) {
    const TAU: f64 = 1e-12;
    let tol = 1e-9;
    let (n, d) = x.dim();
    let y: Vec<f64> = labels.iter().map(|&l| if l != 0 { 1.0 } else { -1.0 }).collect();
    let upper: Vec<f64> = sw.iter().map(|&s| c * s).collect();
    let kdiag: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (200 * n).max(100_000);
    for _ in 0..max_iter {
        let is_upper = |t: usize, a: &[f64]| a[t] >= upper[t];
        let is_lower = |t: usize, a: &[f64]| a[t] <= 0.0;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let movable = if y[t] > 0.0 { !is_upper(t, &alpha) } else { !is_lower(t, &alpha) };
            if movable && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let xi = x.row(i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let movable = if y[t] > 0.0 { !is_lower(t, &alpha) } else { !is_upper(t, &alpha) };
            if !movable {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = kdiag[i] + kdiag[t] - 2.0 * xi.dot(&x.row(t));
                let obj = -diff * diff / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            break;
        }
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = xi.dot(&x.row(j));
        let quad = (kdiag[i] + kdiag[j] - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        // ∇_t += y_t x_t · (y_i Δα_i x_i + y_j Δα_j x_j)
        let (di, dj) = (y[i] * (alpha[i] - old_i), y[j] * (alpha[j] - old_j));
        let step: Vec<f64> = (0..d).map(|k| di * x[[i, k]] + dj * x[[j, k]]).collect();
        for (t, row) in x.rows().into_iter().enumerate() {
            grad[t] += y[t] * row.iter().zip(&step).map(|(a, s)| a * s).sum::<f64>();
        }
    }
    let mut w = vec![0.0; d];
    for (t, row) in x.rows().into_iter().enumerate() {
        if alpha[t] != 0.0 {
            w.iter_mut().zip(row.iter()).for_each(|(v, a)| *v += alpha[t] * y[t] * a);
        }
    }
    let b = best_bias(x, labels, sw, &w);
    (w, b)
}

/// Fits the soft-margin linear SVM on raw rows.
pub fn train_linear_svm(x: ArrayView2<f64>, labels: &[u8], cfg: &SvmTrainConfig) -> Result<(Vec<f64>, f64)> {
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(VadError::Config(format!("svm C must be positive, got {}", cfg.c)));
    }
    if cfg.epochs == 0 {
        return Err(VadError::Config("svm epochs must be at least 1".into()));
    }
    if x.nrows() != labels.len() {
        return Err(VadError::Dimension("labels and coordinates differ in length".into()));
    }
    let positives = labels.iter().filter(|&&y| y != 0).count();
    if positives == 0 || positives == labels.len() {
        return Err(VadError::SingleClass(format!("all {} training labels are {}", labels.len(), labels[0])));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(VadError::NonFinite("error map".into()));
    }
    let sw = class_weights(labels, cfg.class_weighting);
    let d = x.ncols();
    let solve = |x: ArrayView2<f64>| match cfg.solver {
        SvmSolver::Smo => smo(x, labels, &sw, cfg.c),
        SvmSolver::Subgradient => pegasos(x, labels, &sw, cfg),
    };
    if !cfg.standardize {
        return Ok(solve(x));
    }
    let n = x.nrows() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let s = (x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z = Array2::from_shape_fn(x.raw_dim(), |(i, j)| (x[[i, j]] - mean[j]) / std[j]);
    let (ws, bs) = solve(z.view());
    let w: Vec<f64> = ws.iter().zip(&std).map(|(w, s)| w / s).collect();
    let b = bs - w.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
    Ok((w, b))
}

/// Trains the classifier on an error map with 0/1 labels.
pub fn train_svm<T: Real>(map: &ErrorMap<T>, labels: &[u8], cfg: &SvmTrainConfig) -> Result<SvmModel<T>> {
    let x = map.values.mapv(|v| v.as_f64());
    let (w, b) = train_linear_svm(x.view(), labels, cfg)?;
    if w.iter().all(|&v| v == 0.0) {
        log::warn!("svm training produced a zero weight vector");
    }
    Ok(SvmModel {
        weights: w.into_iter().map(T::lit).collect(),
        bias: T::lit(b),
        mode: map.mode,
    })
}
