use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Result, VadError};
use crate::Real;

/// Per-dimension z-scoring followed by a min-max map onto `[0, 1]`.
///
/// The min-max bounds are those of the standardized fit set, so fitted rows
/// land exactly inside the unit cube that the saturating network can
/// represent.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mu: Array1<T>,
    pub sigma: Array1<T>,
    pub range_lo: Array1<T>,
    pub range_hi: Array1<T>,
    /// Dimensions whose fit-set variance was zero (σ forced to 1).
    pub degenerate: Vec<bool>,
}

impl<T: Real> Standardizer<T> {
    /// Population mean/std per column over `features` (N ≥ 2).
    pub fn fit(features: ArrayView2<T>) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(VadError::InsufficientData(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(VadError::NonFinite("standardizer fit data".into()));
        }
        let nf = T::from_usize_lossy(n);
        let mu = features.sum_axis(Axis(0)) / nf;
        let dims = features.ncols();
        let mut sigma = Array1::zeros(dims);
        let mut degenerate = vec![false; dims];
        for l in 0..dims {
            let var = features
                .column(l)
                .iter()
                .map(|&v| (v - mu[l]) * (v - mu[l]))
                .sum::<T>()
                / nf;
            if var > T::zero() {
                sigma[l] = var.sqrt();
            } else {
                sigma[l] = T::one();
                degenerate[l] = true;
            }
        }
        let mut range_lo = Array1::from_elem(dims, T::infinity());
        let mut range_hi = Array1::from_elem(dims, T::neg_infinity());
        for row in features.rows() {
            for l in 0..dims {
                let z = (row[l] - mu[l]) / sigma[l];
                range_lo[l] = range_lo[l].min(z);
                range_hi[l] = range_hi[l].max(z);
            }
        }
        Ok(Self {
            mu,
            sigma,
            range_lo,
            range_hi,
            degenerate,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// z-score only.
    pub fn standardize(&self, v: ArrayView1<T>) -> Array1<T> {
        (&v - &self.mu) / &self.sigma
    }

    /// Min-max map of an already standardized vector, clamped to `[0, 1]`.
    pub fn range_map(&self, z: ArrayView1<T>) -> Array1<T> {
        let half = T::lit(0.5);
        Array1::from_shape_fn(z.len(), |l| {
            let span = self.range_hi[l] - self.range_lo[l];
            if span > T::zero() {
                ((z[l] - self.range_lo[l]) / span).max(T::zero()).min(T::one())
            } else {
                half
            }
        })
    }

    /// z-score then range map.
    pub fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        self.range_map(self.standardize(v).view())
    }

    /// Inverse of the range map for values inside the fitted range.
    pub fn unmap(&self, r: ArrayView1<T>) -> Array1<T> {
        Array1::from_shape_fn(r.len(), |l| {
            self.range_lo[l] + r[l] * (self.range_hi[l] - self.range_lo[l])
        })
    }

    pub fn standardize_rows(&self, rows: ArrayView2<T>) -> Array2<T> {
        (&rows - &self.mu.view().insert_axis(Axis(0))) / &self.sigma.view().insert_axis(Axis(0))
    }

    pub fn range_map_rows(&self, z: ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros(z.raw_dim());
        for (i, row) in z.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.range_map(row));
        }
        out
    }

    pub fn apply_rows(&self, rows: ArrayView2<T>) -> Array2<T> {
        self.range_map_rows(self.standardize_rows(rows).view())
    }
}
