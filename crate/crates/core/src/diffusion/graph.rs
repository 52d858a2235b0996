use std::cmp::Ordering;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::error::{Result, VadError};
use crate::Real;

/// Sparse symmetric RBF affinity graph with per-point kernel scales.
#[derive(Debug, Clone)]
pub struct AffinityGraph<T> {
    pub k: usize,
    pub local_scales: Vec<T>,
    pub weights: CsrMatrix<T>,
}

impl<T: Real> AffinityGraph<T> {
    pub fn n_nodes(&self) -> usize {
        self.weights.n()
    }

    /// Wraps an explicit symmetric weight matrix (toy graphs, tests).
    pub fn from_dense(w: ArrayView2<T>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(VadError::Dimension("weight matrix must be square".into()));
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| w[[i, j]] != T::zero())
                    .map(|j| (j, w[[i, j]]))
                    .collect()
            })
            .collect();
        let weights = CsrMatrix::from_rows(rows);
        if !weights.is_symmetric(T::zero()) {
            return Err(VadError::Dimension("weight matrix must be symmetric".into()));
        }
        Ok(Self {
            k: n.saturating_sub(1),
            local_scales: vec![T::one(); n],
            weights,
        })
    }
}

pub(crate) fn squared_distance<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Orders candidates by distance, then index.
pub(crate) fn by_distance<T: Real>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// k nearest candidates (squared distance, index), sorted ascending.
pub(crate) fn k_nearest<T: Real>(mut candidates: Vec<(T, usize)>, k: usize) -> Vec<(T, usize)> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, by_distance);
        candidates.truncate(k);
    }
    candidates.sort_by(by_distance);
    candidates
}

/// Kernel scale of a point: distance to its k-th neighbour, or the smallest
/// nonzero distance when the k-th neighbour coincides with the point.
pub(crate) fn local_scale<T: Real>(
    kth_sq: T,
    all_sq: impl Iterator<Item = T>,
) -> Option<T> {
    if kth_sq > T::zero() {
        return Some(kth_sq.sqrt());
    }
    all_sq
        .filter(|&d| d > T::zero())
        .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.min(d))))
        .map(|d| d.sqrt())
}

/// kNN graph with self-tuning RBF weights `exp(-|xi - xj|² / (σi σj))`,
/// symmetrized by union: an edge exists if either endpoint lists the other
/// among its `k` nearest neighbours. Self-weights are 1.
pub fn build_knn_graph<T: Real>(points: ArrayView2<T>, k: usize) -> Result<AffinityGraph<T>> {
    let n = points.nrows();
    if k == 0 || n <= k {
        return Err(VadError::InsufficientData(format!(
            "kNN graph needs more than k = {k} points, got {n}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(VadError::NonFinite("graph input points".into()));
    }
    let neighbours: Vec<(Vec<(T, usize)>, Option<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = points.row(i);
            let dists: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(xi, points.row(j)), j))
                .collect();
            let all = dists.iter().map(|d| d.0).collect::<Vec<_>>();
            let nearest = k_nearest(dists, k);
            let scale = local_scale(nearest[k - 1].0, all.into_iter());
            (nearest, scale)
        })
        .collect();
    let mut scales = Vec::with_capacity(n);
    for (_, s) in &neighbours {
        scales.push(s.ok_or(VadError::DegenerateGeometry)?);
    }
    let mut adjacency: Vec<Vec<(usize, T)>> = vec![Vec::with_capacity(2 * k + 1); n];
    for (i, (nearest, _)) in neighbours.iter().enumerate() {
        for &(d2, j) in nearest {
            adjacency[i].push((j, d2));
            adjacency[j].push((i, d2));
        }
    }
    let rows = adjacency
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by_key(|&mut (j, _)| j);
            let mut out: Vec<(usize, T)> = row
                .into_iter()
                .map(|(j, d2)| (j, (-d2 / (scales[i] * scales[j])).exp()))
                .collect();
            out.push((i, T::one()));
            out
        })
        .collect();
    Ok(AffinityGraph {
        k,
        local_scales: scales,
        weights: CsrMatrix::from_rows(rows),
    })
}
