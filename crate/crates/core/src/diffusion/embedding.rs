use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::eigen::{eigendecompose_with, Decomposition, LanczosOptions};
use super::graph::{build_knn_graph, k_nearest, local_scale, squared_distance};
use super::markov::normalize_markov;
use crate::error::{Result, VadError};
use crate::{seed, Real};

/// `m_n = (λ_1 ψ_1(n), …, λ_d ψ_d(n))`, skipping the trivial pair.
pub fn embed<T: Real>(decomp: &Decomposition<T>, d: usize) -> Array2<T> {
    let n = decomp.right.nrows();
    Array2::from_shape_fn((n, d), |(i, j)| decomp.eigenvalues[j + 1] * decomp.right[[i, j + 1]])
}

/// `1 / sqrt(Σ π_i ψ_j(i)²)` for `j = 1..=d`, with `π ∝ degree_tilde`.
pub fn stationary_scales<T: Real>(decomp: &Decomposition<T>, degree_tilde: &[T], d: usize) -> Vec<T> {
    let total: T = degree_tilde.iter().copied().sum();
    (1..=d)
        .map(|j| {
            let m: T = degree_tilde
                .iter()
                .zip(decomp.right.column(j))
                .map(|(&w, &v)| w / total * v * v)
                .sum();
            T::one() / m.sqrt()
        })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax_coords<T: Real>(m: ArrayView1<T>) -> Array1<T> {
    let max = m.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Array1<T> = m.mapv(|v| (v - max).exp());
    let total = e.sum();
    e / total
}

pub fn softmax_rows<T: Real>(m: ArrayView2<T>) -> Array2<T> {
    let mut out = Array2::zeros(m.raw_dim());
    for (i, row) in m.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&softmax_coords(row));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    pub k: usize,
    pub dim: usize,
    /// Larger training sets are subsampled to this many graph nodes; the
    /// remaining rows are placed by out-of-sample extension.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            k: 10,
            dim: 3,
            max_points: 6000,
            seed: 0,
        }
    }
}

/// What the out-of-sample extension needs from the training graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromReference<T> {
    pub points: Array2<T>,
    pub local_scales: Vec<T>,
    /// First-stage degrees (row sums of `W`); the second stage cancels in
    /// the row normalization.
    pub degrees: Vec<T>,
    pub k: usize,
}

/// A fitted diffusion-maps embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding<T> {
    /// `λ_0 … λ_d`.
    pub eigenvalues: Vec<T>,
    /// Unit-norm right eigenvectors over the reference points, `N_ref × (d+1)`.
    pub right: Array2<T>,
    /// Per-coordinate factor taking unit-norm `ψ_j` to the stationary-weighted
    /// normalization `Σ π_i ψ_j(i)² = 1`, under which embedding distance is
    /// diffusion distance and coordinates are O(1).
    pub psi_scale: Vec<T>,
    /// Coordinates of every fitted row (`N × d`).
    pub coords: Array2<T>,
    pub softmax: Array2<T>,
    pub reference: NystromReference<T>,
}

impl<T: Real> DiffusionEmbedding<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    /// Builds the graph, normalizes, decomposes and embeds `points`.
    pub fn fit(points: ArrayView2<T>, params: &DiffusionParams) -> Result<Self> {
        let n = points.nrows();
        let subset: Option<Vec<usize>> = if n > params.max_points {
            let mut rng = seed::rng(params.seed, 0xD1FF);
            let mut idx = sample(&mut rng, n, params.max_points).into_vec();
            idx.sort_unstable();
            Some(idx)
        } else {
            None
        };
        let ref_points = match &subset {
            Some(idx) => points.select(Axis(0), idx),
            None => points.to_owned(),
        };
        let graph = build_knn_graph(ref_points.view(), params.k)?;
        let markov = normalize_markov(&graph)?;
        let options = LanczosOptions {
            seed: seed::derive_seed(params.seed, 0x1A2C),
            ..LanczosOptions::default()
        };
        let decomp = eigendecompose_with(&markov, params.dim, options)?;
        let psi_scale = stationary_scales(&decomp, &markov.degree_tilde, params.dim);
        let mut ref_coords = embed(&decomp, params.dim);
        for (j, &c) in psi_scale.iter().enumerate() {
            ref_coords.column_mut(j).mapv_inplace(|v| v * c);
        }
        let mut embedding = Self {
            eigenvalues: decomp.eigenvalues.clone(),
            right: decomp.right.clone(),
            psi_scale,
            coords: Array2::zeros((0, params.dim)),
            softmax: Array2::zeros((0, params.dim)),
            reference: NystromReference {
                points: ref_points,
                local_scales: graph.local_scales.clone(),
                degrees: markov.degree.clone(),
                k: params.k,
            },
        };
        let coords = match &subset {
            None => ref_coords,
            Some(idx) => {
                let mut all = embedding.extend_rows(points)?;
                for (r, &i) in idx.iter().enumerate() {
                    all.row_mut(i).assign(&ref_coords.row(r));
                }
                all
            }
        };
        embedding.softmax = softmax_rows(coords.view());
        embedding.coords = coords;
        Ok(embedding)
    }

    /// Out-of-sample diffusion coordinates (before softmax) of `x`.
    pub fn extend_coords(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let r = &self.reference;
        let n = r.points.nrows();
        if x.len() != r.points.ncols() {
            return Err(VadError::Dimension(format!(
                "point has {} dims, embedding expects {}",
                x.len(),
                r.points.ncols()
            )));
        }
        for (j, &l) in self.eigenvalues.iter().enumerate().skip(1) {
            if l.abs() < T::lit(1e-8) {
                return Err(VadError::IllConditionedExtension {
                    index: j,
                    value: l.as_f64(),
                });
            }
        }
        let d2: Vec<T> = (0..n).map(|i| squared_distance(x, r.points.row(i))).collect();
        // an exact copy of a reference point plays that point's own role
        let own = d2.iter().position(|&d| d == T::zero());
        let candidates: Vec<(T, usize)> = d2
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != own)
            .map(|(i, &d)| (d, i))
            .collect();
        let k = r.k.min(candidates.len());
        if k == 0 {
            return Err(VadError::InsufficientData("empty reference set".into()));
        }
        let nearest = k_nearest(candidates.clone(), k);
        let sigma_x = local_scale(nearest[k - 1].0, candidates.iter().map(|c| c.0))
            .ok_or(VadError::DegenerateGeometry)?;
        let mut in_knn = vec![false; n];
        for &(_, i) in &nearest {
            in_knn[i] = true;
        }
        if let Some(i) = own {
            in_knn[i] = true;
        }
        let mut total = T::zero();
        let mut row: Vec<(usize, T)> = Vec::with_capacity(2 * k + 1);
        for i in 0..n {
            let neighbour = in_knn[i] || d2[i].sqrt() <= r.local_scales[i];
            if !neighbour {
                continue;
            }
            let w = if Some(i) == own {
                T::one()
            } else {
                (-d2[i] / (sigma_x * r.local_scales[i])).exp()
            };
            let wt = w / r.degrees[i];
            total += wt;
            row.push((i, wt));
        }
        let dim = self.dim();
        let mut out = Array1::zeros(dim);
        for j in 0..dim {
            let psi: T = row
                .iter()
                .map(|&(i, wt)| wt / total * self.right[[i, j + 1]])
                .sum::<T>()
                / self.eigenvalues[j + 1];
            out[j] = self.eigenvalues[j + 1] * psi * self.psi_scale[j];
        }
        Ok(out)
    }

    /// Out-of-sample softmax-normalized coordinates.
    pub fn nystrom_extend(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(softmax_coords(self.extend_coords(x)?.view()))
    }

    fn extend_rows(&self, points: ArrayView2<T>) -> Result<Array2<T>> {
        let rows: Result<Vec<Array1<T>>> = (0..points.nrows())
            .into_par_iter()
            .map(|i| self.extend_coords(points.row(i)))
            .collect();
        let rows = rows?;
        let mut out = Array2::zeros((points.nrows(), self.dim()));
        for (i, r) in rows.iter().enumerate() {
            out.row_mut(i).assign(r);
        }
        Ok(out)
    }

    /// Softmax-normalized extension of many rows.
    pub fn nystrom_rows(&self, points: ArrayView2<T>) -> Result<Array2<T>> {
        Ok(softmax_rows(self.extend_rows(points)?.view()))
    }

    /// The first `d` columns of the raw coordinates for rows `range`.
    pub fn coords_slice(&self, range: std::ops::Range<usize>) -> Array2<T> {
        self.coords.slice(s![range, ..]).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{eigendecompose, normalize_markov, AffinityGraph};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_examples() {
        let u = softmax_coords(array![0.0f64, 0.0, 0.0].view());
        assert!(u.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let e = std::f64::consts::E;
        let s = softmax_coords(array![1.0f64, 0.0, 0.0].view());
        let want = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        for k in 0..3 {
            assert!((s[k] - want[k]).abs() < 1e-15);
        }
        assert!((s[0] - 0.57612).abs() < 1e-5 && (s[1] - 0.21194).abs() < 1e-5);
        let shifted = softmax_coords(array![101.0f64, 100.0, 100.0].view());
        for k in 0..3 {
            assert!((shifted[k] - s[k]).abs() < 1e-15);
        }
        let big = softmax_coords(array![1000.0f64, -1000.0, 0.0].view());
        assert!(big.iter().all(|v| v.is_finite()));
    }

    fn blobs(n_per: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((2 * n_per, 4), |(i, j)| {
            let c = if i < n_per { -1.0 } else { 1.0 };
            let base = if j == 0 { c * 0.5 } else { 0.0 };
            base + rng.gen_range(-0.6..0.6)
        })
    }

    #[test]
    fn extension_reproduces_training_rows() {
        let x = blobs(60, 2);
        let emb = DiffusionEmbedding::fit(x.view(), &DiffusionParams::default()).unwrap();
        for i in (0..120).step_by(7) {
            let ext = emb.nystrom_extend(x.row(i)).unwrap();
            for k in 0..3 {
                assert!((ext[k] - emb.softmax[[i, k]]).abs() < 1e-6, "row {i}");
            }
        }
    }

    #[test]
    fn midpoint_of_mirrored_clusters_cancels() {
        // mirror-symmetric pair of clusters about the origin
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let half = Array2::from_shape_fn((40, 3), |(_, j)| {
            let base = if j == 0 { 0.6 } else { 0.0 };
            base + rng.gen_range(-0.5..0.5)
        });
        let mut x = Array2::<f64>::zeros((80, 3));
        for i in 0..40 {
            x.row_mut(i).assign(&half.row(i));
            x.row_mut(40 + i).assign(&(-&half.row(i)));
        }
        let emb = DiffusionEmbedding::fit(x.view(), &DiffusionParams::default()).unwrap();
        // ψ_1 separates the clusters antisymmetrically
        let psi1 = emb.right.column(1);
        for i in 0..40 {
            assert!((psi1[i] + psi1[40 + i]).abs() < 1e-6);
        }
        let m = emb.extend_coords(array![0.0f64, 0.0, 0.0].view()).unwrap();
        assert!(m[0].abs() < 1e-6, "{}", m[0]);
    }

    #[test]
    fn extension_is_continuous() {
        let x = blobs(50, 6);
        let emb = DiffusionEmbedding::fit(x.view(), &DiffusionParams::default()).unwrap();
        let p = array![0.3, 0.1, -0.2, 0.05];
        let q = &p + &array![1e-6, 0.0, 0.0, 0.0];
        let a = emb.extend_coords(p.view()).unwrap();
        let b = emb.extend_coords(q.view()).unwrap();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn subsampled_fit_covers_every_row() {
        let x = blobs(100, 8);
        let params = DiffusionParams {
            max_points: 120,
            ..DiffusionParams::default()
        };
        let emb = DiffusionEmbedding::fit(x.view(), &params).unwrap();
        assert_eq!(emb.reference.points.nrows(), 120);
        assert_eq!(emb.softmax.nrows(), 200);
        for row in emb.softmax.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coords_scale_with_eigenvectors() {
        let x = blobs(30, 9);
        let m = normalize_markov(&crate::diffusion::build_knn_graph(x.view(), 10).unwrap()).unwrap();
        let mut dec = eigendecompose(&m, 3).unwrap();
        let base = embed(&dec, 3);
        assert_eq!(base.ncols(), 3);
        dec.right.column_mut(2).mapv_inplace(|v| v * 2.0);
        let doubled = embed(&dec, 3);
        for i in 0..60 {
            assert_eq!(doubled[[i, 1]], 2.0 * base[[i, 1]]);
            assert_eq!(doubled[[i, 0]], base[[i, 0]]);
        }
    }

    #[test]
    fn embedding_distance_tracks_diffusion_distance() {
        // four loosely coupled cliques, 30 nodes
        let sizes = [8usize, 8, 7, 7];
        let link = [[0.0, 0.03, 0.01, 0.004], [0.03, 0.0, 0.02, 0.006], [0.01, 0.02, 0.0, 0.015], [0.004, 0.006, 0.015, 0.0]];
        let cluster: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat(c).take(s)).collect();
        let n = cluster.len();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut w = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    1.0
                } else if cluster[i] == cluster[j] {
                    rng.gen_range(0.8..1.0)
                } else {
                    link[cluster[i]][cluster[j]]
                };
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        let m = normalize_markov(&AffinityGraph::from_dense(w.view()).unwrap()).unwrap();
        let dec = eigendecompose(&m, 3).unwrap();
        let coords = embed(&dec, 3);
        let p = m.p.to_dense();
        let total: f64 = m.degree_tilde.iter().sum();
        let pi: Vec<f64> = m.degree_tilde.iter().map(|d| d / total).collect();
        // unit-norm ψ relate to π-orthonormal ψ by one factor per column
        let scale: Vec<f64> = (1..4)
            .map(|c| 1.0 / (0..n).map(|i| pi[i] * dec.right[[i, c]].powi(2)).sum::<f64>().sqrt())
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if cluster[i] == cluster[j] {
                    continue;
                }
                let brute = (0..n).map(|l| (p[[i, l]] - p[[j, l]]).powi(2) / pi[l]).sum::<f64>().sqrt();
                let emb = (0..3)
                    .map(|c| (scale[c] * (coords[[i, c]] - coords[[j, c]])).powi(2))
                    .sum::<f64>()
                    .sqrt();
                pairs.push((brute, emb));
            }
        }
        let lib = stationary_scales(&dec, &m.degree_tilde, 3);
        for c in 0..3 {
            assert!((lib[c] - scale[c]).abs() < 1e-9 * scale[c]);
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(brute, emb) in &pairs[..5] {
            assert!(((emb - brute) / brute).abs() < 0.1, "{emb} vs {brute}");
        }
    }
}
