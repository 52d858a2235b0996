use super::graph::AffinityGraph;
use super::sparse::CsrMatrix;
use crate::error::{Result, VadError};
use crate::Real;

/// Row-stochastic transition matrix after density-invariant normalization.
#[derive(Debug, Clone)]
pub struct MarkovMatrix<T> {
    pub p: CsrMatrix<T>,
    /// `W̃ = D⁻¹ W D⁻¹` (symmetric).
    pub w_tilde: CsrMatrix<T>,
    /// Row sums of `W`.
    pub degree: Vec<T>,
    /// Row sums of `W̃`.
    pub degree_tilde: Vec<T>,
}

impl<T: Real> MarkovMatrix<T> {
    pub fn n(&self) -> usize {
        self.p.n()
    }

    /// Symmetric conjugate `D̃^{1/2} P D̃^{-1/2} = D̃^{-1/2} W̃ D̃^{-1/2}`.
    pub fn symmetric_conjugate(&self) -> CsrMatrix<T> {
        let s: Vec<T> = self.degree_tilde.iter().map(|d| d.sqrt()).collect();
        self.w_tilde.map(|i, j, v| v / (s[i] * s[j]))
    }
}

/// `W̃ = D⁻¹ W D⁻¹`, then `P = D̃⁻¹ W̃`.
pub fn normalize_markov<T: Real>(graph: &AffinityGraph<T>) -> Result<MarkovMatrix<T>> {
    let w = &graph.weights;
    let components = w.components();
    if components != 1 {
        return Err(VadError::DisconnectedGraph { components });
    }
    let degree = w.row_sums();
    let w_tilde = w.map(|i, j, v| v / (degree[i] * degree[j]));
    let degree_tilde = w_tilde.row_sums();
    let p = w_tilde.map(|i, _, v| v / degree_tilde[i]);
    Ok(MarkovMatrix {
        p,
        w_tilde,
        degree,
        degree_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::build_knn_graph;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_are_stochastic_and_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((80, 4), |_| rng.gen_range(0.0..1.0));
        let g = build_knn_graph(x.view(), 6).unwrap();
        let m = normalize_markov(&g).unwrap();
        for s in m.p.row_sums() {
            assert!((s - 1.0f64).abs() < 1e-9);
        }
        // dense reimplementation
        let w = g.weights.to_dense();
        let n = w.nrows();
        let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
        let mut wt = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                wt[[i, j]] = w[[i, j]] / (d[i] * d[j]);
            }
        }
        let dt: Vec<f64> = (0..n).map(|i| wt.row(i).sum()).collect();
        let p = m.p.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!((p[[i, j]] - wt[[i, j]] / dt[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_complete_graph_is_uniform() {
        let w = Array2::<f64>::from_elem((6, 6), 0.4);
        let g = AffinityGraph::from_dense(w.view()).unwrap();
        let m = normalize_markov(&g).unwrap();
        assert!(m.p.to_dense().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut w = Array2::<f64>::zeros((4, 4));
        w[[0, 1]] = 1.0;
        w[[1, 0]] = 1.0;
        w[[2, 3]] = 1.0;
        w[[3, 2]] = 1.0;
        for i in 0..4 {
            w[[i, i]] = 1.0;
        }
        let g = AffinityGraph::from_dense(w.view()).unwrap();
        let err = normalize_markov(&g).unwrap_err();
        assert!(err.to_string().contains("increase k"));
    }
}
