//! Diffusion maps: kNN affinity graph, density-invariant Markov
//! normalization, leading eigenpairs, softmax-normalized coordinates and
//! out-of-sample extension.

mod eigen;
mod embedding;
mod graph;
mod markov;
mod sparse;

pub use eigen::{eigendecompose, eigendecompose_with, lanczos_top, Decomposition, LanczosOptions};
pub use embedding::{
    embed, stationary_scales, softmax_coords, softmax_rows, DiffusionEmbedding, DiffusionParams, NystromReference,
};
pub use graph::{build_knn_graph, AffinityGraph};
pub use markov::{normalize_markov, MarkovMatrix};
pub use sparse::CsrMatrix;
