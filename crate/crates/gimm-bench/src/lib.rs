//! Shared fixtures for the criterion benchmarks.

use rand::Rng;

use gimm_core::graphdata::{sbm_generate, Graph};
use gimm_core::tensor::Tensor;

pub fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape by construction")
}

pub fn bench_graph(nodes_per_block: usize, rng: &mut impl Rng) -> Graph {
    sbm_generate(&[nodes_per_block, nodes_per_block], 0.15, 0.02, 8, rng)
        .expect("valid SBM parameters")
}
