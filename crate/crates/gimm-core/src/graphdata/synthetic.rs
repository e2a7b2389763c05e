//! Synthetic graph generators used by property tests and the ablation and
//! sensitivity acceptance runs.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{FeatureMode, Graph, GraphDataset, Task};

/// Stochastic block model with block-indicator one-hot features plus
/// uniform noise features; node labels are the block ids.
///
/// `feature_dim` is the total feature width and must be at least the number
/// of blocks.
pub fn sbm_generate(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    rng: &mut impl Rng,
) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::domain(
            "sbm_generate",
            format!("probabilities must lie in [0, 1], got p_in={p_in}, p_out={p_out}"),
        ));
    }
    let k = block_sizes.len();
    if k == 0 || block_sizes.iter().any(|&s| s == 0) {
        return Err(Error::contract("sbm_generate", "blocks must be non-empty"));
    }
    if feature_dim < k {
        return Err(Error::contract(
            "sbm_generate",
            format!("feature_dim {feature_dim} < {k} blocks"),
        ));
    }
    let n: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of[u] == block_of[v] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((u as u32, v as u32));
                edges.push((v as u32, u as u32));
            }
        }
    }

    let mut x = Tensor::zeros(n, feature_dim);
    for u in 0..n {
        x.set(u, block_of[u], 1.0);
        for j in k..feature_dim {
            x.set(u, j, rng.random_range(0.0..1.0));
        }
    }

    let mut g = Graph::new(n, edges, x, FeatureMode::RealUnitInterval)?;
    g.node_labels = Some(block_of);
    Ok(g)
}

/// Wraps an SBM graph as a single-graph node-classification dataset.
pub fn sbm_dataset(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    rng: &mut impl Rng,
) -> Result<GraphDataset> {
    let g = sbm_generate(block_sizes, p_in, p_out, feature_dim, rng)?;
    let ds = GraphDataset {
        graphs: vec![g],
        name: "sbm".to_string(),
        num_classes: block_sizes.len(),
        task: Task::NodeClassification,
    };
    ds.validate()?;
    Ok(ds)
}

const MOTIF_NODES: usize = 14;
const MOTIF_NOISE_P: f64 = 0.06;
/// Degree one-hot width for motif graphs (degrees clamp at the cap).
const MOTIF_DEGREE_CAP: usize = 8;

/// Balanced two-class dataset where class 1 carries a planted 5-cycle on
/// top of Erdos-Renyi noise and class 0 is the same noise alone, so the
/// classes share identical noise statistics and differ exactly in the
/// planted motif.
pub fn planted_motif_generate(num_graphs: usize, rng: &mut impl Rng) -> Result<GraphDataset> {
    if num_graphs < 2 {
        return Err(Error::contract(
            "planted_motif_generate",
            "need at least 2 graphs",
        ));
    }
    let mut graphs = Vec::with_capacity(num_graphs);
    for gi in 0..num_graphs {
        let label = gi % 2;
        let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
        for u in 0..MOTIF_NODES as u32 {
            for v in (u + 1)..MOTIF_NODES as u32 {
                if rng.random_bool(MOTIF_NOISE_P) {
                    pairs.insert((u, v));
                }
            }
        }
        if label == 1 {
            let cycle: Vec<usize> = sample(rng, MOTIF_NODES, 5).into_iter().collect();
            for i in 0..5 {
                let (a, b) = (cycle[i] as u32, cycle[(i + 1) % 5] as u32);
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        let mut edges = Vec::with_capacity(pairs.len() * 2);
        for &(u, v) in &pairs {
            edges.push((u, v));
            edges.push((v, u));
        }
        let mut deg = vec![0usize; MOTIF_NODES];
        for &(u, _) in &edges {
            deg[u as usize] += 1;
        }
        let mut x = Tensor::zeros(MOTIF_NODES, MOTIF_DEGREE_CAP + 1);
        for u in 0..MOTIF_NODES {
            x.set(u, deg[u].min(MOTIF_DEGREE_CAP), 1.0);
        }
        let mut g = Graph::new(MOTIF_NODES, edges, x, FeatureMode::BinaryOnehot)?;
        g.graph_label = Some(label);
        graphs.push(g);
    }
    let ds = GraphDataset {
        graphs,
        name: "planted-motif".to_string(),
        num_classes: 2,
        task: Task::GraphClassification,
    };
    ds.validate()?;
    Ok(ds)
}
