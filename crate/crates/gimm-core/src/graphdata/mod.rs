//! Graph domain types, dataset ingestion, synthetic generators, adjacency
//! normalization, disjoint-union batching, and split machinery.

mod io;
mod synthetic;

pub use io::{load_edgelist_csv, load_tudataset, write_tudataset};
pub use synthetic::{planted_motif_generate, sbm_dataset, sbm_generate};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How feature values are interpreted when computing feature importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureMode {
    /// Features are 0/1 indicators; Gumbel noise is applied to node scores.
    BinaryOnehot,
    /// Features are reals in [0, 1]; Gumbel noise is applied to the feature
    /// importance instead, to keep it from collapsing toward zero.
    RealUnitInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

/// A graph: N nodes, a directed edge list (undirected graphs store both
/// orientations), an N x F feature matrix, and optional labels.
#[derive(Debug, Clone)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: Vec<(u32, u32)>,
    pub features: Tensor,
    pub node_labels: Option<Vec<usize>>,
    pub graph_label: Option<usize>,
    pub feature_mode: FeatureMode,
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        edges: Vec<(u32, u32)>,
        features: Tensor,
        feature_mode: FeatureMode,
    ) -> Result<Self> {
        let g = Graph {
            num_nodes,
            edges,
            features,
            node_labels: None,
            graph_label: None,
            feature_mode,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for &(u, v) in &self.edges {
            if u as usize >= self.num_nodes || v as usize >= self.num_nodes {
                return Err(Error::contract(
                    "Graph",
                    format!("edge ({u}, {v}) out of range for {} nodes", self.num_nodes),
                ));
            }
            if u == v {
                return Err(Error::contract("Graph", format!("self-loop at node {u}")));
            }
        }
        if self.features.rows != self.num_nodes {
            return Err(Error::contract(
                "Graph",
                format!(
                    "feature matrix has {} rows for {} nodes",
                    self.features.rows, self.num_nodes
                ),
            ));
        }
        if self.feature_mode == FeatureMode::RealUnitInterval
            && self.features.data.iter().any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::contract(
                "Graph",
                "real_unit_interval features must lie in [0, 1]",
            ));
        }
        if let Some(labels) = &self.node_labels {
            if labels.len() != self.num_nodes {
                return Err(Error::contract("Graph", "node label count mismatch"));
            }
        }
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols
    }

    /// Canonical undirected units: unique `(min(u,v), max(u,v))` pairs, sorted.
    pub fn undirected_units(&self) -> Vec<(u32, u32)> {
        let set: BTreeSet<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        set.into_iter().collect()
    }

    /// Units plus, for each stored directed edge, the index of its unit.
    pub fn unit_index(&self) -> (Vec<(u32, u32)>, Vec<usize>) {
        let units = self.undirected_units();
        let dir_to_unit = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let key = (u.min(v), u.max(v));
                units.binary_search(&key).expect("edge in unit set")
            })
            .collect();
        (units, dir_to_unit)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(u, _) in &self.edges {
            deg[u as usize] += 1;
        }
        deg
    }
}

/// Mode inference from raw feature values: exact 0/1 features are treated as
/// one-hot; anything else inside [0, 1] as unit-interval reals; values outside
/// fall back to the one-hot path (Gumbel on node scores).
pub fn infer_feature_mode(features: &Tensor) -> FeatureMode {
    if features.data.iter().all(|&v| v == 0.0 || v == 1.0) {
        FeatureMode::BinaryOnehot
    } else if features.data.iter().all(|&v| (0.0..=1.0).contains(&v)) {
        FeatureMode::RealUnitInterval
    } else {
        FeatureMode::BinaryOnehot
    }
}

#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub graphs: Vec<Graph>,
    pub name: String,
    pub num_classes: usize,
    pub task: Task,
}

impl GraphDataset {
    pub fn validate(&self) -> Result<()> {
        for g in &self.graphs {
            g.validate()?;
        }
        match self.task {
            Task::NodeClassification => {
                if self.graphs.len() != 1 || self.graphs[0].node_labels.is_none() {
                    return Err(Error::contract(
                        "GraphDataset",
                        "node task requires exactly one graph with node labels",
                    ));
                }
            }
            Task::GraphClassification => {
                if self.graphs.iter().any(|g| g.graph_label.is_none()) {
                    return Err(Error::contract(
                        "GraphDataset",
                        "graph task requires a label on every graph",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

// ── Adjacency normalization ─────────────────────────────────────────────

/// Dense `D^{-1/2} (A + I) D^{-1/2}` with self-loops added.
pub fn normalize_adjacency(g: &Graph) -> Result<Tensor> {
    if g.num_nodes == 0 {
        return Err(Error::domain("normalize_adjacency", "empty graph"));
    }
    let n = g.num_nodes;
    let mut a = Tensor::identity(n);
    for &(u, v) in &g.edges {
        a.data[u as usize * n + v as usize] = 1.0;
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|u| {
            let d: f64 = a.data[u * n..(u + 1) * n].iter().sum();
            1.0 / d.sqrt()
        })
        .collect();
    for u in 0..n {
        for v in 0..n {
            a.data[u * n + v] *= inv_sqrt_deg[u] * inv_sqrt_deg[v];
        }
    }
    Ok(a)
}

/// Edge-list form of [`normalize_adjacency`]: unique directed entries
/// including self-loops, with weight `1 / sqrt(deg(u) * deg(v))`.
pub fn normalized_adjacency_edges(g: &Graph) -> Result<(Vec<(u32, u32)>, Vec<f64>)> {
    if g.num_nodes == 0 {
        return Err(Error::domain("normalize_adjacency", "empty graph"));
    }
    let n = g.num_nodes;
    let mut set: BTreeSet<(u32, u32)> = g.edges.iter().copied().collect();
    for u in 0..n as u32 {
        set.insert((u, u));
    }
    let mut deg = vec![0usize; n];
    for &(u, _) in &set {
        deg[u as usize] += 1;
    }
    let mut edges = Vec::with_capacity(set.len());
    let mut weights = Vec::with_capacity(set.len());
    for (u, v) in set {
        edges.push((u, v));
        weights.push(1.0 / ((deg[u as usize] * deg[v as usize]) as f64).sqrt());
    }
    Ok((edges, weights))
}

// ── Batching ────────────────────────────────────────────────────────────

/// Block-diagonal disjoint union; the returned map sends each union node to
/// the index of its source graph.
pub fn batch_disjoint_union(graphs: &[&Graph]) -> Result<(Graph, Vec<u32>)> {
    if graphs.is_empty() {
        return Err(Error::contract("batch_disjoint_union", "empty batch"));
    }
    let f = graphs[0].feature_dim();
    if graphs.iter().any(|g| g.feature_dim() != f) {
        return Err(Error::contract(
            "batch_disjoint_union",
            "feature dimension mismatch across graphs",
        ));
    }
    let total_nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
    let mut edges = Vec::new();
    let mut features = Vec::with_capacity(total_nodes * f);
    let mut map = Vec::with_capacity(total_nodes);
    let mut offset = 0u32;
    let all_node_labels = graphs.iter().all(|g| g.node_labels.is_some());
    let mut node_labels = Vec::new();
    for (gi, g) in graphs.iter().enumerate() {
        for &(u, v) in &g.edges {
            edges.push((u + offset, v + offset));
        }
        features.extend_from_slice(&g.features.data);
        map.extend(std::iter::repeat(gi as u32).take(g.num_nodes));
        if all_node_labels {
            node_labels.extend_from_slice(g.node_labels.as_ref().unwrap());
        }
        offset += g.num_nodes as u32;
    }
    let mode = if graphs
        .iter()
        .all(|g| g.feature_mode == FeatureMode::RealUnitInterval)
    {
        FeatureMode::RealUnitInterval
    } else {
        FeatureMode::BinaryOnehot
    };
    let mut union = Graph::new(
        total_nodes,
        edges,
        Tensor::new(total_nodes, f, features)?,
        mode,
    )?;
    if all_node_labels {
        union.node_labels = Some(node_labels);
    }
    Ok((union, map))
}

// ── Splits ──────────────────────────────────────────────────────────────

/// Train/test/validation node-index sets for the node task.
#[derive(Debug, Clone)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub val: Vec<usize>,
}

/// K disjoint covering folds, balanced within one element.
#[derive(Debug, Clone)]
pub struct KFold {
    pub folds: Vec<Vec<usize>>,
}

impl KFold {
    /// Training indices (everything outside fold `i`) and test indices.
    pub fn train_test(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.folds[i].clone();
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (train, test)
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

pub fn kfold_split(dataset: &GraphDataset, k: usize, rng: &mut impl Rng) -> Result<KFold> {
    if k == 0 || k > dataset.len() {
        return Err(Error::contract(
            "kfold_split",
            format!("k = {k} out of range for {} graphs", dataset.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, item) in idx.into_iter().enumerate() {
        folds[pos % k].push(item);
    }
    Ok(KFold { folds })
}

pub fn node_split(
    graph: &Graph,
    ratios: (f64, f64, f64),
    rng: &mut impl Rng,
) -> Result<NodeSplit> {
    let total = ratios.0 + ratios.1 + ratios.2;
    if (total - 1.0).abs() > 1e-9 || ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(Error::contract(
            "node_split",
            format!("ratios must be non-negative and sum to 1, got {ratios:?}"),
        ));
    }
    let n = graph.num_nodes;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = (n as f64 * ratios.0).floor() as usize;
    let n_test = (n as f64 * ratios.1).floor() as usize;
    let train = idx[..n_train].to_vec();
    let test = idx[n_train..n_train + n_test].to_vec();
    let val = idx[n_train + n_test..].to_vec();
    Ok(NodeSplit { train, test, val })
}
