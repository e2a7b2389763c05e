//! View comparison: trains the downstream-facing encoders by maximizing
//! InfoNCE between the two views' projected representations.
//!
//! The node task uses a GCN over the normalized adjacency; the graph task a
//! GIN with learnable per-layer self-weight and sum readout. The projection
//! head is a training-time device only; downstream embeddings come straight
//! from the encoder.

mod train;

pub use train::{
    embed_graphs, embed_nodes, embed_nodes_views, train_graph_contrast,
    train_graph_contrast_with, train_node_contrast, train_node_contrast_with,
    write_embeddings_csv, ContrastLogRow, ContrastTrainResult, ViewPairFn,
};

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graphdata::{normalized_adjacency_edges, Graph};
use crate::nn::{linear_vars, mlp_vars, Linear, LinearVars, Mlp, MlpVars};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingCombination {
    /// `f(G1) + f(G2) + 2 f(G)`.
    ViewsPlusDoubleOriginal,
    /// `f(G1) + f(G2)`.
    ViewsOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// InfoNCE temperature.
    pub eps: f64,
    /// Output embedding dimension of the encoders.
    pub embed_dim: usize,
    pub gcn_layers: usize,
    pub gin_layers: usize,
    pub head_layers: usize,
    pub embedding_combination: EmbeddingCombination,
    pub resample_views_each_epoch: bool,
    pub include_positive_in_denominator: bool,
    pub seed: u64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig {
            lr: 1e-3,
            epochs: 60,
            batch_size: 32,
            eps: 0.5,
            embed_dim: 128,
            gcn_layers: 2,
            gin_layers: 3,
            head_layers: 2,
            embedding_combination: EmbeddingCombination::ViewsPlusDoubleOriginal,
            resample_views_each_epoch: false,
            include_positive_in_denominator: false,
            seed: 0,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.embed_dim == 0 || self.gcn_layers == 0 || self.gin_layers == 0 {
            return Err(Error::Config("dimensions and depths must be positive".into()));
        }
        if !(1..=2).contains(&self.head_layers) {
            return Err(Error::Config("head_layers must be 1 or 2".into()));
        }
        Ok(())
    }
}

/// Edge structure plus per-edge weights bound to a tape.
pub struct BoundAdjacency {
    pub edges: Arc<Vec<(u32, u32)>>,
    pub weights: Var,
}

impl BoundAdjacency {
    /// Normalized `D^{-1/2}(A+I)D^{-1/2}` weights (GCN convention).
    pub fn normalized(tape: &mut Tape, g: &Graph) -> Result<Self> {
        let (edges, weights) = normalized_adjacency_edges(g)?;
        let n = edges.len();
        let w = tape.constant(Tensor::new(n, 1, weights)?);
        Ok(BoundAdjacency {
            edges: Arc::new(edges),
            weights: w,
        })
    }

    /// Raw neighbor-sum weights (GIN convention: no self-loops, weight 1).
    pub fn plain(tape: &mut Tape, g: &Graph) -> Self {
        let edges = Arc::new(g.edges.clone());
        let w = tape.constant(Tensor::ones(edges.len(), 1));
        BoundAdjacency { edges, weights: w }
    }
}

// ── Node encoder (GCN) ──────────────────────────────────────────────────

/// Stacked GCN layers over the normalized adjacency: relu between layers,
/// linear output.
#[derive(Debug, Clone)]
pub struct NodeEncoder {
    pub layers: Vec<Linear>,
}

impl NodeEncoder {
    pub fn init(in_dim: usize, cfg: &ContrastConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::new();
        let mut d = in_dim;
        for _ in 0..cfg.gcn_layers {
            layers.push(Linear::xavier(d, cfg.embed_dim, true, rng)?);
            d = cfg.embed_dim;
        }
        Ok(NodeEncoder { layers })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.cols
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> NodeEncoderVars {
        NodeEncoderVars {
            layers: self.layers.iter().map(|l| l.bind(tape)).collect(),
        }
    }
}

pub struct NodeEncoderVars {
    pub layers: Vec<LinearVars>,
}

impl NodeEncoderVars {
    pub fn forward(&self, tape: &mut Tape, adj: &BoundAdjacency, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let hw = tape.matmul(h, layer.w)?;
            let agg = tape.adj_matmul(adj.weights, hw, adj.edges.clone())?;
            h = match layer.b {
                Some(b) => tape.add(agg, b)?,
                None => agg,
            };
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(linear_vars).collect()
    }
}

/// Full-graph GCN embedding of `g` (no projection head).
pub fn gcn_forward(g: &Graph, encoder: &NodeEncoder) -> Result<Tensor> {
    let mut tape = Tape::new();
    let adj = BoundAdjacency::normalized(&mut tape, g)?;
    let x = tape.constant(g.features.clone());
    let bound = encoder.bind(&mut tape);
    let out = bound.forward(&mut tape, &adj, x)?;
    Ok(tape.value(out).clone())
}

// ── Graph encoder (GIN) ─────────────────────────────────────────────────

/// One GIN layer: `h <- MLP((1 + eps) * h + sum_{u in N(v)} h_u)` with a
/// learnable scalar `eps` (initialized to zero).
#[derive(Debug, Clone)]
pub struct GinLayer {
    pub eps: Tensor,
    pub mlp: Mlp,
}

#[derive(Debug, Clone)]
pub struct GraphEncoder {
    pub layers: Vec<GinLayer>,
}

impl GraphEncoder {
    pub fn init(in_dim: usize, cfg: &ContrastConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::new();
        let mut d = in_dim;
        for _ in 0..cfg.gin_layers {
            layers.push(GinLayer {
                eps: Tensor::zeros(1, 1).with_grad(),
                mlp: Mlp::xavier(&[d, cfg.embed_dim, cfg.embed_dim], true, rng)?,
            });
            d = cfg.embed_dim;
        }
        Ok(GraphEncoder { layers })
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .expect("non-empty")
            .mlp
            .layers
            .last()
            .expect("non-empty")
            .w
            .cols
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = Vec::new();
        for l in &mut self.layers {
            p.push(&mut l.eps);
            p.extend(l.mlp.params_mut());
        }
        p
    }

    pub fn bind(&self, tape: &mut Tape) -> GraphEncoderVars {
        GraphEncoderVars {
            layers: self
                .layers
                .iter()
                .map(|l| GinLayerVars {
                    eps: tape.leaf(&l.eps),
                    mlp: l.mlp.bind(tape),
                })
                .collect(),
        }
    }
}

pub struct GinLayerVars {
    pub eps: Var,
    pub mlp: MlpVars,
}

pub struct GraphEncoderVars {
    pub layers: Vec<GinLayerVars>,
}

impl GraphEncoderVars {
    pub fn forward(&self, tape: &mut Tape, adj: &BoundAdjacency, x: Var) -> Result<Var> {
        let one = tape.constant(Tensor::scalar(1.0));
        let mut h = x;
        for layer in &self.layers {
            let one_plus = tape.add(one, layer.eps)?;
            let self_term = tape.hadamard(h, one_plus)?;
            let agg = tape.adj_matmul(adj.weights, h, adj.edges.clone())?;
            let mixed = tape.add(self_term, agg)?;
            h = layer.mlp.forward(tape, mixed)?;
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.push(l.eps);
            v.extend(mlp_vars(&l.mlp));
        }
        v
    }
}

/// Per-node GIN embedding of `g` (no readout, no projection head).
pub fn gin_forward(g: &Graph, encoder: &GraphEncoder) -> Result<Tensor> {
    let mut tape = Tape::new();
    let adj = BoundAdjacency::plain(&mut tape, g);
    let x = tape.constant(g.features.clone());
    let bound = encoder.bind(&mut tape);
    let out = bound.forward(&mut tape, &adj, x)?;
    Ok(tape.value(out).clone())
}

/// Sum readout: per-graph row sums of node embeddings, in a canonical
/// accumulation order (exactly permutation invariant).
pub fn readout_sum(node_embs: &Tensor, node_to_graph: &[u32], num_graphs: usize) -> Result<Tensor> {
    let mut tape = Tape::new();
    let h = tape.constant(node_embs.clone());
    let out = tape.segment_sum(h, Arc::new(node_to_graph.to_vec()), num_graphs)?;
    Ok(tape.value(out).clone())
}

// ── Projection head ─────────────────────────────────────────────────────

/// 1-2 layer MLP used during contrastive training only; the graph task
/// applies sum readout after it.
#[derive(Debug, Clone)]
pub struct ProjectionHead {
    pub mlp: Mlp,
}

impl ProjectionHead {
    pub fn init(dim: usize, layers: usize, rng: &mut impl Rng) -> Result<Self> {
        let dims: Vec<usize> = std::iter::repeat(dim).take(layers + 1).collect();
        Ok(ProjectionHead {
            mlp: Mlp::xavier(&dims, true, rng)?,
        })
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.mlp.params_mut()
    }

    pub fn bind(&self, tape: &mut Tape) -> MlpVars {
        self.mlp.bind(tape)
    }
}

// ── Checkpoints ─────────────────────────────────────────────────────────

fn insert_linear(ckpt: &mut Checkpoint, prefix: &str, l: &Linear) {
    ckpt.insert(&format!("{prefix}.w"), &l.w);
    if let Some(b) = &l.b {
        ckpt.insert(&format!("{prefix}.b"), b);
    }
}

fn take_linear(ckpt: &mut Checkpoint, prefix: &str) -> Result<Linear> {
    let w = ckpt.take(&format!("{prefix}.w"))?;
    let b = if ckpt.tensors.contains_key(&format!("{prefix}.b")) {
        Some(ckpt.take(&format!("{prefix}.b"))?)
    } else {
        None
    };
    Ok(Linear { w, b })
}

fn insert_mlp(ckpt: &mut Checkpoint, prefix: &str, mlp: &Mlp) {
    for (i, l) in mlp.layers.iter().enumerate() {
        insert_linear(ckpt, &format!("{prefix}.{i}"), l);
    }
}

fn take_mlp(ckpt: &mut Checkpoint, prefix: &str) -> Result<Mlp> {
    let mut layers = Vec::new();
    let mut i = 0;
    while ckpt.tensors.contains_key(&format!("{prefix}.{i}.w")) {
        layers.push(take_linear(ckpt, &format!("{prefix}.{i}"))?);
        i += 1;
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint(format!("missing MLP {prefix:?}")));
    }
    Ok(Mlp { layers })
}

pub fn node_encoder_to_checkpoint(
    encoder: &NodeEncoder,
    head: &ProjectionHead,
    config: serde_json::Value,
) -> Checkpoint {
    let mut ckpt = Checkpoint::new("encoder", config);
    for (i, l) in encoder.layers.iter().enumerate() {
        insert_linear(&mut ckpt, &format!("gcn.{i}"), l);
    }
    insert_mlp(&mut ckpt, "head", &head.mlp);
    ckpt
}

pub fn node_encoder_from_checkpoint(mut ckpt: Checkpoint) -> Result<(NodeEncoder, ProjectionHead)> {
    let mut layers = Vec::new();
    let mut i = 0;
    while ckpt.tensors.contains_key(&format!("gcn.{i}.w")) {
        layers.push(take_linear(&mut ckpt, &format!("gcn.{i}"))?);
        i += 1;
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint("not a node-encoder checkpoint".into()));
    }
    let head = ProjectionHead {
        mlp: take_mlp(&mut ckpt, "head")?,
    };
    Ok((NodeEncoder { layers }, head))
}

pub fn graph_encoder_to_checkpoint(
    encoder: &GraphEncoder,
    head: &ProjectionHead,
    config: serde_json::Value,
) -> Checkpoint {
    let mut ckpt = Checkpoint::new("encoder", config);
    for (i, l) in encoder.layers.iter().enumerate() {
        ckpt.insert(&format!("gin.{i}.eps"), &l.eps);
        insert_mlp(&mut ckpt, &format!("gin.{i}.mlp"), &l.mlp);
    }
    insert_mlp(&mut ckpt, "head", &head.mlp);
    ckpt
}

pub fn graph_encoder_from_checkpoint(
    mut ckpt: Checkpoint,
) -> Result<(GraphEncoder, ProjectionHead)> {
    let mut layers = Vec::new();
    let mut i = 0;
    while ckpt.tensors.contains_key(&format!("gin.{i}.eps")) {
        layers.push(GinLayer {
            eps: ckpt.take(&format!("gin.{i}.eps"))?,
            mlp: take_mlp(&mut ckpt, &format!("gin.{i}.mlp"))?,
        });
        i += 1;
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint("not a graph-encoder checkpoint".into()));
    }
    let head = ProjectionHead {
        mlp: take_mlp(&mut ckpt, "head")?,
    };
    Ok((GraphEncoder { layers }, head))
}
