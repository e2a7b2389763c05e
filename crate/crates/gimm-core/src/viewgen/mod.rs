//! Automated graph view generator: learns per-edge and per-feature
//! importance by adversarial max-min optimization, then samples stochastic
//! views by importance-derived edge dropping and feature masking.
//!
//! The importance learner (GCN weight `W`, node-score MLP `h_phi`, edge-score
//! MLP `h_psi`) maximizes the InfoNCE estimate between projected embeddings
//! of the original graph and the importance-reweighted graph minus a size
//! regularizer, while the adversary (encoder `f_theta`, projection `g_xi`)
//! minimizes the same estimate.

mod infonce;
mod sampler;
mod train;

pub use infonce::{infonce, infonce_value};
pub use sampler::{
    edge_drop_probs, feature_mask_probs, generate_view_pair, sample_view, sample_view_pair,
    sample_view_pair_salted, SamplingImportance, ViewSamplerConfig,
};
pub use train::{
    train_generator, train_generator_call_count, train_generator_ext, AdversaryMode,
    GeneratorTrainResult, TrainLogRow,
};

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graphdata::{FeatureMode, Graph};
use crate::nn::{linear_vars, mlp_vars, Linear, LinearVars, Mlp, MlpVars};
use crate::tensor::{xavier_init, Tape, Tensor, Var};

/// Hyperparameters of the view generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub hidden_dim: usize,
    /// Gumbel temperature; smaller pushes importances toward 0/1.
    pub tau: f64,
    /// InfoNCE temperature.
    pub eps: f64,
    /// Regularization weight on the importance mass.
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub adversary_layers: usize,
    pub projection_layers: usize,
    /// Diagnostic lower bound on I-hat; monitored, never enforced.
    pub zeta: f64,
    /// Graph-task minibatch size (disjoint-union batches).
    pub batch_size: usize,
    pub include_positive_in_denominator: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            hidden_dim: 128,
            tau: 0.4,
            eps: 0.5,
            lambda: 0.01,
            epochs: 50,
            lr: 1e-3,
            adversary_layers: 1,
            projection_layers: 1,
            zeta: 0.0,
            batch_size: 8,
            include_positive_in_denominator: false,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if !(1..=2).contains(&self.adversary_layers) {
            return Err(Error::Config("adversary_layers must be 1 or 2".into()));
        }
        if !(1..=2).contains(&self.projection_layers) {
            return Err(Error::Config("projection_layers must be 1 or 2".into()));
        }
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "hidden_dim and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Width of the hidden layer inside the importance MLPs.
    fn score_hidden(&self) -> usize {
        (self.hidden_dim / 2).max(1)
    }
}

/// Parameters of the importance learner and its adversary.
#[derive(Debug, Clone)]
pub struct GeneratorState {
    /// Importance GCN weight (`E = relu(A X W)`); identity and frozen in the
    /// parameterless ablation.
    pub w: Tensor,
    /// Node-score MLP `h_phi`: embedding -> 1.
    pub phi: Mlp,
    /// Edge-score MLP `h_psi`: concatenated endpoint embeddings -> 1.
    pub psi: Mlp,
    /// Adversary GCN encoder `f_theta` (1-2 layers).
    pub theta: Vec<Linear>,
    /// Adversary projection head `g_xi` (1-2 layer MLP).
    pub xi: Mlp,
    pub w_frozen: bool,
}

impl GeneratorState {
    pub fn init(feature_dim: usize, cfg: &GeneratorConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        Self::build(feature_dim, cfg, rng, false)
    }

    /// Parameterless-GCN variant: `W = I`, never updated.
    pub fn init_identity_w(
        feature_dim: usize,
        cfg: &GeneratorConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        Self::build(feature_dim, cfg, rng, true)
    }

    fn build(
        feature_dim: usize,
        cfg: &GeneratorConfig,
        rng: &mut impl Rng,
        frozen_identity: bool,
    ) -> Result<Self> {
        let emb = if frozen_identity {
            feature_dim
        } else {
            cfg.hidden_dim
        };
        let w = if frozen_identity {
            Tensor::identity(feature_dim)
        } else {
            xavier_init(feature_dim, cfg.hidden_dim, rng)?
        };
        let k = cfg.score_hidden();
        let phi = Mlp::xavier(&[emb, k, 1], true, rng)?;
        let psi = Mlp::xavier(&[2 * emb, k, 1], true, rng)?;
        let mut theta = Vec::new();
        let mut in_dim = feature_dim;
        for _ in 0..cfg.adversary_layers {
            theta.push(Linear::xavier(in_dim, cfg.hidden_dim, true, rng)?);
            in_dim = cfg.hidden_dim;
        }
        let xi_dims: Vec<usize> = std::iter::repeat(cfg.hidden_dim)
            .take(cfg.projection_layers + 1)
            .collect();
        let xi = Mlp::xavier(&xi_dims, true, rng)?;
        Ok(GeneratorState {
            w,
            phi,
            psi,
            theta,
            xi,
            w_frozen: frozen_identity,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.w.cols
    }

    pub fn feature_dim(&self) -> usize {
        self.w.rows
    }

    /// Importance-learner parameters (targets of the max side).
    pub fn learner_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = Vec::new();
        if !self.w_frozen {
            p.push(&mut self.w);
        }
        p.extend(self.phi.params_mut());
        p.extend(self.psi.params_mut());
        p
    }

    /// Adversary parameters (targets of the min side).
    pub fn adversary_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = Vec::new();
        for l in &mut self.theta {
            p.extend(l.params_mut());
        }
        p.extend(self.xi.params_mut());
        p
    }

    pub fn bind(&self, tape: &mut Tape) -> GeneratorBound {
        GeneratorBound {
            w: tape.leaf(&self.w),
            phi: self.phi.bind(tape),
            psi: self.psi.bind(tape),
            theta: self.theta.iter().map(|l| l.bind(tape)).collect(),
            xi: self.xi.bind(tape),
        }
    }

    pub fn to_checkpoint(&self, config: serde_json::Value) -> Checkpoint {
        let mut ckpt = Checkpoint::new("generator", config);
        ckpt.insert("w", &self.w);
        insert_mlp(&mut ckpt, "phi", &self.phi);
        insert_mlp(&mut ckpt, "psi", &self.psi);
        for (i, l) in self.theta.iter().enumerate() {
            insert_linear(&mut ckpt, &format!("theta.{i}"), l);
        }
        insert_mlp(&mut ckpt, "xi", &self.xi);
        ckpt.config["w_frozen"] = serde_json::json!(self.w_frozen);
        ckpt
    }

    pub fn from_checkpoint(mut ckpt: Checkpoint) -> Result<Self> {
        let w_frozen = ckpt.config["w_frozen"].as_bool().unwrap_or(false);
        let w = ckpt.take("w")?;
        let phi = take_mlp(&mut ckpt, "phi")?;
        let psi = take_mlp(&mut ckpt, "psi")?;
        let mut theta = Vec::new();
        let mut i = 0;
        while ckpt.tensors.contains_key(&format!("theta.{i}.w")) {
            theta.push(take_linear(&mut ckpt, &format!("theta.{i}"))?);
            i += 1;
        }
        let xi = take_mlp(&mut ckpt, "xi")?;
        Ok(GeneratorState {
            w,
            phi,
            psi,
            theta,
            xi,
            w_frozen,
        })
    }
}

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

/// Tape bindings for one forward pass of the generator.
pub struct GeneratorBound {
    pub w: Var,
    pub phi: MlpVars,
    pub psi: MlpVars,
    pub theta: Vec<LinearVars>,
    pub xi: MlpVars,
}

impl GeneratorBound {
    pub fn learner_vars(&self, frozen_w: bool) -> Vec<Var> {
        let mut v = Vec::new();
        if !frozen_w {
            v.push(self.w);
        }
        v.extend(mlp_vars(&self.phi));
        v.extend(mlp_vars(&self.psi));
        v
    }

    pub fn adversary_vars(&self) -> Vec<Var> {
        let mut v = Vec::new();
        for l in &self.theta {
            v.extend(linear_vars(l));
        }
        v.extend(mlp_vars(&self.xi));
        v
    }
}

/// Precomputed edge bookkeeping shared by every forward pass on one graph.
#[derive(Debug, Clone)]
pub struct GraphCtx {
    pub edges: Arc<Vec<(u32, u32)>>,
    pub units: Vec<(u32, u32)>,
    /// Canonical endpoints of each unit, for the edge-score gather.
    pub unit_src: Arc<Vec<u32>>,
    pub unit_dst: Arc<Vec<u32>>,
    /// Stored directed edge -> its unit, for materializing unit importance.
    pub dir_to_unit: Arc<Vec<u32>>,
    pub features_t: Tensor,
}

impl GraphCtx {
    pub fn new(g: &Graph) -> Self {
        let (units, dir_to_unit) = g.unit_index();
        GraphCtx {
            edges: Arc::new(g.edges.clone()),
            unit_src: Arc::new(units.iter().map(|&(u, _)| u).collect()),
            unit_dst: Arc::new(units.iter().map(|&(_, v)| v).collect()),
            dir_to_unit: Arc::new(dir_to_unit.iter().map(|&k| k as u32).collect()),
            units,
            features_t: g.features.transposed(),
        }
    }
}

/// Logit noise `log(eta) - log(1 - eta)` for the Gumbel-Max relaxation,
/// sampled fresh for every training forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorNoise {
    pub node: Tensor,
    pub feature: Tensor,
    pub edge: Tensor,
}

impl GeneratorNoise {
    pub fn sample(num_nodes: usize, feature_dim: usize, num_units: usize, rng: &mut impl Rng) -> Self {
        GeneratorNoise {
            node: logit_noise(num_nodes, rng),
            feature: logit_noise(feature_dim, rng),
            edge: logit_noise(num_units, rng),
        }
    }

    /// `eta = 0.5` everywhere (zero logit): the deterministic relaxation used
    /// by gradient checks and frozen-noise tests.
    pub fn frozen_half(num_nodes: usize, feature_dim: usize, num_units: usize) -> Self {
        GeneratorNoise {
            node: Tensor::zeros(num_nodes, 1),
            feature: Tensor::zeros(feature_dim, 1),
            edge: Tensor::zeros(num_units, 1),
        }
    }
}

fn logit_noise(n: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..n)
        .map(|_| {
            let eta: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            eta.ln() - (1.0 - eta).ln()
        })
        .collect();
    Tensor::new(n, 1, data).expect("shape by construction")
}

/// Gumbel-Max relaxation on the tape: `sigmoid((noise + t) / tau)`.
pub fn gumbel_on_tape(tape: &mut Tape, t: Var, tau: f64, noise: &Tensor) -> Result<Var> {
    if tau <= 0.0 {
        return Err(Error::domain("gumbel", "tau must be positive"));
    }
    let nv = tape.constant(noise.clone());
    let shifted = tape.add(t, nv)?;
    let scaled = tape.scale(shifted, 1.0 / tau);
    Ok(tape.sigmoid(scaled))
}

/// Stochastic Gumbel-Max relaxation of `t` (value level).
pub fn gumbel(t: &Tensor, tau: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let noise = gumbel_noise_like(t, rng);
    gumbel_with_noise(t, tau, &noise)
}

/// Deterministic relaxation with injected uniform noise `eta` (same shape).
pub fn gumbel_with_noise(t: &Tensor, tau: f64, eta: &Tensor) -> Result<Tensor> {
    if tau <= 0.0 {
        return Err(Error::domain("gumbel", "tau must be positive"));
    }
    if !t.same_shape(eta) {
        return Err(Error::Shape {
            op: "gumbel",
            left_rows: t.rows,
            left_cols: t.cols,
            right_rows: eta.rows,
            right_cols: eta.cols,
        });
    }
    let data = t
        .data
        .iter()
        .zip(&eta.data)
        .map(|(&tv, &e)| {
            let e = e.clamp(1e-12, 1.0 - 1e-12);
            let z = (e.ln() - (1.0 - e).ln() + tv) / tau;
            1.0 / (1.0 + (-z).exp())
        })
        .collect();
    Tensor::new(t.rows, t.cols, data)
}

fn gumbel_noise_like(t: &Tensor, rng: &mut impl Rng) -> Tensor {
    let data = (0..t.data.len()).map(|_| rng.random::<f64>()).collect();
    Tensor::new(t.rows, t.cols, data).expect("shape by construction")
}

/// Tape handles produced by one importance forward pass.
pub struct ImportanceVars {
    /// Graph features as a tape constant.
    pub x: Var,
    /// `E = relu(A X W)` over the unnormalized, self-loop-free adjacency.
    pub embed: Var,
    /// Raw `h_phi(E)` scores, before any relaxation.
    pub node_scores: Var,
    /// Node importance in (0, 1).
    pub p_n: Var,
    /// Feature importance (F x 1).
    pub p_f: Var,
    /// Edge importance per undirected unit (U x 1), in (0, 1).
    pub p_e_units: Var,
    /// Unit importance materialized on both stored orientations (M x 1).
    pub p_e_directed: Var,
    /// `X (.) broadcast(P_f)`.
    pub x_tilde: Var,
}

/// Builds node, feature, and edge importance plus the reweighted features on
/// the tape. Where the Gumbel relaxation lands depends on the feature mode:
/// one-hot features relax the node scores, unit-interval features relax the
/// feature importance instead (keeping `P_f = X^T h_phi(E)` from shrinking).
pub fn importance_forward(
    tape: &mut Tape,
    bound: &GeneratorBound,
    g: &Graph,
    ctx: &GraphCtx,
    tau: f64,
    noise: &GeneratorNoise,
) -> Result<ImportanceVars> {
    let x = tape.constant(g.features.clone());
    let xw = tape.matmul(x, bound.w)?;
    let ones_w = tape.constant(Tensor::ones(ctx.edges.len(), 1));
    let agg = tape.adj_matmul(ones_w, xw, ctx.edges.clone())?;
    let embed = tape.relu(agg);

    let node_scores = bound.phi.forward(tape, embed)?;
    let xt = tape.constant(ctx.features_t.clone());
    let (p_n, p_f) = match g.feature_mode {
        FeatureMode::BinaryOnehot => {
            let p_n = gumbel_on_tape(tape, node_scores, tau, &noise.node)?;
            let p_f = tape.matmul(xt, p_n)?;
            (p_n, p_f)
        }
        FeatureMode::RealUnitInterval => {
            let p_n = tape.sigmoid(node_scores);
            let raw = tape.matmul(xt, node_scores)?;
            let p_f = gumbel_on_tape(tape, raw, tau, &noise.feature)?;
            (p_n, p_f)
        }
    };

    let src = tape.gather_rows(embed, ctx.unit_src.clone())?;
    let dst = tape.gather_rows(embed, ctx.unit_dst.clone())?;
    let pair = tape.concat_cols(src, dst)?;
    let edge_scores = bound.psi.forward(tape, pair)?;
    let p_e_units = gumbel_on_tape(tape, edge_scores, tau, &noise.edge)?;
    let p_e_directed = tape.gather_rows(p_e_units, ctx.dir_to_unit.clone())?;

    let p_f_row = tape.transpose(p_f);
    let x_tilde = tape.hadamard(x, p_f_row)?;

    Ok(ImportanceVars {
        x,
        embed,
        node_scores,
        p_n,
        p_f,
        p_e_units,
        p_e_directed,
        x_tilde,
    })
}

/// Adversary encoder + projection: GCN layers over the given edge weights
/// (relu between layers, linear output), then the projection MLP.
pub fn adversary_forward(
    tape: &mut Tape,
    bound: &GeneratorBound,
    ctx: &GraphCtx,
    x: Var,
    edge_weights: Var,
) -> Result<Var> {
    let mut h = x;
    for (i, layer) in bound.theta.iter().enumerate() {
        let hw = tape.matmul(h, layer.w)?;
        let agg = tape.adj_matmul(edge_weights, hw, ctx.edges.clone())?;
        h = match layer.b {
            Some(b) => tape.add(agg, b)?,
            None => agg,
        };
        if i + 1 < bound.theta.len() {
            h = tape.relu(h);
        }
    }
    bound.xi.forward(tape, h)
}

/// Unscaled importance-mass regularizer `R = sum(P_f)/F + sum(P_e)/M`
/// (the caller applies `lambda`). Per-unit and per-directed-entry means of
/// `P_e` coincide because both orientations share one value.
pub fn regularizer_on_tape(tape: &mut Tape, p_f: Var, p_e_units: Var) -> Result<Var> {
    let mf = tape.mean(p_f)?;
    let me = tape.mean(p_e_units)?;
    tape.add(mf, me)
}

/// Value-level regularizer for tests and diagnostics.
pub fn regularizer(p_f: &Tensor, p_e: &Tensor) -> Result<f64> {
    if p_f.data.is_empty() || p_e.data.is_empty() {
        return Err(Error::domain("regularizer", "empty importance vector"));
    }
    Ok(p_f.mean() + p_e.mean())
}

/// One full generator loss evaluation on the tape.
pub struct GeneratorForward {
    pub imp: ImportanceVars,
    /// InfoNCE estimate between projected embeddings of `G` and `G-tilde`.
    pub i_hat: Var,
    /// Unscaled regularizer.
    pub reg: Var,
}

pub fn generator_forward(
    tape: &mut Tape,
    bound: &GeneratorBound,
    g: &Graph,
    ctx: &GraphCtx,
    cfg: &GeneratorConfig,
    noise: &GeneratorNoise,
) -> Result<GeneratorForward> {
    let imp = importance_forward(tape, bound, g, ctx, cfg.tau, noise)?;
    let ones_w = tape.constant(Tensor::ones(ctx.edges.len(), 1));
    let z1 = adversary_forward(tape, bound, ctx, imp.x, ones_w)?;
    let z2 = adversary_forward(tape, bound, ctx, imp.x_tilde, imp.p_e_directed)?;
    let i_hat = infonce(
        tape,
        z1,
        z2,
        cfg.eps,
        cfg.include_positive_in_denominator,
    )?;
    let reg = regularizer_on_tape(tape, imp.p_f, imp.p_e_units)?;
    Ok(GeneratorForward { imp, i_hat, reg })
}

/// The importance graph: learned importances plus the reweighted graph.
#[derive(Debug, Clone)]
pub struct ImportanceGraph {
    /// Node importance, N x 1.
    pub p_n: Tensor,
    /// Feature importance, F x 1.
    pub p_f: Tensor,
    /// Edge importance per stored directed entry, M x 1; both orientations
    /// of an undirected pair carry one shared value.
    pub p_e: Tensor,
    /// Dense adjacency with edge values replaced by `P_e`.
    pub a_tilde: Tensor,
    /// Features reweighted by the broadcast feature importance.
    pub x_tilde: Tensor,
}

/// Assembles the importance graph with noise drawn from `rng`.
pub fn build_importance_graph(
    g: &Graph,
    state: &GeneratorState,
    cfg: &GeneratorConfig,
    rng: &mut impl Rng,
) -> Result<ImportanceGraph> {
    let ctx = GraphCtx::new(g);
    let noise = GeneratorNoise::sample(g.num_nodes, g.feature_dim(), ctx.units.len(), rng);
    build_importance_graph_with_noise(g, state, cfg, &ctx, &noise)
}

/// Deterministic assembly with injected noise (evaluation path and tests).
pub fn build_importance_graph_with_noise(
    g: &Graph,
    state: &GeneratorState,
    cfg: &GeneratorConfig,
    ctx: &GraphCtx,
    noise: &GeneratorNoise,
) -> Result<ImportanceGraph> {
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape);
    let imp = importance_forward(&mut tape, &bound, g, ctx, cfg.tau, noise)?;
    let p_e = tape.value(imp.p_e_directed).clone();
    let n = g.num_nodes;
    let mut a_tilde = Tensor::zeros(n, n);
    for (k, &(u, v)) in ctx.edges.iter().enumerate() {
        a_tilde.data[u as usize * n + v as usize] = p_e.data[k];
    }
    Ok(ImportanceGraph {
        p_n: tape.value(imp.p_n).clone(),
        p_f: tape.value(imp.p_f).clone(),
        p_e,
        a_tilde,
        x_tilde: tape.value(imp.x_tilde).clone(),
    })
}

/// `E = relu(A X W)` with the unnormalized, self-loop-free adjacency.
pub fn gcn_embed_raw(g: &Graph, w: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(g.features.clone());
    let wv = tape.constant(w.clone());
    let xw = tape.matmul(x, wv)?;
    let edges = Arc::new(g.edges.clone());
    let ones_w = tape.constant(Tensor::ones(edges.len(), 1));
    let agg = tape.adj_matmul(ones_w, xw, edges)?;
    let e = tape.relu(agg);
    Ok(tape.value(e).clone())
}
