//! Stochastic view sampling from learned importances.
//!
//! Drop/mask probabilities follow the truncated GCA-style rescaling
//! `min(((max - p) / (max - avg)) * p_s, p_t)`, so the most important
//! element is never dropped and everything keeps at least `1 - p_t` chance
//! of surviving. Bernoulli draws then pick edges (per undirected pair) and
//! feature dimensions (one mask bit per column, broadcast over nodes).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::Graph;
use crate::rng as seedstream;

use super::{GeneratorConfig, GeneratorState, GraphCtx};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewSamplerConfig {
    /// Edge-drop scale, one value per view.
    pub p_s1: (f64, f64),
    /// Feature-mask scale, one value per view.
    pub p_s2: (f64, f64),
    /// Truncation cap on every drop/mask probability.
    pub p_t: f64,
    pub seed: u64,
}

impl Default for ViewSamplerConfig {
    fn default() -> Self {
        ViewSamplerConfig {
            p_s1: (0.3, 0.4),
            p_s2: (0.2, 0.3),
            p_t: 0.7,
            seed: 0,
        }
    }
}

impl ViewSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for v in [self.p_s1.0, self.p_s1.1, self.p_s2.0, self.p_s2.1, self.p_t] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "sampler rates must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Truncated drop probabilities from an importance vector.
///
/// When the vector is (numerically) constant, `max - avg` degenerates; the
/// ratio is then defined as 1 everywhere, which reduces to uniform random
/// augmentation at rate `min(p_s, p_t)`.
pub fn edge_drop_probs(importance: &[f64], p_s: f64, p_t: f64) -> Result<Vec<f64>> {
    if importance.is_empty() {
        return Err(Error::contract("edge_drop_probs", "empty importance vector"));
    }
    if !(0.0..=1.0).contains(&p_s) || !(0.0..=1.0).contains(&p_t) {
        return Err(Error::domain(
            "edge_drop_probs",
            format!("rates must lie in [0, 1], got p_s={p_s}, p_t={p_t}"),
        ));
    }
    let max = importance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = importance.iter().sum::<f64>() / importance.len() as f64;
    let span = max - avg;
    Ok(importance
        .iter()
        .map(|&p| {
            let ratio = if span < 1e-12 { 1.0 } else { (max - p) / span };
            (ratio * p_s).min(p_t)
        })
        .collect())
}

/// Same formula applied to feature importance.
pub fn feature_mask_probs(importance: &[f64], p_s: f64, p_t: f64) -> Result<Vec<f64>> {
    edge_drop_probs(importance, p_s, p_t)
}

/// One Bernoulli view: undirected pairs are kept or dropped as a unit and
/// whole feature columns are zeroed; the node set is unchanged.
///
/// `p_drop_edges` is indexed by the graph's canonical undirected units and
/// `p_mask_features` by feature dimension.
pub fn sample_view(
    g: &Graph,
    p_drop_edges: &[f64],
    p_mask_features: &[f64],
    rng: &mut impl Rng,
) -> Result<Graph> {
    let (units, dir_to_unit) = g.unit_index();
    if p_drop_edges.len() != units.len() {
        return Err(Error::contract(
            "sample_view",
            format!(
                "{} drop probabilities for {} undirected units",
                p_drop_edges.len(),
                units.len()
            ),
        ));
    }
    if p_mask_features.len() != g.feature_dim() {
        return Err(Error::contract(
            "sample_view",
            format!(
                "{} mask probabilities for {} features",
                p_mask_features.len(),
                g.feature_dim()
            ),
        ));
    }
    let keep_unit: Vec<bool> = p_drop_edges
        .iter()
        .map(|&p| rng.random_bool((1.0 - p).clamp(0.0, 1.0)))
        .collect();
    let edges: Vec<(u32, u32)> = g
        .edges
        .iter()
        .zip(&dir_to_unit)
        .filter(|(_, &unit)| keep_unit[unit])
        .map(|(&e, _)| e)
        .collect();

    let keep_feature: Vec<bool> = p_mask_features
        .iter()
        .map(|&p| rng.random_bool((1.0 - p).clamp(0.0, 1.0)))
        .collect();
    let mut features = g.features.clone();
    for r in 0..features.rows {
        for (c, &keep) in keep_feature.iter().enumerate() {
            if !keep {
                features.data[r * features.cols + c] = 0.0;
            }
        }
    }

    let mut view = Graph::new(g.num_nodes, edges, features, g.feature_mode)?;
    view.node_labels = g.node_labels.clone();
    view.graph_label = g.graph_label;
    Ok(view)
}

/// Importance vectors in sampling form: one value per undirected unit and
/// one per feature dimension.
#[derive(Debug, Clone)]
pub struct SamplingImportance {
    pub edge_units: Vec<f64>,
    pub features: Vec<f64>,
}

impl SamplingImportance {
    /// Importance from a trained generator, computed once under a noise
    /// stream derived from `(eval_seed, graph_index)` so repeated calls see
    /// the same importance graph.
    pub fn from_state(
        g: &Graph,
        state: &GeneratorState,
        cfg: &GeneratorConfig,
        eval_seed: u64,
        graph_index: u64,
    ) -> Result<Self> {
        let ctx = GraphCtx::new(g);
        let mut noise_rng = seedstream::substream(eval_seed, "view-noise", graph_index);
        let noise = super::GeneratorNoise::sample(
            g.num_nodes,
            g.feature_dim(),
            ctx.units.len(),
            &mut noise_rng,
        );
        let mut tape = crate::tensor::Tape::new();
        let bound = state.bind(&mut tape);
        let imp = super::importance_forward(&mut tape, &bound, g, &ctx, cfg.tau, &noise)?;
        Ok(SamplingImportance {
            edge_units: tape.value(imp.p_e_units).data.clone(),
            features: tape.value(imp.p_f).data.clone(),
        })
    }

    /// Constant importance (the uniform-augmentation ablation).
    pub fn uniform(g: &Graph, value: f64) -> Self {
        SamplingImportance {
            edge_units: vec![value; g.undirected_units().len()],
            features: vec![value; g.feature_dim()],
        }
    }

    pub fn with_uniform_edges(mut self, value: f64) -> Self {
        self.edge_units = vec![value; self.edge_units.len()];
        self
    }

    pub fn with_uniform_features(mut self, value: f64) -> Self {
        self.features = vec![value; self.features.len()];
        self
    }

    /// Mean of the regularized importance mass, for diagnostics.
    pub fn mass(&self) -> f64 {
        let e = self.edge_units.iter().sum::<f64>() / self.edge_units.len().max(1) as f64;
        let f = self.features.iter().sum::<f64>() / self.features.len().max(1) as f64;
        e + f
    }
}

/// Samples the two views from fixed importance, with independent per-view
/// RNG streams derived from `(seed, graph_index)`.
pub fn sample_view_pair(
    g: &Graph,
    imp: &SamplingImportance,
    sampler: &ViewSamplerConfig,
    graph_index: u64,
) -> Result<(Graph, Graph)> {
    sample_view_pair_salted(g, imp, sampler, graph_index, 0)
}

/// As [`sample_view_pair`] but salting the RNG streams, so callers that
/// resample views per epoch get fresh draws deterministically.
pub fn sample_view_pair_salted(
    g: &Graph,
    imp: &SamplingImportance,
    sampler: &ViewSamplerConfig,
    graph_index: u64,
    salt: u64,
) -> Result<(Graph, Graph)> {
    sampler.validate()?;
    // an edgeless graph has nothing to drop
    let probs = |vals: &[f64], p_s: f64| -> Result<Vec<f64>> {
        if vals.is_empty() {
            Ok(Vec::new())
        } else {
            edge_drop_probs(vals, p_s, sampler.p_t)
        }
    };
    let drop1 = probs(&imp.edge_units, sampler.p_s1.0)?;
    let mask1 = feature_mask_probs(&imp.features, sampler.p_s2.0, sampler.p_t)?;
    let mut rng1 = seedstream::substream(sampler.seed, &format!("view1:{salt}"), graph_index);
    let v1 = sample_view(g, &drop1, &mask1, &mut rng1)?;

    let drop2 = probs(&imp.edge_units, sampler.p_s1.1)?;
    let mask2 = feature_mask_probs(&imp.features, sampler.p_s2.1, sampler.p_t)?;
    let mut rng2 = seedstream::substream(sampler.seed, &format!("view2:{salt}"), graph_index);
    let v2 = sample_view(g, &drop2, &mask2, &mut rng2)?;
    Ok((v1, v2))
}

/// Builds one importance graph (frozen evaluation noise) and samples two
/// independent views from it.
pub fn generate_view_pair(
    g: &Graph,
    state: &GeneratorState,
    cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    graph_index: u64,
) -> Result<(Graph, Graph)> {
    let imp = SamplingImportance::from_state(g, state, cfg, sampler.seed, graph_index)?;
    sample_view_pair(g, &imp, sampler, graph_index)
}
