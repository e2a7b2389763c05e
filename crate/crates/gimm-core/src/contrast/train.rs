//! Training loops for the view-comparison module and downstream embedding
//! extraction.
//!
//! Views are sampled once before the epoch loop (the appendix places the
//! sampling outside it); `resample_views_each_epoch` opts into per-epoch
//! resampling for ablation.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphdata::{batch_disjoint_union, Graph, GraphDataset};
use crate::nn::{mlp_vars, pull_grads};
use crate::tensor::{AdamState, Tape, Tensor};
use crate::viewgen::{
    infonce, sample_view_pair_salted, GeneratorConfig, GeneratorState, SamplingImportance,
    ViewSamplerConfig,
};

use super::{
    gcn_forward, gin_forward, readout_sum, BoundAdjacency, ContrastConfig, EmbeddingCombination,
    GraphEncoder, NodeEncoder, ProjectionHead,
};

/// Produces the view pair for graph `index`; `salt` varies per epoch when
/// views are resampled.
pub type ViewPairFn<'a> = dyn Fn(u64, u64) -> Result<(Graph, Graph)> + Sync + 'a;

#[derive(Debug, Clone, serde::Serialize)]
pub struct ContrastLogRow {
    pub epoch: usize,
    pub i_hat: f64,
    pub loss: f64,
}

#[derive(Debug)]
pub struct ContrastTrainResult<E> {
    pub encoder: E,
    pub head: ProjectionHead,
    pub log: Vec<ContrastLogRow>,
}

/// View provider backed by a trained generator: importance is computed once
/// per graph under the sampler's evaluation seed.
pub fn generator_views<'a>(
    gen_state: &'a GeneratorState,
    gen_cfg: &'a GeneratorConfig,
    sampler: &'a ViewSamplerConfig,
) -> impl Fn(&Graph, u64, u64) -> Result<(Graph, Graph)> + Sync + 'a {
    move |g, index, salt| {
        let imp = SamplingImportance::from_state(g, gen_state, gen_cfg, sampler.seed, index)?;
        sample_view_pair_salted(g, &imp, sampler, index, salt)
    }
}

pub fn train_node_contrast(
    g: &Graph,
    gen_state: &GeneratorState,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    cfg: &ContrastConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastTrainResult<NodeEncoder>> {
    let provider = generator_views(gen_state, gen_cfg, sampler);
    train_node_contrast_with(g, &|index, salt| provider(g, index, salt), cfg, rng)
}

pub fn train_node_contrast_with(
    g: &Graph,
    views: &ViewPairFn<'_>,
    cfg: &ContrastConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastTrainResult<NodeEncoder>> {
    cfg.validate()?;
    let mut encoder = NodeEncoder::init(g.feature_dim(), cfg, rng)?;
    let mut head = ProjectionHead::init(cfg.embed_dim, cfg.head_layers, rng)?;
    let mut adam = AdamState::new(cfg.lr);
    let mut log = Vec::with_capacity(cfg.epochs);

    let (mut v1, mut v2) = views(0, 0)?;
    for epoch in 0..cfg.epochs {
        if cfg.resample_views_each_epoch && epoch > 0 {
            let pair = views(0, epoch as u64)?;
            v1 = pair.0;
            v2 = pair.1;
        }
        let mut tape = Tape::new();
        let enc = encoder.bind(&mut tape);
        let head_b = head.bind(&mut tape);

        let adj1 = BoundAdjacency::normalized(&mut tape, &v1)?;
        let x1 = tape.constant(v1.features.clone());
        let h1 = enc.forward(&mut tape, &adj1, x1)?;
        let z1 = head_b.forward(&mut tape, h1)?;

        let adj2 = BoundAdjacency::normalized(&mut tape, &v2)?;
        let x2 = tape.constant(v2.features.clone());
        let h2 = enc.forward(&mut tape, &adj2, x2)?;
        let z2 = head_b.forward(&mut tape, h2)?;

        let i_hat = infonce(
            &mut tape,
            z1,
            z2,
            cfg.eps,
            cfg.include_positive_in_denominator,
        )?;
        let i_val = tape.value(i_hat).item()?;
        if !i_val.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let loss = tape.neg(i_hat);
        tape.backward(loss)?;

        let mut vars = enc.vars();
        vars.extend(mlp_vars(&head_b));
        let mut params = encoder.params_mut();
        params.extend(head.params_mut());
        pull_grads(&tape, &vars, &mut params)?;
        let mut params = encoder.params_mut();
        params.extend(head.params_mut());
        adam.step(&mut params)?;

        log.push(ContrastLogRow {
            epoch,
            i_hat: i_val,
            loss: -i_val,
        });
    }
    Ok(ContrastTrainResult {
        encoder,
        head,
        log,
    })
}

pub fn train_graph_contrast(
    dataset: &GraphDataset,
    gen_state: &GeneratorState,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    cfg: &ContrastConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastTrainResult<GraphEncoder>> {
    let provider = generator_views(gen_state, gen_cfg, sampler);
    train_graph_contrast_with(
        dataset,
        &|index, salt| provider(&dataset.graphs[index as usize], index, salt),
        cfg,
        rng,
    )
}

pub fn train_graph_contrast_with(
    dataset: &GraphDataset,
    views: &ViewPairFn<'_>,
    cfg: &ContrastConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastTrainResult<GraphEncoder>> {
    cfg.validate()?;
    if cfg.batch_size < 2 {
        return Err(Error::contract(
            "train_graph_contrast",
            "batch_size must be at least 2 (InfoNCE needs in-batch negatives)",
        ));
    }
    if dataset.len() < 2 {
        return Err(Error::contract(
            "train_graph_contrast",
            "need at least 2 graphs",
        ));
    }
    let feature_dim = dataset.graphs[0].feature_dim();
    let mut encoder = GraphEncoder::init(feature_dim, cfg, rng)?;
    let mut head = ProjectionHead::init(cfg.embed_dim, cfg.head_layers, rng)?;
    let mut adam = AdamState::new(cfg.lr);
    let mut log = Vec::with_capacity(cfg.epochs);

    // views for every graph, sampled before the epoch loop
    let mut pairs: Vec<(Graph, Graph)> = (0..dataset.len())
        .map(|i| views(i as u64, 0))
        .collect::<Result<_>>()?;

    for epoch in 0..cfg.epochs {
        if cfg.resample_views_each_epoch && epoch > 0 {
            pairs = (0..dataset.len())
                .map(|i| views(i as u64, epoch as u64))
                .collect::<Result<_>>()?;
        }
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        idx.shuffle(rng);
        // fold a trailing singleton into the final batch
        let mut batches: Vec<Vec<usize>> = idx.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect();
        if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(last);
        }

        let mut epoch_i = 0.0;
        for batch in &batches {
            let g1s: Vec<&Graph> = batch.iter().map(|&i| &pairs[i].0).collect();
            let g2s: Vec<&Graph> = batch.iter().map(|&i| &pairs[i].1).collect();
            let (u1, map1) = batch_disjoint_union(&g1s)?;
            let (u2, map2) = batch_disjoint_union(&g2s)?;

            let mut tape = Tape::new();
            let enc = encoder.bind(&mut tape);
            let head_b = head.bind(&mut tape);

            let adj1 = BoundAdjacency::plain(&mut tape, &u1);
            let x1 = tape.constant(u1.features.clone());
            let h1 = enc.forward(&mut tape, &adj1, x1)?;
            let p1 = head_b.forward(&mut tape, h1)?;
            let z1 = tape.segment_sum(p1, std::sync::Arc::new(map1), batch.len())?;

            let adj2 = BoundAdjacency::plain(&mut tape, &u2);
            let x2 = tape.constant(u2.features.clone());
            let h2 = enc.forward(&mut tape, &adj2, x2)?;
            let p2 = head_b.forward(&mut tape, h2)?;
            let z2 = tape.segment_sum(p2, std::sync::Arc::new(map2), batch.len())?;

            let i_hat = infonce(
                &mut tape,
                z1,
                z2,
                cfg.eps,
                cfg.include_positive_in_denominator,
            )?;
            let i_val = tape.value(i_hat).item()?;
            if !i_val.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let loss = tape.neg(i_hat);
            tape.backward(loss)?;

            let mut vars = enc.vars();
            vars.extend(mlp_vars(&head_b));
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            pull_grads(&tape, &vars, &mut params)?;
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            adam.step(&mut params)?;
            epoch_i += i_val;
        }
        let i_hat = epoch_i / batches.len() as f64;
        log.push(ContrastLogRow {
            epoch,
            i_hat,
            loss: -i_hat,
        });
    }
    Ok(ContrastTrainResult {
        encoder,
        head,
        log,
    })
}

/// Downstream node embeddings: views are regenerated under the sampler's
/// evaluation seed and combined; the projection head is bypassed.
pub fn embed_nodes(
    g: &Graph,
    gen_state: &GeneratorState,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    encoder: &NodeEncoder,
    combination: EmbeddingCombination,
) -> Result<Tensor> {
    let imp = SamplingImportance::from_state(g, gen_state, gen_cfg, sampler.seed, 0)?;
    let (v1, v2) = sample_view_pair_salted(g, &imp, sampler, 0, 0)?;
    embed_nodes_views(g, &v1, &v2, encoder, combination)
}

/// Combination step on explicit views (ablation overrides use this).
pub fn embed_nodes_views(
    g: &Graph,
    v1: &Graph,
    v2: &Graph,
    encoder: &NodeEncoder,
    combination: EmbeddingCombination,
) -> Result<Tensor> {
    let e1 = gcn_forward(v1, encoder)?;
    let e2 = gcn_forward(v2, encoder)?;
    let mut out = Tensor::zeros(e1.rows, e1.cols);
    for i in 0..out.data.len() {
        out.data[i] = e1.data[i] + e2.data[i];
    }
    if combination == EmbeddingCombination::ViewsPlusDoubleOriginal {
        let e0 = gcn_forward(g, encoder)?;
        for i in 0..out.data.len() {
            out.data[i] += 2.0 * e0.data[i];
        }
    }
    Ok(out)
}

/// Downstream graph embeddings: sum readout of the encoder on the original
/// graphs; no views, no projection head.
pub fn embed_graphs(dataset: &GraphDataset, encoder: &GraphEncoder) -> Result<Tensor> {
    let d = encoder.output_dim();
    let mut out = Tensor::zeros(dataset.len(), d);
    for (i, g) in dataset.graphs.iter().enumerate() {
        let h = gin_forward(g, encoder)?;
        let r = readout_sum(&h, &vec![0u32; g.num_nodes], 1)?;
        out.data[i * d..(i + 1) * d].copy_from_slice(&r.data);
    }
    Ok(out)
}

/// Embedding export: `id,dim_0,...,dim_{d-1}`, full-precision values.
pub fn write_embeddings_csv(path: impl AsRef<Path>, embs: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::from("id");
    for c in 0..embs.cols {
        body.push_str(&format!(",dim_{c}"));
    }
    body.push('\n');
    for r in 0..embs.rows {
        body.push_str(&r.to_string());
        for v in embs.row(r) {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
