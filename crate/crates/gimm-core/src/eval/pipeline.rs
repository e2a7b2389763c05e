//! Full evaluation pipelines: representations are learned once per run on
//! the unlabeled dataset, then a classifier is cross-validated on the frozen
//! embeddings. Runs use seeds `master_seed + {0..runs-1}` and are
//! embarrassingly parallel (`jobs`); every random decision flows through
//! named sub-streams of the run seed, so results do not depend on `jobs`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::{
    embed_graphs, embed_nodes_views, train_graph_contrast_with, train_node_contrast_with,
    BoundAdjacency, ContrastConfig, GraphEncoder, NodeEncoder, ProjectionHead,
};
use crate::error::{Error, Result};
use crate::graphdata::{
    batch_disjoint_union, kfold_split, node_split, normalized_adjacency_edges, Graph,
    GraphDataset, Task,
};
use crate::nn::{mlp_vars, pull_grads};
use crate::rng as seedstream;
use crate::tensor::{AdamState, Tape, Tensor, Var};
use crate::viewgen::{
    importance_forward, infonce, regularizer_on_tape, sample_view_pair_salted, train_generator,
    train_generator_ext, AdversaryMode, GeneratorConfig, GeneratorNoise, GeneratorState, GraphCtx,
    SamplingImportance, ViewSamplerConfig,
};

use super::report::{EvalReport, FoldResult};
use super::{accuracy, grid_search_c, predict_logreg, predict_svm, select_rows, train_logreg, LogRegConfig};

/// Constant importance used by the uniform ablations; combined with the
/// degenerate-ratio rule this reduces to plain random augmentation at rate
/// `min(p_s, p_t)`.
pub const UNIFORM_IMPORTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationVariant {
    Full,
    /// Uniform edge and feature importance; the generator never trains.
    Uni,
    /// Uniform edge importance, learned feature importance.
    Feat,
    /// Uniform feature importance, learned edge importance.
    Edge,
    /// Parameterless importance GCN (`W = I`).
    Simp,
    /// Max-max optimization: the adversary also maximizes the MI estimate.
    ViewM,
    /// Generator and comparison module trained in one loop, with the
    /// comparison encoder serving as the generator's adversary encoder.
    Simult,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 7] = [
        AblationVariant::Full,
        AblationVariant::Uni,
        AblationVariant::Feat,
        AblationVariant::Edge,
        AblationVariant::Simp,
        AblationVariant::ViewM,
        AblationVariant::Simult,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::Uni => "uni",
            AblationVariant::Feat => "feat",
            AblationVariant::Edge => "edge",
            AblationVariant::Simp => "simp",
            AblationVariant::ViewM => "viewm",
            AblationVariant::Simult => "simult",
        }
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown ablation variant {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub generator: GeneratorConfig,
    pub sampler: ViewSamplerConfig,
    pub contrast: ContrastConfig,
    pub logreg: LogRegConfig,
    /// Subgradient iterations per SVM fit.
    pub svm_iters: usize,
    /// Full pipeline repetitions (seeds `master_seed..master_seed+runs`).
    pub runs: usize,
    pub kfolds: usize,
    pub node_ratios: (f64, f64, f64),
    /// Run-level parallelism; 1 keeps everything on one thread.
    pub jobs: usize,
    pub master_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            generator: GeneratorConfig::default(),
            sampler: ViewSamplerConfig::default(),
            contrast: ContrastConfig::default(),
            logreg: LogRegConfig::default(),
            svm_iters: 800,
            runs: 5,
            kfolds: 10,
            node_ratios: (0.8, 0.1, 0.1),
            jobs: 1,
            master_seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Per-run copies with every seed field pinned to the run seed.
    fn seeded(&self, run_seed: u64) -> (GeneratorConfig, ViewSamplerConfig, ContrastConfig) {
        let mut g = self.generator.clone();
        g.seed = run_seed;
        let mut s = self.sampler.clone();
        s.seed = run_seed;
        let mut c = self.contrast.clone();
        c.seed = run_seed;
        (g, s, c)
    }
}

/// Standard unsupervised evaluation: 10-fold CV of an SVM on frozen graph
/// embeddings, aggregated over runs.
pub fn kfold_evaluate(dataset: &GraphDataset, cfg: &PipelineConfig) -> Result<EvalReport> {
    evaluate_variant(dataset, AblationVariant::Full, cfg)
}

/// Node-task evaluation: logistic regression on frozen node embeddings over
/// train/test/val node splits, aggregated over runs.
pub fn node_split_evaluate(dataset: &GraphDataset, cfg: &PipelineConfig) -> Result<EvalReport> {
    evaluate_variant(dataset, AblationVariant::Full, cfg)
}

/// Evaluation under one generator ablation.
pub fn run_ablation(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    evaluate_variant(dataset, variant, cfg)
}

fn evaluate_variant(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    dataset.validate()?;
    let start = Instant::now();
    let run_indices: Vec<usize> = (0..cfg.runs).collect();
    let run_one = |run: &usize| -> Result<Vec<FoldResult>> {
        let run_seed = cfg.master_seed.wrapping_add(*run as u64);
        match dataset.task {
            Task::GraphClassification => graph_run(dataset, variant, cfg, *run, run_seed),
            Task::NodeClassification => node_run(dataset, variant, cfg, *run, run_seed),
        }
    };
    let collected: Result<Vec<Vec<FoldResult>>> = if cfg.jobs <= 1 {
        run_indices.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| run_indices.par_iter().map(run_one).collect())
    };
    let per_fold: Vec<FoldResult> = collected?.into_iter().flatten().collect();
    let mut echo = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    echo["variant"] = serde_json::json!(variant.name());
    echo["dataset"] = serde_json::json!(dataset.name);
    Ok(EvalReport::from_folds(
        per_fold,
        cfg.runs,
        start.elapsed().as_secs_f64(),
        echo,
    ))
}

// ── graph task ──────────────────────────────────────────────────────────

fn graph_run(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
    run: usize,
    run_seed: u64,
) -> Result<Vec<FoldResult>> {
    let embs = graph_embeddings(dataset, variant, cfg, run_seed)?;
    let labels: Vec<usize> = dataset
        .graphs
        .iter()
        .map(|g| g.graph_label.expect("validated graph task"))
        .collect();
    let folds = kfold_split(
        dataset,
        cfg.kfolds,
        &mut seedstream::stream(run_seed, "folds"),
    )?;
    let mut out = Vec::with_capacity(cfg.kfolds);
    for fold in 0..folds.k() {
        let (train_idx, test_idx) = folds.train_test(fold);
        let tr = select_rows(&embs, &train_idx);
        let tr_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let te = select_rows(&embs, &test_idx);
        let te_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        let mut svm_rng = seedstream::stream(run_seed, &format!("svm:{fold}"));
        let (model, chosen_c) = grid_search_c(
            &tr,
            &tr_labels,
            dataset.num_classes,
            cfg.svm_iters,
            &mut svm_rng,
        )?;
        let acc = accuracy(&predict_svm(&model, &te)?, &te_labels);
        out.push(FoldResult {
            run,
            fold,
            accuracy: acc,
            chosen_c: Some(chosen_c),
        });
    }
    Ok(out)
}

/// Trains the configured pipeline variant and returns frozen graph
/// embeddings for the whole dataset.
pub fn graph_embeddings(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
    run_seed: u64,
) -> Result<Tensor> {
    let (gen_cfg, sampler, con_cfg) = cfg.seeded(run_seed);
    if variant == AblationVariant::Simult {
        let encoder = simult_graph_encoder(dataset, &gen_cfg, &sampler, &con_cfg, run_seed)?;
        return embed_graphs(dataset, &encoder);
    }
    let state = trained_state(dataset, variant, &gen_cfg, run_seed)?;
    let provider = |i: u64, salt: u64| -> Result<(Graph, Graph)> {
        let g = &dataset.graphs[i as usize];
        let imp = sampling_importance(g, variant, state.as_ref(), &gen_cfg, &sampler, i)?;
        sample_view_pair_salted(g, &imp, &sampler, i, salt)
    };
    let trained = train_graph_contrast_with(
        dataset,
        &provider,
        &con_cfg,
        &mut seedstream::stream(run_seed, "contrast"),
    )?;
    embed_graphs(dataset, &trained.encoder)
}

fn trained_state(
    dataset: &GraphDataset,
    variant: AblationVariant,
    gen_cfg: &GeneratorConfig,
    run_seed: u64,
) -> Result<Option<GeneratorState>> {
    let mut rng = seedstream::stream(run_seed, "generator");
    Ok(match variant {
        AblationVariant::Uni => None,
        AblationVariant::Simp => Some(
            train_generator_ext(dataset, gen_cfg, &mut rng, AdversaryMode::MinimizeMi, true)?
                .state,
        ),
        AblationVariant::ViewM => Some(
            train_generator_ext(dataset, gen_cfg, &mut rng, AdversaryMode::MaximizeMi, false)?
                .state,
        ),
        _ => Some(train_generator(dataset, gen_cfg, &mut rng)?.state),
    })
}

fn sampling_importance(
    g: &Graph,
    variant: AblationVariant,
    state: Option<&GeneratorState>,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    index: u64,
) -> Result<SamplingImportance> {
    match (state, variant) {
        (None, _) => Ok(SamplingImportance::uniform(g, UNIFORM_IMPORTANCE)),
        (Some(s), AblationVariant::Feat) => Ok(SamplingImportance::from_state(
            g, s, gen_cfg, sampler.seed, index,
        )?
        .with_uniform_edges(UNIFORM_IMPORTANCE)),
        (Some(s), AblationVariant::Edge) => Ok(SamplingImportance::from_state(
            g, s, gen_cfg, sampler.seed, index,
        )?
        .with_uniform_features(UNIFORM_IMPORTANCE)),
        (Some(s), _) => SamplingImportance::from_state(g, s, gen_cfg, sampler.seed, index),
    }
}

// ── node task ───────────────────────────────────────────────────────────

fn node_run(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
    run: usize,
    run_seed: u64,
) -> Result<Vec<FoldResult>> {
    let g = &dataset.graphs[0];
    let labels = g.node_labels.as_ref().expect("validated node task");
    let embs = node_embeddings(dataset, variant, cfg, run_seed)?;
    let split = node_split(
        g,
        cfg.node_ratios,
        &mut seedstream::stream(run_seed, "split"),
    )?;
    let tr = select_rows(&embs, &split.train);
    let tr_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let te = select_rows(&embs, &split.test);
    let te_labels: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    let model = train_logreg(&tr, &tr_labels, dataset.num_classes, &cfg.logreg)?;
    let acc = accuracy(&predict_logreg(&model, &te)?, &te_labels);
    Ok(vec![FoldResult {
        run,
        fold: 0,
        accuracy: acc,
        chosen_c: None,
    }])
}

/// Trains the configured pipeline variant and returns frozen node
/// embeddings for the dataset's single graph.
pub fn node_embeddings(
    dataset: &GraphDataset,
    variant: AblationVariant,
    cfg: &PipelineConfig,
    run_seed: u64,
) -> Result<Tensor> {
    let g = &dataset.graphs[0];
    let (gen_cfg, sampler, con_cfg) = cfg.seeded(run_seed);
    if variant == AblationVariant::Simult {
        let encoder = simult_node_encoder(g, &gen_cfg, &sampler, &con_cfg, run_seed)?;
        let imp = SamplingImportance::uniform(g, UNIFORM_IMPORTANCE);
        let (v1, v2) = sample_view_pair_salted(g, &imp, &sampler, 0, 0)?;
        return embed_nodes_views(g, &v1, &v2, &encoder, con_cfg.embedding_combination);
    }
    let state = trained_state(dataset, variant, &gen_cfg, run_seed)?;
    let provider = |_i: u64, salt: u64| -> Result<(Graph, Graph)> {
        let imp = sampling_importance(g, variant, state.as_ref(), &gen_cfg, &sampler, 0)?;
        sample_view_pair_salted(g, &imp, &sampler, 0, salt)
    };
    let trained = train_node_contrast_with(
        g,
        &provider,
        &con_cfg,
        &mut seedstream::stream(run_seed, "contrast"),
    )?;
    let (v1, v2) = provider(0, 0)?;
    embed_nodes_views(g, &v1, &v2, &trained.encoder, con_cfg.embedding_combination)
}

// ── simultaneous training ablation ──────────────────────────────────────

/// Graph-task joint loop: the comparison encoder + head stand in for the
/// generator's adversary. Per batch: the encoder takes the adversary descent
/// step on I-hat, the importance learner its ascent-with-regularizer step,
/// and then the encoder a contrastive step on views sampled from the current
/// importance.
fn simult_graph_encoder(
    dataset: &GraphDataset,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    con_cfg: &ContrastConfig,
    run_seed: u64,
) -> Result<GraphEncoder> {
    let mut rng = seedstream::stream(run_seed, "simult");
    let fdim = dataset.graphs[0].feature_dim();
    let mut gen = GeneratorState::init(fdim, gen_cfg, &mut rng)?;
    let mut encoder = GraphEncoder::init(fdim, con_cfg, &mut rng)?;
    let mut head = ProjectionHead::init(con_cfg.embed_dim, con_cfg.head_layers, &mut rng)?;
    let mut adam_learner = AdamState::new(gen_cfg.lr);
    let mut adam_encoder = AdamState::new(con_cfg.lr);

    for epoch in 0..con_cfg.epochs {
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut rng);
        let mut batches: Vec<Vec<usize>> =
            idx.chunks(con_cfg.batch_size.max(2)).map(<[usize]>::to_vec).collect();
        if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(last);
        }
        for batch in &batches {
            let graphs: Vec<&Graph> = batch.iter().map(|&i| &dataset.graphs[i]).collect();
            let (u, map) = batch_disjoint_union(&graphs)?;
            let ctx = GraphCtx::new(&u);
            let map = Arc::new(map);

            // adversary-role step on the comparison encoder
            {
                let noise =
                    GeneratorNoise::sample(u.num_nodes, u.feature_dim(), ctx.units.len(), &mut rng);
                let mut tape = Tape::new();
                let genb = gen.bind(&mut tape);
                let encb = encoder.bind(&mut tape);
                let headb = head.bind(&mut tape);
                let i_hat = simult_graph_mi(
                    &mut tape, &genb, &encb, &headb, &u, &ctx, &map, batch.len(), gen_cfg, &noise,
                )?;
                if !tape.value(i_hat).is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                tape.backward(i_hat)?;
                let mut vars = encb.vars();
                vars.extend(mlp_vars(&headb));
                let mut params = encoder.params_mut();
                params.extend(head.params_mut());
                pull_grads(&tape, &vars, &mut params)?;
                let mut params = encoder.params_mut();
                params.extend(head.params_mut());
                adam_encoder.step(&mut params)?;
            }

            // importance-learner step
            {
                let noise =
                    GeneratorNoise::sample(u.num_nodes, u.feature_dim(), ctx.units.len(), &mut rng);
                let mut tape = Tape::new();
                let genb = gen.bind(&mut tape);
                let encb = encoder.bind(&mut tape);
                let headb = head.bind(&mut tape);
                let (i_hat, reg) = simult_graph_mi_reg(
                    &mut tape, &genb, &encb, &headb, &u, &ctx, &map, batch.len(), gen_cfg, &noise,
                )?;
                let neg = tape.neg(i_hat);
                let sreg = tape.scale(reg, gen_cfg.lambda);
                let loss = tape.add(neg, sreg)?;
                tape.backward(loss)?;
                let vars = genb.learner_vars(gen.w_frozen);
                pull_grads(&tape, &vars, &mut gen.learner_params_mut())?;
                adam_learner.step(&mut gen.learner_params_mut())?;
            }

            // contrastive step on views from the current importance
            {
                let mut v1s = Vec::with_capacity(batch.len());
                let mut v2s = Vec::with_capacity(batch.len());
                for &i in batch {
                    let g = &dataset.graphs[i];
                    let imp = SamplingImportance::from_state(
                        g, &gen, gen_cfg, sampler.seed, i as u64,
                    )?;
                    let (a, b) =
                        sample_view_pair_salted(g, &imp, sampler, i as u64, epoch as u64)?;
                    v1s.push(a);
                    v2s.push(b);
                }
                let refs1: Vec<&Graph> = v1s.iter().collect();
                let refs2: Vec<&Graph> = v2s.iter().collect();
                let (u1, m1) = batch_disjoint_union(&refs1)?;
                let (u2, m2) = batch_disjoint_union(&refs2)?;
                let mut tape = Tape::new();
                let encb = encoder.bind(&mut tape);
                let headb = head.bind(&mut tape);
                let z1 = contrast_side(&mut tape, &encb, &headb, &u1, &m1, batch.len())?;
                let z2 = contrast_side(&mut tape, &encb, &headb, &u2, &m2, batch.len())?;
                let i_hat = infonce(
                    &mut tape,
                    z1,
                    z2,
                    con_cfg.eps,
                    con_cfg.include_positive_in_denominator,
                )?;
                if !tape.value(i_hat).is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                let loss = tape.neg(i_hat);
                tape.backward(loss)?;
                let mut vars = encb.vars();
                vars.extend(mlp_vars(&headb));
                let mut params = encoder.params_mut();
                params.extend(head.params_mut());
                pull_grads(&tape, &vars, &mut params)?;
                let mut params = encoder.params_mut();
                params.extend(head.params_mut());
                adam_encoder.step(&mut params)?;
            }
        }
    }
    Ok(encoder)
}

fn contrast_side(
    tape: &mut Tape,
    encb: &crate::contrast::GraphEncoderVars,
    headb: &crate::nn::MlpVars,
    union: &Graph,
    map: &[u32],
    num_graphs: usize,
) -> Result<Var> {
    let adj = BoundAdjacency::plain(tape, union);
    let x = tape.constant(union.features.clone());
    let h = encb.forward(tape, &adj, x)?;
    let p = headb.forward(tape, h)?;
    tape.segment_sum(p, Arc::new(map.to_vec()), num_graphs)
}

#[allow(clippy::too_many_arguments)]
fn simult_graph_mi(
    tape: &mut Tape,
    genb: &crate::viewgen::GeneratorBound,
    encb: &crate::contrast::GraphEncoderVars,
    headb: &crate::nn::MlpVars,
    u: &Graph,
    ctx: &GraphCtx,
    map: &Arc<Vec<u32>>,
    num_graphs: usize,
    gen_cfg: &GeneratorConfig,
    noise: &GeneratorNoise,
) -> Result<Var> {
    let (i_hat, _) =
        simult_graph_mi_reg(tape, genb, encb, headb, u, ctx, map, num_graphs, gen_cfg, noise)?;
    Ok(i_hat)
}

#[allow(clippy::too_many_arguments)]
fn simult_graph_mi_reg(
    tape: &mut Tape,
    genb: &crate::viewgen::GeneratorBound,
    encb: &crate::contrast::GraphEncoderVars,
    headb: &crate::nn::MlpVars,
    u: &Graph,
    ctx: &GraphCtx,
    map: &Arc<Vec<u32>>,
    num_graphs: usize,
    gen_cfg: &GeneratorConfig,
    noise: &GeneratorNoise,
) -> Result<(Var, Var)> {
    let imp = importance_forward(tape, genb, u, ctx, gen_cfg.tau, noise)?;
    // original side
    let adj1 = BoundAdjacency {
        edges: ctx.edges.clone(),
        weights: tape.constant(Tensor::ones(ctx.edges.len(), 1)),
    };
    let h1 = encb.forward(tape, &adj1, imp.x)?;
    let p1 = headb.forward(tape, h1)?;
    let z1 = tape.segment_sum(p1, map.clone(), num_graphs)?;
    // importance side: edge weights are the learned importances
    let adj2 = BoundAdjacency {
        edges: ctx.edges.clone(),
        weights: imp.p_e_directed,
    };
    let h2 = encb.forward(tape, &adj2, imp.x_tilde)?;
    let p2 = headb.forward(tape, h2)?;
    let z2 = tape.segment_sum(p2, map.clone(), num_graphs)?;
    let i_hat = infonce(
        tape,
        z1,
        z2,
        gen_cfg.eps,
        gen_cfg.include_positive_in_denominator,
    )?;
    let reg = regularizer_on_tape(tape, imp.p_f, imp.p_e_units)?;
    Ok((i_hat, reg))
}

/// Node-task joint loop, mirroring [`simult_graph_encoder`] with the GCN
/// encoder. The importance-graph side propagates over the normalized
/// adjacency with non-loop weights scaled by the learned edge importance.
fn simult_node_encoder(
    g: &Graph,
    gen_cfg: &GeneratorConfig,
    sampler: &ViewSamplerConfig,
    con_cfg: &ContrastConfig,
    run_seed: u64,
) -> Result<NodeEncoder> {
    let mut rng = seedstream::stream(run_seed, "simult");
    let fdim = g.feature_dim();
    let mut gen = GeneratorState::init(fdim, gen_cfg, &mut rng)?;
    let mut encoder = NodeEncoder::init(fdim, con_cfg, &mut rng)?;
    let mut head = ProjectionHead::init(con_cfg.embed_dim, con_cfg.head_layers, &mut rng)?;
    let mut adam_learner = AdamState::new(gen_cfg.lr);
    let mut adam_encoder = AdamState::new(con_cfg.lr);
    let ctx = GraphCtx::new(g);

    // split the normalized adjacency into self-loops and real edges so the
    // real-edge weights can be modulated by the learned importance
    let (nedges, nweights) = normalized_adjacency_edges(g)?;
    let mut loops = Vec::new();
    let mut loop_w = Vec::new();
    let mut real = Vec::new();
    let mut real_w = Vec::new();
    let mut real_unit = Vec::new();
    for (&(a, b), &w) in nedges.iter().zip(&nweights) {
        if a == b {
            loops.push((a, b));
            loop_w.push(w);
        } else {
            real.push((a, b));
            real_w.push(w);
            let key = (a.min(b), a.max(b));
            let unit = ctx.units.binary_search(&key).expect("edge in unit set");
            real_unit.push(unit as u32);
        }
    }
    let loops = Arc::new(loops);
    let real = Arc::new(real);
    let real_unit = Arc::new(real_unit);

    for epoch in 0..con_cfg.epochs {
        // adversary-role step on the comparison encoder
        {
            let noise = GeneratorNoise::sample(g.num_nodes, fdim, ctx.units.len(), &mut rng);
            let mut tape = Tape::new();
            let genb = gen.bind(&mut tape);
            let encb = encoder.bind(&mut tape);
            let headb = head.bind(&mut tape);
            let (i_hat, _) = simult_node_mi_reg(
                &mut tape, &genb, &encb, &headb, g, &ctx, gen_cfg, &noise, &loops, &loop_w,
                &real, &real_w, &real_unit,
            )?;
            if !tape.value(i_hat).is_finite() {
                return Err(Error::Divergence { epoch });
            }
            tape.backward(i_hat)?;
            let mut vars = encb.vars();
            vars.extend(mlp_vars(&headb));
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            pull_grads(&tape, &vars, &mut params)?;
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            adam_encoder.step(&mut params)?;
        }
        // importance-learner step
        {
            let noise = GeneratorNoise::sample(g.num_nodes, fdim, ctx.units.len(), &mut rng);
            let mut tape = Tape::new();
            let genb = gen.bind(&mut tape);
            let encb = encoder.bind(&mut tape);
            let headb = head.bind(&mut tape);
            let (i_hat, reg) = simult_node_mi_reg(
                &mut tape, &genb, &encb, &headb, g, &ctx, gen_cfg, &noise, &loops, &loop_w,
                &real, &real_w, &real_unit,
            )?;
            let neg = tape.neg(i_hat);
            let sreg = tape.scale(reg, gen_cfg.lambda);
            let loss = tape.add(neg, sreg)?;
            tape.backward(loss)?;
            let vars = genb.learner_vars(gen.w_frozen);
            pull_grads(&tape, &vars, &mut gen.learner_params_mut())?;
            adam_learner.step(&mut gen.learner_params_mut())?;
        }
        // contrastive step on views from the current importance
        {
            let imp = SamplingImportance::from_state(g, &gen, gen_cfg, sampler.seed, 0)?;
            let (v1, v2) = sample_view_pair_salted(g, &imp, sampler, 0, epoch as u64)?;
            let mut tape = Tape::new();
            let encb = encoder.bind(&mut tape);
            let headb = head.bind(&mut tape);
            let adj1 = BoundAdjacency::normalized(&mut tape, &v1)?;
            let x1 = tape.constant(v1.features.clone());
            let h1 = encb.forward(&mut tape, &adj1, x1)?;
            let z1 = headb.forward(&mut tape, h1)?;
            let adj2 = BoundAdjacency::normalized(&mut tape, &v2)?;
            let x2 = tape.constant(v2.features.clone());
            let h2 = encb.forward(&mut tape, &adj2, x2)?;
            let z2 = headb.forward(&mut tape, h2)?;
            let i_hat = infonce(
                &mut tape,
                z1,
                z2,
                con_cfg.eps,
                con_cfg.include_positive_in_denominator,
            )?;
            if !tape.value(i_hat).is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let loss = tape.neg(i_hat);
            tape.backward(loss)?;
            let mut vars = encb.vars();
            vars.extend(mlp_vars(&headb));
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            pull_grads(&tape, &vars, &mut params)?;
            let mut params = encoder.params_mut();
            params.extend(head.params_mut());
            adam_encoder.step(&mut params)?;
        }
    }
    Ok(encoder)
}

#[allow(clippy::too_many_arguments)]
fn simult_node_mi_reg(
    tape: &mut Tape,
    genb: &crate::viewgen::GeneratorBound,
    encb: &crate::contrast::NodeEncoderVars,
    headb: &crate::nn::MlpVars,
    g: &Graph,
    ctx: &GraphCtx,
    gen_cfg: &GeneratorConfig,
    noise: &GeneratorNoise,
    loops: &Arc<Vec<(u32, u32)>>,
    loop_w: &[f64],
    real: &Arc<Vec<(u32, u32)>>,
    real_w: &[f64],
    real_unit: &Arc<Vec<u32>>,
) -> Result<(Var, Var)> {
    let imp = importance_forward(tape, genb, g, ctx, gen_cfg.tau, noise)?;

    // original side: plain normalized propagation
    let adj1 = BoundAdjacency::normalized(tape, g)?;
    let h1 = encb.forward(tape, &adj1, imp.x)?;
    let z1 = headb.forward(tape, h1)?;

    // importance side: relu(loops(HW) + importance-weighted real edges(HW))
    let loop_w_v = tape.constant(Tensor::new(loop_w.len(), 1, loop_w.to_vec())?);
    let real_w_v = tape.constant(Tensor::new(real_w.len(), 1, real_w.to_vec())?);
    let imp_on_real = tape.gather_rows(imp.p_e_units, real_unit.clone())?;
    let weighted = tape.hadamard(real_w_v, imp_on_real)?;
    let mut h = imp.x_tilde;
    for (i, layer) in encb.layers.iter().enumerate() {
        let hw = tape.matmul(h, layer.w)?;
        let self_part = tape.adj_matmul(loop_w_v, hw, loops.clone())?;
        let nbr_part = tape.adj_matmul(weighted, hw, real.clone())?;
        let agg = tape.add(self_part, nbr_part)?;
        h = match layer.b {
            Some(b) => tape.add(agg, b)?,
            None => agg,
        };
        if i + 1 < encb.layers.len() {
            h = tape.relu(h);
        }
    }
    let z2 = headb.forward(tape, h)?;

    let i_hat = infonce(
        tape,
        z1,
        z2,
        gen_cfg.eps,
        gen_cfg.include_positive_in_denominator,
    )?;
    let reg = regularizer_on_tape(tape, imp.p_f, imp.p_e_units)?;
    Ok((i_hat, reg))
}

// ── sensitivity sweep ───────────────────────────────────────────────────

/// Mean-accuracy matrix over the `(p_s1, p_s2)` cross product, both views
/// sharing each grid value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    /// `means[i][j]` is the mean accuracy at `p_s1 = grid[i], p_s2 = grid[j]`.
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

impl SweepReport {
    /// CSV matrix: `p_s1` rows, `p_s2` columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_s1\\p_s2");
        for v in &self.grid {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        for (i, v) in self.grid.iter().enumerate() {
            out.push_str(&v.to_string());
            for j in 0..self.grid.len() {
                out.push_str(&format!(",{}", self.means[i][j]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn sensitivity_sweep(
    dataset: &GraphDataset,
    grid: &[f64],
    cfg: &PipelineConfig,
) -> Result<SweepReport> {
    if grid.is_empty() || grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config("sweep grid values must lie in [0, 1]".into()));
    }
    let mut means = vec![vec![0.0; grid.len()]; grid.len()];
    let mut stds = vec![vec![0.0; grid.len()]; grid.len()];
    for (i, &a) in grid.iter().enumerate() {
        for (j, &b) in grid.iter().enumerate() {
            let mut cell = cfg.clone();
            cell.sampler.p_s1 = (a, a);
            cell.sampler.p_s2 = (b, b);
            let report = evaluate_variant(dataset, AblationVariant::Full, &cell)?;
            means[i][j] = report.mean;
            stds[i][j] = report.std;
        }
    }
    Ok(SweepReport {
        grid: grid.to_vec(),
        means,
        stds,
    })
}
