//! Adversarial training of the view generator.
//!
//! Each epoch (per minibatch on graph datasets) performs one adversary
//! update followed by one importance-learner update, each on a fresh forward
//! pass with freshly sampled Gumbel noise. The learner descends
//! `-I_hat + lambda * R`; the adversary descends `I_hat` itself (the
//! max-max ablation flips it to ascend).

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphdata::{batch_disjoint_union, Graph, GraphDataset, Task};
use crate::nn::pull_grads;
use crate::tensor::{AdamState, Tape};

use super::{generator_forward, GeneratorConfig, GeneratorNoise, GeneratorState, GraphCtx};

static TRAIN_CALLS: AtomicU64 = AtomicU64::new(0);

/// How many times `train_generator` has run in this process; the uniform
/// ablation asserts it never trains.
pub fn train_generator_call_count() -> u64 {
    TRAIN_CALLS.load(Ordering::Relaxed)
}

/// Direction of the adversary update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryMode {
    /// Adversary minimizes the MI estimate (the max-min objective).
    MinimizeMi,
    /// Sign-flipped ablation: adversary also maximizes (max-max).
    MaximizeMi,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub i_hat: f64,
    pub reg: f64,
    pub loss: f64,
}

#[derive(Debug)]
pub struct GeneratorTrainResult {
    pub state: GeneratorState,
    pub log: Vec<TrainLogRow>,
}

pub fn train_generator(
    dataset: &GraphDataset,
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratorTrainResult> {
    train_generator_ext(dataset, cfg, rng, AdversaryMode::MinimizeMi, false)
}

pub fn train_generator_ext(
    dataset: &GraphDataset,
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    mode: AdversaryMode,
    identity_w: bool,
) -> Result<GeneratorTrainResult> {
    TRAIN_CALLS.fetch_add(1, Ordering::Relaxed);
    cfg.validate()?;
    dataset.validate()?;
    let feature_dim = dataset.graphs[0].feature_dim();
    let mut state = if identity_w {
        GeneratorState::init_identity_w(feature_dim, cfg, rng)?
    } else {
        GeneratorState::init(feature_dim, cfg, rng)?
    };
    let mut adam_learner = AdamState::new(cfg.lr);
    let mut adam_adversary = AdamState::new(cfg.lr);
    let mut log = Vec::with_capacity(cfg.epochs);

    // the node task trains on its single graph; cache its context
    let single: Option<(Graph, GraphCtx)> = match dataset.task {
        Task::NodeClassification => {
            let g = dataset.graphs[0].clone();
            let ctx = GraphCtx::new(&g);
            Some((g, ctx))
        }
        Task::GraphClassification if dataset.len() == 1 => {
            let g = dataset.graphs[0].clone();
            let ctx = GraphCtx::new(&g);
            Some((g, ctx))
        }
        Task::GraphClassification => None,
    };

    for epoch in 0..cfg.epochs {
        let mut batches: Vec<(Graph, GraphCtx)> = Vec::new();
        match &single {
            Some((g, ctx)) => batches.push((g.clone(), ctx.clone())),
            None => {
                let mut idx: Vec<usize> = (0..dataset.len()).collect();
                idx.shuffle(rng);
                for chunk in idx.chunks(cfg.batch_size) {
                    let graphs: Vec<&Graph> = chunk.iter().map(|&i| &dataset.graphs[i]).collect();
                    let (union, _) = batch_disjoint_union(&graphs)?;
                    let ctx = GraphCtx::new(&union);
                    batches.push((union, ctx));
                }
            }
        }

        let mut epoch_i_hat = 0.0;
        let mut epoch_reg = 0.0;
        for (g, ctx) in &batches {
            // adversary step
            let noise =
                GeneratorNoise::sample(g.num_nodes, g.feature_dim(), ctx.units.len(), rng);
            let mut tape = Tape::new();
            let bound = state.bind(&mut tape);
            let fwd = generator_forward(&mut tape, &bound, g, ctx, cfg, &noise)?;
            let adv_objective = match mode {
                AdversaryMode::MinimizeMi => fwd.i_hat,
                AdversaryMode::MaximizeMi => tape.neg(fwd.i_hat),
            };
            check_finite(&tape, fwd.i_hat, epoch)?;
            tape.backward(adv_objective)?;
            let adv_vars = bound.adversary_vars();
            pull_grads(&tape, &adv_vars, &mut state.adversary_params_mut())?;
            adam_adversary.step(&mut state.adversary_params_mut())?;

            // learner step on a fresh forward pass
            let noise =
                GeneratorNoise::sample(g.num_nodes, g.feature_dim(), ctx.units.len(), rng);
            let mut tape = Tape::new();
            let bound = state.bind(&mut tape);
            let fwd = generator_forward(&mut tape, &bound, g, ctx, cfg, &noise)?;
            let i_hat = tape.value(fwd.i_hat).item()?;
            let reg = tape.value(fwd.reg).item()?;
            if !i_hat.is_finite() || !reg.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let neg_i = tape.neg(fwd.i_hat);
            let scaled_reg = tape.scale(fwd.reg, cfg.lambda);
            let loss = tape.add(neg_i, scaled_reg)?;
            tape.backward(loss)?;
            let learner_vars = bound.learner_vars(state.w_frozen);
            pull_grads(&tape, &learner_vars, &mut state.learner_params_mut())?;
            adam_learner.step(&mut state.learner_params_mut())?;

            epoch_i_hat += i_hat;
            epoch_reg += reg;
        }

        let n = batches.len() as f64;
        let (i_hat, reg) = (epoch_i_hat / n, epoch_reg / n);
        if i_hat < cfg.zeta {
            log::warn!("epoch {epoch}: I_hat {i_hat:.6} fell below zeta {}", cfg.zeta);
        }
        log.push(TrainLogRow {
            epoch,
            i_hat,
            reg,
            loss: -i_hat + cfg.lambda * reg,
        });
    }
    Ok(GeneratorTrainResult { state, log })
}

fn check_finite(tape: &Tape, v: crate::tensor::Var, epoch: usize) -> Result<()> {
    if !tape.value(v).is_finite() {
        return Err(Error::Divergence { epoch });
    }
    Ok(())
}
