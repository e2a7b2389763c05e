//! Acceptance suite: one test per criterion, each printing a pass line with
//! its measured numbers (visible with `--nocapture`).
//!
//! Criteria 9-14 train full pipelines; they serialize on a global lock so
//! wall-clock budgets are measured without interference from the other
//! tests in this binary.

mod common;

use std::sync::Mutex;
use std::sync::MutexGuard;
use std::time::Instant;

use rand::Rng;

use common::{data_dir, max_grad_err, rand_tensor, rel_err, rng};

use gimm_core::contrast::{
    embed_graphs, gcn_forward, gin_forward, ContrastConfig, GraphEncoder, NodeEncoder,
    ProjectionHead,
};
use gimm_core::eval::{
    kfold_evaluate, node_split_evaluate, run_ablation, sensitivity_sweep, AblationVariant,
    PipelineConfig,
};
use gimm_core::graphdata::{
    load_tudataset, planted_motif_generate, sbm_dataset, sbm_generate, write_tudataset,
    FeatureMode, Graph, GraphDataset, Task,
};
use gimm_core::nn::mlp_vars;
use gimm_core::tensor::{sgd_step, sgd_step_ascend, Tape, Tensor, UnaryKind, Var};
use gimm_core::viewgen::{
    edge_drop_probs, feature_mask_probs, generator_forward, infonce, infonce_value, sample_view,
    train_generator, GeneratorConfig, GeneratorNoise, GeneratorState, GraphCtx,
    SamplingImportance,
};

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_lock() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn pass(criterion: &str, detail: &str) {
    println!("acceptance {criterion}: PASS ({detail})");
}

// ── criterion 1: gradient correctness ───────────────────────────────────

#[test]
fn criterion_01_gradient_correctness() {
    let mut r = rng(101);
    let mut instances = 0usize;
    let mut worst: f64 = 0.0;

    for _ in 0..100 {
        let (m, k, n) = (
            r.random_range(2..5),
            r.random_range(2..5),
            r.random_range(2..5),
        );

        // matmul
        let a = rand_tensor(m, k, &mut r);
        let b = rand_tensor(k, n, &mut r);
        worst = worst.max(max_grad_err(&[a, b], &|t, v| {
            let c = t.matmul(v[0], v[1]).unwrap();
            let sq = t.hadamard(c, c).unwrap();
            t.sum(sq).unwrap()
        }));
        instances += 1;

        // elementwise with every broadcast shape
        let a = rand_tensor(m, n, &mut r);
        for bshape in [(m, n), (1, n), (m, 1), (1, 1)] {
            let b = rand_tensor(bshape.0, bshape.1, &mut r);
            for kind in 0..3 {
                worst = worst.max(max_grad_err(&[a.clone(), b.clone()], &|t, v| {
                    let c = match kind {
                        0 => t.add(v[0], v[1]).unwrap(),
                        1 => t.sub(v[0], v[1]).unwrap(),
                        _ => t.hadamard(v[0], v[1]).unwrap(),
                    };
                    let sq = t.hadamard(c, c).unwrap();
                    t.sum(sq).unwrap()
                }));
                instances += 1;
            }
        }

        // unary ops, bounded away from the relu kink
        let x = Tensor::new(
            m,
            n,
            (0..m * n)
                .map(|_| {
                    let v: f64 = r.random_range(0.2..1.5);
                    if r.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect(),
        )
        .unwrap();
        for kind in [
            UnaryKind::Sigmoid,
            UnaryKind::Relu,
            UnaryKind::Exp,
            UnaryKind::Neg,
            UnaryKind::Scale(1.7),
        ] {
            worst = worst.max(max_grad_err(&[x.clone()], &|t, v| {
                let y = t.unary(v[0], kind).unwrap();
                let sq = t.hadamard(y, y).unwrap();
                t.sum(sq).unwrap()
            }));
            instances += 1;
        }
        let pos = Tensor::new(m, n, (0..m * n).map(|_| r.random_range(0.3..2.0)).collect()).unwrap();
        worst = worst.max(max_grad_err(&[pos], &|t, v| {
            let y = t.log(v[0]).unwrap();
            t.sum(y).unwrap()
        }));
        instances += 1;

        // concat + reductions + row normalization
        let a = rand_tensor(m, k, &mut r);
        let b = rand_tensor(m, n, &mut r);
        worst = worst.max(max_grad_err(&[a.clone(), b], &|t, v| {
            let c = t.concat_cols(v[0], v[1]).unwrap();
            let sq = t.hadamard(c, c).unwrap();
            t.mean(sq).unwrap()
        }));
        instances += 1;
        worst = worst.max(max_grad_err(&[a.clone()], &|t, v| {
            let rs = t.row_sum(v[0]).unwrap();
            let sq = t.hadamard(rs, rs).unwrap();
            t.sum(sq).unwrap()
        }));
        instances += 1;
        worst = worst.max(max_grad_err(&[a.clone()], &|t, v| {
            let y = t.row_l2_normalize(v[0]).unwrap();
            let s = t.sigmoid(y);
            t.sum(s).unwrap()
        }));
        instances += 1;

        // structured ops
        let edges = std::sync::Arc::new(vec![(0u32, 1u32), (1, 0), (1, 2), (2, 1), (0, 2)]);
        let w = rand_tensor(5, 1, &mut r);
        let h = rand_tensor(3, n, &mut r);
        let e2 = edges.clone();
        worst = worst.max(max_grad_err(&[w, h], &|t, v| {
            let c = t.adj_matmul(v[0], v[1], e2.clone()).unwrap();
            let sq = t.hadamard(c, c).unwrap();
            t.sum(sq).unwrap()
        }));
        instances += 1;
        let a = rand_tensor(4, n, &mut r);
        let idx = std::sync::Arc::new(vec![1u32, 3, 0, 1]);
        let i2 = idx.clone();
        let map = std::sync::Arc::new(vec![0u32, 1, 1, 0]);
        let m2 = map.clone();
        worst = worst.max(max_grad_err(&[a.clone()], &|t, v| {
            let g = t.gather_rows(v[0], i2.clone()).unwrap();
            let sq = t.hadamard(g, g).unwrap();
            t.sum(sq).unwrap()
        }));
        instances += 1;
        worst = worst.max(max_grad_err(&[a], &|t, v| {
            let s = t.segment_sum(v[0], m2.clone(), 2).unwrap();
            let sq = t.hadamard(s, s).unwrap();
            t.sum(sq).unwrap()
        }));
        instances += 1;
    }
    assert!(instances >= 100);
    assert!(worst < 1e-4, "worst per-op relative error {worst}");

    // composite generator loss under frozen noise (6-node fixture)
    let g = sbm_generate(&[3, 3], 0.9, 0.3, 4, &mut rng(102)).unwrap();
    let cfg = GeneratorConfig {
        hidden_dim: 6,
        lambda: 0.5,
        ..GeneratorConfig::default()
    };
    let ctx = GraphCtx::new(&g);
    let noise = GeneratorNoise::frozen_half(6, 4, ctx.units.len());
    let mut composite_worst: f64 = 0.0;
    for seed in 0..4 {
        let state = GeneratorState::init(4, &cfg, &mut rng(200 + seed)).unwrap();
        let loss_of = |s: &GeneratorState| {
            let mut tape = Tape::new();
            let bound = s.bind(&mut tape);
            let fwd = generator_forward(&mut tape, &bound, &g, &ctx, &cfg, &noise).unwrap();
            let i = tape.value(fwd.i_hat).item().unwrap();
            let rv = tape.value(fwd.reg).item().unwrap();
            -i + cfg.lambda * rv
        };
        let mut tape = Tape::new();
        let bound = state.bind(&mut tape);
        let fwd = generator_forward(&mut tape, &bound, &g, &ctx, &cfg, &noise).unwrap();
        let neg = tape.neg(fwd.i_hat);
        let reg = tape.scale(fwd.reg, cfg.lambda);
        let loss = tape.add(neg, reg).unwrap();
        tape.backward(loss).unwrap();

        let h = 1e-5;
        let mut probe = |get: &dyn Fn(&mut GeneratorState) -> &mut Tensor, var: Var, idx: usize| {
            let mut plus = state.clone();
            get(&mut plus).data[idx] += h;
            let mut minus = state.clone();
            get(&mut minus).data[idx] -= h;
            let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let auto = tape.grad(var).unwrap()[idx];
            composite_worst = composite_worst.max(rel_err(auto, fd));
        };
        for idx in [0usize, 5, 11, 17, 23] {
            probe(&|s| &mut s.w, bound.w, idx);
        }
        for idx in [0usize, 3, 7] {
            probe(&|s| &mut s.phi.layers[0].w, bound.phi.layers[0].w, idx);
            probe(&|s| &mut s.psi.layers[0].w, bound.psi.layers[0].w, idx);
            probe(&|s| &mut s.theta[0].w, bound.theta[0].w, idx);
            probe(&|s| &mut s.xi.layers[0].w, bound.xi.layers[0].w, idx);
        }
    }
    assert!(
        composite_worst < 1e-3,
        "composite generator loss error {composite_worst}"
    );

    // composite contrast loss: GCN + head + InfoNCE on frozen views
    let g = sbm_generate(&[3, 3], 0.8, 0.3, 4, &mut rng(103)).unwrap();
    let ccfg = ContrastConfig {
        embed_dim: 5,
        ..ContrastConfig::default()
    };
    let mut contrast_worst: f64 = 0.0;
    for seed in 0..4 {
        let encoder = NodeEncoder::init(4, &ccfg, &mut rng(300 + seed)).unwrap();
        let head = ProjectionHead::init(5, 2, &mut rng(400 + seed)).unwrap();
        let forward = |e: &NodeEncoder, hd: &ProjectionHead| {
            let mut tape = Tape::new();
            let eb = e.bind(&mut tape);
            let hb = hd.bind(&mut tape);
            let adj = gimm_core::contrast::BoundAdjacency::normalized(&mut tape, &g).unwrap();
            let x = tape.constant(g.features.clone());
            let h1 = eb.forward(&mut tape, &adj, x).unwrap();
            let z1 = hb.forward(&mut tape, h1).unwrap();
            let x2 = tape.constant(g.features.clone());
            let h2 = eb.forward(&mut tape, &adj, x2).unwrap();
            let s2 = tape.sigmoid(h2);
            let z2 = hb.forward(&mut tape, s2).unwrap();
            let i = infonce(&mut tape, z1, z2, 0.5, false).unwrap();
            let l = tape.neg(i);
            (tape, eb, hb, l)
        };
        let loss_of = |e: &NodeEncoder, hd: &ProjectionHead| {
            let (tape, _, _, l) = forward(e, hd);
            tape.value(l).item().unwrap()
        };
        let (mut tape, eb, hb, l) = forward(&encoder, &head);
        tape.backward(l).unwrap();
        let h = 1e-5;
        for idx in [0usize, 4, 9] {
            let mut plus = encoder.clone();
            plus.layers[0].w.data[idx] += h;
            let mut minus = encoder.clone();
            minus.layers[0].w.data[idx] -= h;
            let fd = (loss_of(&plus, &head) - loss_of(&minus, &head)) / (2.0 * h);
            let auto = tape.grad(eb.layers[0].w).unwrap()[idx];
            contrast_worst = contrast_worst.max(rel_err(auto, fd));

            let mut plus = head.clone();
            plus.mlp.layers[0].w.data[idx] += h;
            let mut minus = head.clone();
            minus.mlp.layers[0].w.data[idx] -= h;
            let fd = (loss_of(&encoder, &plus) - loss_of(&encoder, &minus)) / (2.0 * h);
            let auto = tape.grad(mlp_vars(&hb)[0]).unwrap()[idx];
            contrast_worst = contrast_worst.max(rel_err(auto, fd));
        }
    }
    assert!(
        contrast_worst < 1e-3,
        "composite contrast loss error {contrast_worst}"
    );

    pass(
        "criterion 1 (gradient correctness)",
        &format!(
            "{instances} op instances worst {worst:.2e}; composites {composite_worst:.2e} / {contrast_worst:.2e}"
        ),
    );
}

// ── criterion 2: InfoNCE oracle ─────────────────────────────────────────

#[test]
fn criterion_02_infonce_oracle() {
    let z = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let v = infonce_value(&z, &z, 1.0, false).unwrap();
    assert!((v - 1.0).abs() < 1e-12, "orthogonal two-row case gave {v}");

    let mut r = rng(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(3..8);
        let d = r.random_range(2..6);
        let z1 = rand_tensor(n, d, &mut r);
        let z2 = rand_tensor(n, d, &mut r);
        let base = infonce_value(&z1, &z2, 0.5, false).unwrap();

        let sym = infonce_value(&z2, &z1, 0.5, false).unwrap();
        worst = worst.max((base - sym).abs());

        let mut scaled = z1.clone();
        for i in 0..n {
            let c = r.random_range(0.1..5.0);
            for j in 0..d {
                scaled.data[i * d + j] *= c;
            }
        }
        let resc = infonce_value(&scaled, &z2, 0.5, false).unwrap();
        worst = worst.max((base - resc).abs());

        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut r);
        let apply = |t: &Tensor| {
            let rows: Vec<Vec<f64>> = perm.iter().map(|&i| t.row(i).to_vec()).collect();
            Tensor::from_rows(&rows).unwrap()
        };
        let p = infonce_value(&apply(&z1), &apply(&z2), 0.5, false).unwrap();
        worst = worst.max((base - p).abs());
    }
    assert!(worst < 1e-10, "invariance deviation {worst}");
    pass(
        "criterion 2 (InfoNCE oracle)",
        &format!("two-row case exact, invariance deviation {worst:.2e}"),
    );
}

// ── criterion 3: sampler statistics ─────────────────────────────────────

#[test]
fn criterion_03_sampler_statistics() {
    // fixed graph with exactly 50 undirected edges over 15 nodes
    let mut r = rng(105);
    let mut pairs = std::collections::BTreeSet::new();
    while pairs.len() < 50 {
        let u = r.random_range(0..15u32);
        let v = r.random_range(0..15u32);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    let mut edges = Vec::new();
    for &(u, v) in &pairs {
        edges.push((u, v));
        edges.push((v, u));
    }
    let f_dim = 20;
    let g = Graph::new(15, edges, Tensor::ones(15, f_dim), FeatureMode::BinaryOnehot).unwrap();

    let edge_imp: Vec<f64> = (0..50).map(|_| r.random_range(0.05..0.95)).collect();
    let feat_imp: Vec<f64> = (0..f_dim).map(|_| r.random_range(0.05..0.95)).collect();
    let (p_t, p_s) = (0.7, 0.5);
    let drop = edge_drop_probs(&edge_imp, p_s, p_t).unwrap();
    let mask = feature_mask_probs(&feat_imp, p_s, p_t).unwrap();

    assert!(drop.iter().chain(&mask).all(|&p| p <= p_t + 1e-15));
    let max_idx = edge_imp
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(drop[max_idx], 0.0, "maximal-importance edge must never drop");

    let trials = 10_000usize;
    let units = g.undirected_units();
    let mut edge_kept = vec![0usize; units.len()];
    let mut feat_kept = vec![0usize; f_dim];
    for t in 0..trials {
        let view = sample_view(&g, &drop, &mask, &mut rng(1_000_000 + t as u64)).unwrap();
        let kept: std::collections::BTreeSet<(u32, u32)> = view
            .edges
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        for (k, unit) in units.iter().enumerate() {
            if kept.contains(unit) {
                edge_kept[k] += 1;
            }
        }
        for c in 0..f_dim {
            if view.features.get(0, c) != 0.0 {
                feat_kept[c] += 1;
            }
        }
    }
    let mut worst_sigma: f64 = 0.0;
    let mut check = |kept: &[usize], probs: &[f64]| {
        for (count, &p_drop) in kept.iter().zip(probs) {
            let p_keep = 1.0 - p_drop;
            let sigma = (p_keep * (1.0 - p_keep) / trials as f64).sqrt();
            let emp = *count as f64 / trials as f64;
            let dev = (emp - p_keep).abs();
            if sigma == 0.0 {
                assert_eq!(emp, p_keep, "deterministic edge kept with wrong rate");
            } else {
                worst_sigma = worst_sigma.max(dev / sigma);
                assert!(
                    dev < 3.0 * sigma,
                    "keep rate {emp} vs {p_keep} (dev {dev:.4}, sigma {sigma:.4})"
                );
            }
        }
    };
    check(&edge_kept, &drop);
    check(&feat_kept, &mask);

    pass(
        "criterion 3 (sampler statistics)",
        &format!("50 edges + {f_dim} features over {trials} samples, worst deviation {worst_sigma:.2} sigma"),
    );
}

// ── criterion 4: drop-probability formula oracle ────────────────────────

#[test]
fn criterion_04_drop_prob_oracle() {
    // independent scalar-loop reimplementation
    fn oracle(imp: &[f64], p_s: f64, p_t: f64) -> Vec<f64> {
        let mut max = f64::NEG_INFINITY;
        for &v in imp {
            if v > max {
                max = v;
            }
        }
        let mut sum = 0.0;
        for &v in imp {
            sum += v;
        }
        let avg = sum / imp.len() as f64;
        let mut out = Vec::with_capacity(imp.len());
        for &v in imp {
            let ratio = if max - avg < 1e-12 {
                1.0
            } else {
                (max - v) / (max - avg)
            };
            let p = ratio * p_s;
            out.push(if p < p_t { p } else { p_t });
        }
        out
    }

    let mut r = rng(106);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = r.random_range(1..40);
        let imp: Vec<f64> = if case % 10 == 0 {
            vec![r.random_range(0.0..1.0); n]
        } else {
            (0..n).map(|_| r.random_range(0.0..1.0)).collect()
        };
        let p_s = r.random_range(0.0..1.0);
        let p_t = r.random_range(0.0..1.0);
        let ours = edge_drop_probs(&imp, p_s, p_t).unwrap();
        let expect = oracle(&imp, p_s, p_t);
        for (a, b) in ours.iter().zip(&expect) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-12, "worst deviation {worst}");
    pass(
        "criterion 4 (drop-prob oracle)",
        &format!("1000 random vectors incl. degenerate, worst {worst:.2e}"),
    );
}

// ── criterion 5: adversarial sign check ─────────────────────────────────

#[test]
fn criterion_05_adversarial_sign_check() {
    let g = sbm_generate(&[3, 3], 0.9, 0.3, 4, &mut rng(107)).unwrap();
    // lambda = 0 makes the learner step exactly an ascent step on I_hat
    let cfg = GeneratorConfig {
        hidden_dim: 8,
        lambda: 0.0,
        ..GeneratorConfig::default()
    };
    let ctx = GraphCtx::new(&g);
    let noise = GeneratorNoise::frozen_half(6, 4, ctx.units.len());
    let lr = 1e-4;

    let i_hat_of = |s: &GeneratorState| {
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape);
        let fwd = generator_forward(&mut tape, &bound, &g, &ctx, &cfg, &noise).unwrap();
        tape.value(fwd.i_hat).item().unwrap()
    };

    let base = GeneratorState::init(4, &cfg, &mut rng(108)).unwrap();
    let i0 = i_hat_of(&base);

    // learner-only ascent step must not decrease I_hat
    let mut learner = base.clone();
    {
        let mut tape = Tape::new();
        let bound = learner.bind(&mut tape);
        let fwd = generator_forward(&mut tape, &bound, &g, &ctx, &cfg, &noise).unwrap();
        tape.backward(fwd.i_hat).unwrap();
        let vars = bound.learner_vars(false);
        gimm_core::nn::pull_grads(&tape, &vars, &mut learner.learner_params_mut()).unwrap();
        sgd_step_ascend(&mut learner.learner_params_mut(), lr).unwrap();
    }
    let i_learner = i_hat_of(&learner);
    assert!(
        i_learner >= i0 - 1e-9,
        "learner step decreased I_hat: {i0} -> {i_learner}"
    );

    // adversary-only descent step must not increase I_hat
    let mut adversary = base.clone();
    {
        let mut tape = Tape::new();
        let bound = adversary.bind(&mut tape);
        let fwd = generator_forward(&mut tape, &bound, &g, &ctx, &cfg, &noise).unwrap();
        tape.backward(fwd.i_hat).unwrap();
        let vars = bound.adversary_vars();
        gimm_core::nn::pull_grads(&tape, &vars, &mut adversary.adversary_params_mut()).unwrap();
        sgd_step(&mut adversary.adversary_params_mut(), lr).unwrap();
    }
    let i_adv = i_hat_of(&adversary);
    assert!(
        i_adv <= i0 + 1e-9,
        "adversary step increased I_hat: {i0} -> {i_adv}"
    );

    pass(
        "criterion 5 (adversarial sign check)",
        &format!("I0 {i0:.6}, learner step -> {i_learner:.6}, adversary step -> {i_adv:.6}"),
    );
}

// ── criterion 6: no-collapse ────────────────────────────────────────────

#[test]
fn criterion_06_no_collapse() {
    let _guard = heavy_lock();
    let ds = sbm_dataset(&[20, 20], 0.4, 0.05, 8, &mut rng(109)).unwrap();
    let cfg = GeneratorConfig::default();
    let out = train_generator(&ds, &cfg, &mut rng(110)).unwrap();
    let last = out.log.last().unwrap();
    assert!(
        last.i_hat > 0.0,
        "final I_hat {} not positive after default training",
        last.i_hat
    );
    pass(
        "criterion 6 (no collapse)",
        &format!("final I_hat {:.4} > 0 after {} epochs", last.i_hat, cfg.epochs),
    );
}

// ── criterion 7: permutation invariance / equivariance ──────────────────

#[test]
fn criterion_07_permutation_invariance() {
    let mut r = rng(111);
    let g = sbm_generate(&[5, 5], 0.6, 0.2, 6, &mut r).unwrap();
    let mut perm: Vec<u32> = (0..10).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut r);

    let permute = |g: &Graph| {
        let edges = g
            .edges
            .iter()
            .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();
        let mut rows = vec![vec![0.0; g.feature_dim()]; g.num_nodes];
        for u in 0..g.num_nodes {
            rows[perm[u] as usize] = g.features.row(u).to_vec();
        }
        let mut out = Graph::new(
            g.num_nodes,
            edges,
            Tensor::from_rows(&rows).unwrap(),
            g.feature_mode,
        )
        .unwrap();
        out.graph_label = Some(0);
        out
    };
    let shuffled = permute(&g);

    let ccfg = ContrastConfig {
        embed_dim: 16,
        ..ContrastConfig::default()
    };
    let node_enc = NodeEncoder::init(6, &ccfg, &mut rng(112)).unwrap();
    let base = gcn_forward(&g, &node_enc).unwrap();
    let moved = gcn_forward(&shuffled, &node_enc).unwrap();
    for u in 0..g.num_nodes {
        assert_eq!(base.row(u), moved.row(perm[u] as usize), "gcn row {u}");
    }

    let graph_enc = GraphEncoder::init(6, &ccfg, &mut rng(113)).unwrap();
    let base = gin_forward(&g, &graph_enc).unwrap();
    let moved = gin_forward(&shuffled, &graph_enc).unwrap();
    for u in 0..g.num_nodes {
        assert_eq!(base.row(u), moved.row(perm[u] as usize), "gin row {u}");
    }

    let mut g1 = g.clone();
    g1.graph_label = Some(0);
    let ds = GraphDataset {
        graphs: vec![g1, shuffled],
        name: "perm".into(),
        num_classes: 1,
        task: Task::GraphClassification,
    };
    let embs = embed_graphs(&ds, &graph_enc).unwrap();
    assert_eq!(embs.row(0), embs.row(1), "graph embedding must be invariant");

    pass(
        "criterion 7 (permutation invariance)",
        "node embeddings exactly equivariant, graph embeddings exactly invariant",
    );
}

// ── criterion 8: loaders ────────────────────────────────────────────────

#[test]
fn criterion_08_loaders() {
    // exact round trip
    let mut r = rng(114);
    let mut graphs = Vec::new();
    for i in 0..5 {
        let g0 = sbm_generate(&[3, 4], 0.6, 0.3, 5, &mut r).unwrap();
        let mut g = Graph::new(g0.num_nodes, g0.edges, g0.features, g0.feature_mode).unwrap();
        g.graph_label = Some(i % 2);
        graphs.push(g);
    }
    let ds = GraphDataset {
        graphs,
        name: "rt".into(),
        num_classes: 2,
        task: Task::GraphClassification,
    };
    let tmp = tempfile::tempdir().unwrap();
    write_tudataset(&ds, tmp.path(), "RT").unwrap();
    let back = load_tudataset(tmp.path(), "RT").unwrap();
    for (a, b) in ds.graphs.iter().zip(&back.graphs) {
        assert_eq!(a.num_nodes, b.num_nodes);
        let mut ea = a.edges.clone();
        let mut eb = b.edges.clone();
        ea.sort_unstable();
        eb.sort_unstable();
        assert_eq!(ea, eb);
        assert_eq!(a.features.data, b.features.data, "features must be bit-exact");
    }

    // vendored MUTAG and PROTEINS match the published statistics
    let mutag = load_tudataset(data_dir().join("MUTAG"), "MUTAG").unwrap();
    assert_eq!(mutag.graphs.len(), 188);
    assert_eq!(mutag.num_classes, 2);
    let avg_nodes: f64 =
        mutag.graphs.iter().map(|g| g.num_nodes as f64).sum::<f64>() / mutag.graphs.len() as f64;
    assert!((avg_nodes - 17.93).abs() < 0.01, "avg nodes {avg_nodes}");

    let proteins = load_tudataset(data_dir().join("PROTEINS"), "PROTEINS").unwrap();
    assert_eq!(proteins.graphs.len(), 1113);
    let avg_nodes: f64 = proteins.graphs.iter().map(|g| g.num_nodes as f64).sum::<f64>()
        / proteins.graphs.len() as f64;
    assert!((avg_nodes - 39.06).abs() < 0.01, "avg nodes {avg_nodes}");

    pass(
        "criterion 8 (loaders)",
        "round trip exact; MUTAG 188 graphs / 2 classes; PROTEINS 1113 graphs, 39.06 avg nodes",
    );
}

// ── criteria 9-10: desk-scale quantitative reproduction ─────────────────

fn desk_pipeline() -> PipelineConfig {
    PipelineConfig {
        jobs: 2,
        ..PipelineConfig::default()
    }
}

#[test]
fn criterion_09_mutag_pipeline() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let ds = load_tudataset(data_dir().join("MUTAG"), "MUTAG").unwrap();
    let cfg = desk_pipeline();
    let report = kfold_evaluate(&ds, &cfg).unwrap();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    assert!(
        report.mean >= 0.85,
        "MUTAG mean accuracy {:.4} below 0.85 (runs: {:?})",
        report.mean,
        report.run_means
    );
    assert!(minutes < 30.0, "MUTAG pipeline took {minutes:.1} min");
    pass(
        "criterion 9 (MUTAG)",
        &format!(
            "accuracy {:.4} +- {:.4} in {minutes:.1} min (target >= 0.85, budget 30 min)",
            report.mean, report.std
        ),
    );
}

#[test]
fn criterion_10_proteins_pipeline() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let ds = load_tudataset(data_dir().join("PROTEINS"), "PROTEINS").unwrap();
    let cfg = desk_pipeline();
    let report = kfold_evaluate(&ds, &cfg).unwrap();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    assert!(
        report.mean >= 0.70,
        "PROTEINS mean accuracy {:.4} below 0.70 (runs: {:?})",
        report.mean,
        report.run_means
    );
    assert!(minutes < 60.0, "PROTEINS pipeline took {minutes:.1} min");
    pass(
        "criterion 10 (PROTEINS)",
        &format!(
            "accuracy {:.4} +- {:.4} in {minutes:.1} min (target >= 0.70, budget 60 min)",
            report.mean, report.std
        ),
    );
}

// ── criterion 11: ablation ordering ─────────────────────────────────────

#[test]
fn criterion_11_ablation_ordering() {
    let _guard = heavy_lock();
    let ds = planted_motif_generate(40, &mut rng(115)).unwrap();
    let cfg = desk_pipeline();

    let full = run_ablation(&ds, AblationVariant::Full, &cfg).unwrap();
    let uni = run_ablation(&ds, AblationVariant::Uni, &cfg).unwrap();

    let counts = ds.graphs.iter().filter(|g| g.graph_label == Some(1)).count();
    let majority = counts.max(ds.len() - counts) as f64 / ds.len() as f64;

    assert!(
        full.mean >= uni.mean,
        "GIMM-Full {:.4} below GIMM-Uni {:.4}",
        full.mean,
        uni.mean
    );
    assert!(
        full.mean >= majority + 0.10,
        "GIMM-Full {:.4} not 10 points over majority {majority:.4}",
        full.mean
    );
    pass(
        "criterion 11 (ablation ordering)",
        &format!(
            "full {:.4} >= uni {:.4}; majority {majority:.4}",
            full.mean, uni.mean
        ),
    );
}

// ── criterion 12: sensitivity shape ─────────────────────────────────────

#[test]
fn criterion_12_sensitivity_shape() {
    let _guard = heavy_lock();
    let ds = planted_motif_generate(40, &mut rng(116)).unwrap();
    let mut cfg = desk_pipeline();
    cfg.runs = 3;
    let grid = [0.1, 1.0];
    let sweep = sensitivity_sweep(&ds, &grid, &cfg).unwrap();
    let low = sweep.means[0][0];
    let high = sweep.means[1][1];
    assert!(
        high <= low - 0.05,
        "(1.0, 1.0) cell {high:.4} not >= 5 points below (0.1, 0.1) cell {low:.4}"
    );
    pass(
        "criterion 12 (sensitivity shape)",
        &format!("(0.1, 0.1) -> {low:.4}, (1.0, 1.0) -> {high:.4}"),
    );
}

// ── criterion 13: regularizer effect ────────────────────────────────────

#[test]
fn criterion_13_regularizer_effect() {
    let _guard = heavy_lock();
    // graph-classification dataset of small SBM graphs; the generator sees
    // a few hundred minibatch updates, where the mass responds smoothly to
    // the regularizer weight
    let mut r = rng(117);
    let mut graphs = Vec::new();
    for i in 0..12 {
        let g0 = sbm_generate(&[6, 6], 0.5, 0.1, 6, &mut r).unwrap();
        let mut g = Graph::new(g0.num_nodes, g0.edges, g0.features, g0.feature_mode).unwrap();
        g.graph_label = Some(i % 2);
        graphs.push(g);
    }
    let ds = GraphDataset {
        graphs,
        name: "sbm-set".into(),
        num_classes: 2,
        task: Task::GraphClassification,
    };

    let base_lambda = GeneratorConfig::default().lambda;
    let mass_after = |lambda: f64, seed: u64| {
        let cfg = GeneratorConfig {
            lambda,
            ..GeneratorConfig::default()
        };
        let out = train_generator(&ds, &cfg, &mut rng(seed)).unwrap();
        let mut total = 0.0;
        for (i, g) in ds.graphs.iter().enumerate() {
            total += SamplingImportance::from_state(g, &out.state, &cfg, 7, i as u64)
                .unwrap()
                .mass();
        }
        total / ds.graphs.len() as f64
    };
    let mut base = 0.0;
    let mut doubled = 0.0;
    for seed in 0..3 {
        base += mass_after(base_lambda, 500 + seed);
        doubled += mass_after(2.0 * base_lambda, 500 + seed);
    }
    base /= 3.0;
    doubled /= 3.0;
    assert!(
        doubled < base,
        "doubling lambda did not shrink importance mass: {base:.4} -> {doubled:.4}"
    );
    pass(
        "criterion 13 (regularizer effect)",
        &format!(
            "mean importance mass {base:.4} -> {doubled:.4} when lambda doubles ({base_lambda} -> {})",
            2.0 * base_lambda
        ),
    );
}

// ── criterion 14: node-task sanity ──────────────────────────────────────

#[test]
fn criterion_14_sbm_node_task() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let ds = sbm_dataset(&[150, 150], 0.2, 0.02, 16, &mut rng(118)).unwrap();
    let cfg = desk_pipeline();
    let report = node_split_evaluate(&ds, &cfg).unwrap();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    assert!(
        report.mean >= 0.95,
        "SBM node accuracy {:.4} below 0.95 (runs: {:?})",
        report.mean,
        report.run_means
    );
    assert!(minutes < 10.0, "SBM node pipeline took {minutes:.1} min");
    pass(
        "criterion 14 (SBM node task)",
        &format!(
            "accuracy {:.4} in {minutes:.1} min (target >= 0.95, budget 10 min)",
            report.mean
        ),
    );
}
