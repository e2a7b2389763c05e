//! Downstream evaluation: l2-regularized logistic regression (node task),
//! one-vs-rest linear SVM with C grid search (graph task), cross-validated
//! reports, ablation variants, and the sampling-rate sensitivity sweep.

mod pipeline;
mod report;

pub use pipeline::{
    kfold_evaluate, node_split_evaluate, run_ablation, sensitivity_sweep, AblationVariant,
    PipelineConfig, SweepReport, UNIFORM_IMPORTANCE,
};
pub use report::{write_report_csv, write_report_json, EvalReport, FoldResult};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{sgd_step, Tape, Tensor};

/// The paper's SVM slack grid.
pub const SVM_C_GRID: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

fn check_training_data(embs: &Tensor, labels: &[usize], num_classes: usize) -> Result<()> {
    if embs.rows != labels.len() {
        return Err(Error::contract(
            "classifier",
            format!("{} embedding rows, {} labels", embs.rows, labels.len()),
        ));
    }
    if num_classes < 2 {
        return Err(Error::domain("classifier", "need at least 2 classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::contract(
            "classifier",
            format!("label {bad} out of range for {num_classes} classes"),
        ));
    }
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(Error::domain(
            "classifier",
            "degenerate training data: a single class present",
        ));
    }
    Ok(())
}

// ── Logistic regression ─────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lr: 0.01,
            l2: 1e-4,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogRegModel {
    pub w: Tensor,
    pub b: Tensor,
    pub num_classes: usize,
}

/// Softmax cross-entropy plus l2 penalty, minimized by full-batch gradient
/// descent from zero initialization (deterministic; no RNG involved).
pub fn train_logreg(
    embs: &Tensor,
    labels: &[usize],
    num_classes: usize,
    cfg: &LogRegConfig,
) -> Result<LogRegModel> {
    check_training_data(embs, labels, num_classes)?;
    let (n, d) = (embs.rows, embs.cols);
    let mut w = Tensor::zeros(d, num_classes).with_grad();
    let mut b = Tensor::zeros(1, num_classes).with_grad();
    let mut onehot = Tensor::zeros(n, num_classes);
    for (i, &l) in labels.iter().enumerate() {
        onehot.set(i, l, 1.0);
    }

    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(embs.clone());
        let wv = tape.leaf(&w);
        let bv = tape.leaf(&b);
        let xw = tape.matmul(x, wv)?;
        let logits = tape.add(xw, bv)?;

        // stabilized log-sum-exp per row (max treated as a constant shift)
        let lv = tape.value(logits);
        let mut shift = Tensor::zeros(n, 1);
        for i in 0..n {
            shift.data[i] = lv.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        let shift_v = tape.constant(shift);
        let shifted = tape.sub(logits, shift_v)?;
        let e = tape.exp(shifted);
        let rs = tape.row_sum(e)?;
        let lse_part = tape.log(rs)?;
        let lse = tape.add(lse_part, shift_v)?;

        let oh = tape.constant(onehot.clone());
        let picked = tape.hadamard(logits, oh)?;
        let pos = tape.row_sum(picked)?;
        let per_row = tape.sub(lse, pos)?;
        let ce = tape.mean(per_row)?;

        let wsq = tape.hadamard(wv, wv)?;
        let penalty_sum = tape.sum(wsq)?;
        let penalty = tape.scale(penalty_sum, cfg.l2);
        let loss = tape.add(ce, penalty)?;

        tape.backward(loss)?;
        tape.accumulate_grad_into(wv, &mut w)?;
        tape.accumulate_grad_into(bv, &mut b)?;
        sgd_step(&mut [&mut w, &mut b], cfg.lr)?;
    }
    Ok(LogRegModel {
        w,
        b,
        num_classes,
    })
}

pub fn predict_logreg(model: &LogRegModel, embs: &Tensor) -> Result<Vec<usize>> {
    if embs.cols != model.w.rows {
        return Err(Error::contract(
            "predict_logreg",
            format!("embedding dim {} vs model dim {}", embs.cols, model.w.rows),
        ));
    }
    let mut out = Vec::with_capacity(embs.rows);
    for i in 0..embs.rows {
        let x = embs.row(i);
        let mut best = (0usize, f64::NEG_INFINITY);
        for c in 0..model.num_classes {
            let score: f64 = x
                .iter()
                .enumerate()
                .map(|(j, &v)| v * model.w.get(j, c))
                .sum::<f64>()
                + model.b.data[c];
            if score > best.1 {
                best = (c, score);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

// ── Linear SVM ──────────────────────────────────────────────────────────

/// One-vs-rest linear SVM with hinge loss and `1/(2 C n) ||w||^2`
/// regularization, trained by deterministic full-batch subgradient descent
/// with the Pegasos step schedule and ball projection. The bias is an
/// augmented constant feature.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    /// One weight row per class, last column is the bias.
    pub w: Tensor,
    pub c: f64,
}

pub fn train_linear_svm(
    embs: &Tensor,
    labels: &[usize],
    num_classes: usize,
    c: f64,
    iters: usize,
) -> Result<LinearSvm> {
    check_training_data(embs, labels, num_classes)?;
    if c <= 0.0 {
        return Err(Error::domain("train_linear_svm", "C must be positive"));
    }
    let (n, d) = (embs.rows, embs.cols);
    let lambda = 1.0 / (c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut w = Tensor::zeros(num_classes, d + 1);

    for class in 0..num_classes {
        let ys: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let row = &mut w.data[class * (d + 1)..(class + 1) * (d + 1)];
        for t in 0..iters {
            // subgradient: lambda w - mean over margin violators of y x
            let mut grad = vec![0.0; d + 1];
            for (g, &wv) in grad.iter_mut().zip(row.iter()) {
                *g = lambda * wv;
            }
            for i in 0..n {
                let x = embs.row(i);
                let score: f64 =
                    x.iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>() + row[d];
                if ys[i] * score < 1.0 {
                    let scale = ys[i] / n as f64;
                    for (g, &xv) in grad.iter_mut().zip(x) {
                        *g -= scale * xv;
                    }
                    grad[d] -= scale;
                }
            }
            let eta = 1.0 / (lambda * (t + 1) as f64);
            for (wv, g) in row.iter_mut().zip(&grad) {
                *wv -= eta * g;
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                for wv in row.iter_mut() {
                    *wv *= s;
                }
            }
        }
    }
    Ok(LinearSvm { w, c })
}

pub fn predict_svm(model: &LinearSvm, embs: &Tensor) -> Result<Vec<usize>> {
    let d = model.w.cols - 1;
    if embs.cols != d {
        return Err(Error::contract(
            "predict_svm",
            format!("embedding dim {} vs model dim {d}", embs.cols),
        ));
    }
    let classes = model.w.rows;
    let mut out = Vec::with_capacity(embs.rows);
    for i in 0..embs.rows {
        let x = embs.row(i);
        let mut best = (0usize, f64::NEG_INFINITY);
        for cl in 0..classes {
            let row = model.w.row(cl);
            let score: f64 =
                x.iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>() + row[d];
            if score > best.1 {
                best = (cl, score);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

/// Picks `C` on a 20% inner validation split of the training data (argmax of
/// validation accuracy, earliest grid entry on ties), then retrains on the
/// full training set with the chosen value.
pub fn grid_search_c(
    embs: &Tensor,
    labels: &[usize],
    num_classes: usize,
    iters: usize,
    rng: &mut impl Rng,
) -> Result<(LinearSvm, f64)> {
    check_training_data(embs, labels, num_classes)?;
    let n = embs.rows;
    let n_val = (n / 5).max(1);

    // find an inner split whose training part still has two classes
    let mut idx: Vec<usize> = (0..n).collect();
    let mut split = None;
    for _ in 0..10 {
        idx.shuffle(rng);
        let (val_idx, train_idx) = idx.split_at(n_val);
        let head = labels[train_idx[0]];
        if train_idx.iter().any(|&i| labels[i] != head) {
            split = Some((val_idx.to_vec(), train_idx.to_vec()));
            break;
        }
    }
    let chosen = match split {
        None => 1.0, // inner split degenerate; fall back to C = 1
        Some((val_idx, train_idx)) => {
            let tr_embs = select_rows(embs, &train_idx);
            let tr_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let va_embs = select_rows(embs, &val_idx);
            let va_labels: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
            let mut best = (f64::NEG_INFINITY, SVM_C_GRID[0]);
            for &c in &SVM_C_GRID {
                let model = train_linear_svm(&tr_embs, &tr_labels, num_classes, c, iters)?;
                let acc = accuracy(&predict_svm(&model, &va_embs)?, &va_labels);
                if acc > best.0 {
                    best = (acc, c);
                }
            }
            best.1
        }
    };
    let model = train_linear_svm(embs, labels, num_classes, chosen, iters)?;
    Ok((model, chosen))
}

// ── helpers ─────────────────────────────────────────────────────────────

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len() as f64
}

pub fn select_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(idx.len(), t.cols);
    for (r, &i) in idx.iter().enumerate() {
        out.data[r * t.cols..(r + 1) * t.cols].copy_from_slice(t.row(i));
    }
    out
}
