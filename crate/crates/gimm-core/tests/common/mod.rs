//! Shared helpers for the integration suites.

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gimm_core::tensor::{Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape by construction")
}

/// Vendored datasets live at the workspace root; `GIMM_DATA_DIR` overrides.
pub fn data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("GIMM_DATA_DIR") {
        return PathBuf::from(dir);
    }
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.pop();
    p.pop();
    p.join("data")
}

/// Central finite differences of a scalar function of several tensors.
pub fn fd_grad(
    f: &mut dyn FnMut(&[Tensor]) -> f64,
    inputs: &[Tensor],
    h: f64,
) -> Vec<Vec<f64>> {
    let mut grads = Vec::new();
    for ti in 0..inputs.len() {
        let mut g = vec![0.0; inputs[ti].data.len()];
        for ei in 0..g.len() {
            let mut plus = inputs.to_vec();
            plus[ti].data[ei] += h;
            let mut minus = inputs.to_vec();
            minus[ti].data[ei] -= h;
            g[ei] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Relative error with a unit floor, so near-zero gradients compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs().max(b.abs()))
}

/// Checks autodiff gradients of `build` against central finite differences
/// for every input, and returns the worst relative error.
pub fn max_grad_err(inputs: &[Tensor], build: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let tracked: Vec<Tensor> = inputs.iter().map(|t| t.clone().with_grad()).collect();
    let mut eval = |ts: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.leaf(t)).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item().expect("scalar loss")
    };
    let fd = fd_grad(&mut eval, &tracked, 1e-5);

    let mut tape = Tape::new();
    let vars: Vec<Var> = tracked.iter().map(|t| tape.leaf(t)).collect();
    let out = build(&mut tape, &vars);
    tape.backward(out).expect("backward");
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let auto = tape.grad(*v).expect("tracked gradient");
        for (a, b) in auto.iter().zip(&fd[i]) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    worst
}
