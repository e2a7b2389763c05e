use rand::Rng;

use crate::error::{Error, Result};

use super::Tensor;

/// Adam with bias correction; moment arrays are allocated lazily on the
/// first step and shape-checked on every later one.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    /// One update over all `params`; every tensor must carry a gradient,
    /// which is cleared after the step.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![0.0; p.data.len()], vec![0.0; p.data.len()]))
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::contract(
                "adam_step",
                format!(
                    "optimizer tracks {} parameters, got {}",
                    self.moments.len(),
                    params.len()
                ),
            ));
        }
        // validate before mutating anything so a failed call leaves the
        // optimizer state untouched
        for (p, (m, _)) in params.iter().zip(&self.moments) {
            if m.len() != p.data.len() {
                return Err(Error::contract(
                    "adam_step",
                    "parameter shape changed between steps",
                ));
            }
            if p.grad.is_none() {
                return Err(Error::contract("adam_step", "parameter has no gradient"));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let g = p.grad.as_ref().expect("validated above");
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.data[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
            }
            p.grad = None;
        }
        Ok(())
    }
}

/// Plain gradient descent step; gradients are cleared afterwards.
pub fn sgd_step(params: &mut [&mut Tensor], lr: f64) -> Result<()> {
    for p in params.iter_mut() {
        let g = p
            .grad
            .as_ref()
            .ok_or_else(|| Error::contract("sgd_step", "parameter has no gradient"))?;
        for i in 0..g.len() {
            p.data[i] -= lr * g[i];
        }
        p.grad = None;
    }
    Ok(())
}

/// Ascent variant used by the adversary updates (`p += lr * grad`).
pub fn sgd_step_ascend(params: &mut [&mut Tensor], lr: f64) -> Result<()> {
    for p in params.iter_mut() {
        let g = p
            .grad
            .as_ref()
            .ok_or_else(|| Error::contract("sgd_step", "parameter has no gradient"))?;
        for i in 0..g.len() {
            p.data[i] += lr * g[i];
        }
        p.grad = None;
    }
    Ok(())
}

/// Uniform Xavier/Glorot initialization in +-sqrt(6 / (rows + cols)).
pub fn xavier_init(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::domain(
            "xavier_init",
            format!("dimensions must be positive, got {rows}x{cols}"),
        ));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut t = Tensor::new(rows, cols, data)?;
    t.requires_grad = true;
    Ok(t)
}
