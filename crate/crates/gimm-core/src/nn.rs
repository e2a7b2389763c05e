//! Small parameterized layers shared by the generator and the encoders.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{xavier_init, Tape, Tensor, Var};

/// Affine map `x * w + b` with Xavier-initialized weights.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Tensor,
    pub b: Option<Tensor>,
}

impl Linear {
    pub fn xavier(in_dim: usize, out_dim: usize, bias: bool, rng: &mut impl Rng) -> Result<Self> {
        let w = xavier_init(in_dim, out_dim, rng)?;
        // uniform +-1/sqrt(in) bias; a nonzero bias keeps embedding rows of
        // isolated or fully-masked nodes away from exact zero, which the
        // cosine-similarity path rejects
        let b = if bias {
            let bound = 1.0 / (in_dim as f64).sqrt();
            let data = (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect();
            Some(Tensor::new(1, out_dim, data)?.with_grad())
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.w];
        if let Some(b) = &self.b {
            p.push(b);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.w];
        if let Some(b) = &mut self.b {
            p.push(b);
        }
        p
    }

    pub fn bind(&self, tape: &mut Tape) -> LinearVars {
        LinearVars {
            w: tape.leaf(&self.w),
            b: self.b.as_ref().map(|b| tape.leaf(b)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub w: Var,
    pub b: Option<Var>,
}

impl LinearVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul(x, self.w)?;
        match self.b {
            Some(b) => tape.add(y, b),
            None => Ok(y),
        }
    }
}

/// Multi-layer perceptron: linear layers with relu between, linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, hidden..., out]`; one linear layer per consecutive pair.
    pub fn xavier(dims: &[usize], bias: bool, rng: &mut impl Rng) -> Result<Self> {
        let layers = dims
            .windows(2)
            .map(|w| Linear::xavier(w[0], w[1], bias, rng))
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self.layers.iter().map(|l| l.bind(tape)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpVars {
    pub layers: Vec<LinearVars>,
}

impl MlpVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Collects tape gradients into the parameter tensors of a model.
///
/// `vars` and `params` must be parallel (same order as `bind`/`params_mut`).
pub fn pull_grads(tape: &Tape, vars: &[Var], params: &mut [&mut Tensor]) -> Result<()> {
    debug_assert_eq!(vars.len(), params.len());
    for (v, p) in vars.iter().zip(params.iter_mut()) {
        tape.accumulate_grad_into(*v, p)?;
    }
    Ok(())
}

/// Flattens the vars of a bound model in `params_mut` order.
pub fn linear_vars(vars: &LinearVars) -> Vec<Var> {
    let mut v = vec![vars.w];
    if let Some(b) = vars.b {
        v.push(b);
    }
    v
}

pub fn mlp_vars(vars: &MlpVars) -> Vec<Var> {
    vars.layers.iter().flat_map(linear_vars).collect()
}
