//! InfoNCE mutual-information estimator over paired row embeddings.
//!
//! For rows `z_{i,1}` of `z1` and `z_{i,2}` of `z2`,
//!
//! ```text
//! I0(z_{i,1}; z_{i,2}) = s_ii / eps - log sum_{j != i} exp(s_ij / eps)
//! I_hat = (1/N) sum_i 0.5 * (I0(z_{i,1}; z_{i,2}) + I0(z_{i,2}; z_{i,1}))
//! ```
//!
//! with `s` the cosine-similarity matrix between the two sides. The positive
//! pair is excluded from the denominator; `include_positive` restores the
//! conventional form for sensitivity studies. Log-sum-exp is computed with a
//! per-row max shift, which changes nothing analytically (the shift is a
//! constant) but keeps `exp` bounded.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

pub fn infonce(
    tape: &mut Tape,
    z1: Var,
    z2: Var,
    eps: f64,
    include_positive: bool,
) -> Result<Var> {
    let (t1, t2) = (tape.value(z1), tape.value(z2));
    if !t1.same_shape(t2) {
        return Err(Error::Shape {
            op: "infonce",
            left_rows: t1.rows,
            left_cols: t1.cols,
            right_rows: t2.rows,
            right_cols: t2.cols,
        });
    }
    let n = t1.rows;
    if n < 2 {
        return Err(Error::contract(
            "infonce",
            "need at least 2 rows for the negative sum",
        ));
    }
    if eps <= 0.0 {
        return Err(Error::domain("infonce", "temperature must be positive"));
    }

    let zn1 = tape.row_l2_normalize(z1)?;
    let zn2 = tape.row_l2_normalize(z2)?;
    let zt = tape.transpose(zn2);
    let sim = tape.matmul(zn1, zt)?;
    let t = tape.scale(sim, 1.0 / eps);

    let fwd = directional(tape, t, n, include_positive)?;
    let tt = tape.transpose(t);
    let bwd = directional(tape, tt, n, include_positive)?;

    let both = tape.add(fwd, bwd)?;
    let half = tape.scale(both, 0.5);
    tape.mean(half)
}

/// Per-row `t_ii - logsumexp over masked columns` for one direction.
fn directional(tape: &mut Tape, t: Var, n: usize, include_positive: bool) -> Result<Var> {
    let eye = Tensor::identity(n);
    let mask = if include_positive {
        Tensor::ones(n, n)
    } else {
        let mut m = Tensor::ones(n, n);
        for i in 0..n {
            m.data[i * n + i] = 0.0;
        }
        m
    };

    // row maxima over masked entries, treated as additive constants
    let tv = tape.value(t);
    let mut shift = Tensor::zeros(n, 1);
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        for j in 0..n {
            if mask.data[i * n + j] != 0.0 {
                best = best.max(tv.data[i * n + j]);
            }
        }
        shift.data[i] = best;
    }

    let eye_v = tape.constant(eye);
    let diag_prod = tape.hadamard(t, eye_v)?;
    let diag = tape.row_sum(diag_prod)?;

    let shift_v = tape.constant(shift);
    let shifted = tape.sub(t, shift_v)?;
    let e = tape.exp(shifted);
    let mask_v = tape.constant(mask);
    let masked = tape.hadamard(e, mask_v)?;
    let denom = tape.row_sum(masked)?;
    let log_denom = tape.log(denom)?;
    let lse = tape.add(log_denom, shift_v)?;
    tape.sub(diag, lse)
}

/// Detached evaluation on plain tensors.
pub fn infonce_value(z1: &Tensor, z2: &Tensor, eps: f64, include_positive: bool) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(z1.clone());
    let b = tape.constant(z2.clone());
    let v = infonce(&mut tape, a, b, eps, include_positive)?;
    tape.value(v).item()
}
