use std::sync::Arc;

use crate::error::{Error, Result};

use super::{canonical_sum, mm_nn_acc, mm_nt_acc, mm_tn_acc, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwKind {
    Add,
    Sub,
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryKind {
    Sigmoid,
    Relu,
    Log,
    Exp,
    Neg,
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    RowSum,
    RowMean,
}

/// How the right operand of an elementwise op is broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    None,
    /// b is 1 x 1, repeated everywhere.
    Scalar,
    /// b is 1 x cols, repeated down the rows.
    Row,
    /// b is rows x 1, repeated across the columns.
    Col,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
    },
    Transpose {
        a: usize,
    },
    Elementwise {
        a: usize,
        b: usize,
        kind: EwKind,
        bcast: Bcast,
    },
    Unary {
        a: usize,
        kind: UnaryKind,
    },
    ConcatCols {
        a: usize,
        b: usize,
    },
    Reduce {
        a: usize,
        kind: ReduceKind,
    },
    RowL2Normalize {
        a: usize,
        norms: Vec<f64>,
    },
    /// out[u, :] += w[k] * h[v, :] for every edge k = (u, v).
    AdjMatMul {
        w: usize,
        h: usize,
        edges: Arc<Vec<(u32, u32)>>,
    },
    GatherRows {
        a: usize,
        idx: Arc<Vec<u32>>,
    },
    SegmentSum {
        a: usize,
        map: Arc<Vec<u32>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires: bool,
}

/// Record of primitive operations in topological order.
///
/// Forward values are computed eagerly as ops are recorded; `backward`
/// walks the record once in reverse, accumulating gradients into every
/// node that (transitively) depends on a `requires_grad` leaf.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Option<Vec<Option<Vec<f64>>>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a copy of `t` as an input; it is tracked iff `t.requires_grad`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let requires = t.requires_grad;
        self.push(t.clone(), Op::Leaf, requires)
    }

    /// Registers an untracked input value.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn req(&self, v: Var) -> bool {
        self.nodes[v.0].requires
    }

    // ── Forward ops ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.cols != tb.rows {
            return Err(Error::Shape {
                op: "matmul",
                left_rows: ta.rows,
                left_cols: ta.cols,
                right_rows: tb.rows,
                right_cols: tb.cols,
            });
        }
        let (m, k, n) = (ta.rows, ta.cols, tb.cols);
        let mut out = Tensor::zeros(m, n);
        mm_nn_acc(&mut out.data, &ta.data, &tb.data, m, k, n);
        let requires = self.req(a) || self.req(b);
        Ok(self.push(out, Op::MatMul { a: a.0, b: b.0 }, requires))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.transposed();
        let requires = self.req(a);
        self.push(out, Op::Transpose { a: a.0 }, requires)
    }

    pub fn elementwise(&mut self, a: Var, b: Var, kind: EwKind) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let bcast = if ta.rows == tb.rows && ta.cols == tb.cols {
            Bcast::None
        } else if tb.rows == 1 && tb.cols == 1 {
            Bcast::Scalar
        } else if tb.rows == 1 && tb.cols == ta.cols {
            Bcast::Row
        } else if tb.cols == 1 && tb.rows == ta.rows {
            Bcast::Col
        } else {
            return Err(Error::Shape {
                op: "elementwise",
                left_rows: ta.rows,
                left_cols: ta.cols,
                right_rows: tb.rows,
                right_cols: tb.cols,
            });
        };
        let mut out = Tensor::zeros(ta.rows, ta.cols);
        let cols = ta.cols;
        for r in 0..ta.rows {
            for c in 0..cols {
                let av = ta.data[r * cols + c];
                let bv = match bcast {
                    Bcast::None => tb.data[r * cols + c],
                    Bcast::Scalar => tb.data[0],
                    Bcast::Row => tb.data[c],
                    Bcast::Col => tb.data[r],
                };
                out.data[r * cols + c] = match kind {
                    EwKind::Add => av + bv,
                    EwKind::Sub => av - bv,
                    EwKind::Hadamard => av * bv,
                };
            }
        }
        let requires = self.req(a) || self.req(b);
        Ok(self.push(
            out,
            Op::Elementwise {
                a: a.0,
                b: b.0,
                kind,
                bcast,
            },
            requires,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, EwKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, EwKind::Sub)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, EwKind::Hadamard)
    }

    pub fn unary(&mut self, a: Var, kind: UnaryKind) -> Result<Var> {
        let ta = &self.nodes[a.0].value;
        if kind == UnaryKind::Log {
            if let Some(pos) = ta.data.iter().position(|v| *v <= 0.0) {
                return Err(Error::domain(
                    "log",
                    format!("non-positive entry {} at index {pos}", ta.data[pos]),
                ));
            }
        }
        let data: Vec<f64> = ta
            .data
            .iter()
            .map(|&x| match kind {
                UnaryKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
                UnaryKind::Relu => {
                    if x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }
                UnaryKind::Log => x.ln(),
                UnaryKind::Exp => x.exp(),
                UnaryKind::Neg => -x,
                UnaryKind::Scale(c) => c * x,
            })
            .collect();
        let out = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data,
            requires_grad: false,
            grad: None,
        };
        let requires = self.req(a);
        Ok(self.push(out, Op::Unary { a: a.0, kind }, requires))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Sigmoid).expect("sigmoid is total")
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Relu).expect("relu is total")
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Log)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Exp).expect("exp is total")
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Neg).expect("neg is total")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, UnaryKind::Scale(c)).expect("scale is total")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.rows != tb.rows {
            return Err(Error::Shape {
                op: "concat_cols",
                left_rows: ta.rows,
                left_cols: ta.cols,
                right_rows: tb.rows,
                right_cols: tb.cols,
            });
        }
        let (rows, ca, cb) = (ta.rows, ta.cols, tb.cols);
        let mut out = Tensor::zeros(rows, ca + cb);
        for r in 0..rows {
            out.data[r * (ca + cb)..r * (ca + cb) + ca]
                .copy_from_slice(&ta.data[r * ca..(r + 1) * ca]);
            out.data[r * (ca + cb) + ca..(r + 1) * (ca + cb)]
                .copy_from_slice(&tb.data[r * cb..(r + 1) * cb]);
        }
        let requires = self.req(a) || self.req(b);
        Ok(self.push(out, Op::ConcatCols { a: a.0, b: b.0 }, requires))
    }

    pub fn reduce(&mut self, a: Var, kind: ReduceKind) -> Result<Var> {
        let ta = &self.nodes[a.0].value;
        if ta.data.is_empty() {
            return Err(Error::domain("reduce", "empty tensor"));
        }
        let out = match kind {
            ReduceKind::Sum => Tensor::scalar(ta.data.iter().sum()),
            ReduceKind::Mean => Tensor::scalar(ta.data.iter().sum::<f64>() / ta.data.len() as f64),
            ReduceKind::RowSum | ReduceKind::RowMean => {
                let mut out = Tensor::zeros(ta.rows, 1);
                for r in 0..ta.rows {
                    let s: f64 = ta.row(r).iter().sum();
                    out.data[r] = if kind == ReduceKind::RowMean {
                        s / ta.cols as f64
                    } else {
                        s
                    };
                }
                out
            }
        };
        let requires = self.req(a);
        Ok(self.push(out, Op::Reduce { a: a.0, kind }, requires))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(a, ReduceKind::Sum)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(a, ReduceKind::Mean)
    }

    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(a, ReduceKind::RowSum)
    }

    pub fn row_l2_normalize(&mut self, a: Var) -> Result<Var> {
        let ta = &self.nodes[a.0].value;
        let mut norms = Vec::with_capacity(ta.rows);
        for r in 0..ta.rows {
            let n = ta.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-12 {
                return Err(Error::DegenerateRow {
                    op: "row_l2_normalize",
                    row: r,
                });
            }
            norms.push(n);
        }
        let mut out = Tensor::zeros(ta.rows, ta.cols);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                out.data[r * ta.cols + c] = ta.data[r * ta.cols + c] / norms[r];
            }
        }
        let requires = self.req(a);
        Ok(self.push(out, Op::RowL2Normalize { a: a.0, norms }, requires))
    }

    /// Sparse-pattern product of an edge-weighted adjacency with `h`:
    /// `out[u, :] += w[k] * h[v, :]` for edge `k = (u, v)`.
    ///
    /// Numerically this is `A_w * h` for the dense matrix with `A_w[u, v] = w[k]`
    /// and zeros elsewhere (parallel edges sum). Per-row accumulation uses a
    /// canonical value order, so the output is exactly equivariant under node
    /// permutations that preserve edge multiplicity.
    pub fn adj_matmul(&mut self, w: Var, h: Var, edges: Arc<Vec<(u32, u32)>>) -> Result<Var> {
        let (tw, th) = (&self.nodes[w.0].value, &self.nodes[h.0].value);
        if tw.rows != edges.len() || tw.cols != 1 {
            return Err(Error::contract(
                "adj_matmul",
                format!(
                    "weights must be {}x1 (one per edge), got {}x{}",
                    edges.len(),
                    tw.rows,
                    tw.cols
                ),
            ));
        }
        let (n, d) = (th.rows, th.cols);
        for &(u, v) in edges.iter() {
            if u as usize >= n || v as usize >= n {
                return Err(Error::contract(
                    "adj_matmul",
                    format!("edge ({u}, {v}) out of range for {n} nodes"),
                ));
            }
        }
        // group incoming edges by target row
        let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &(u, _)) in edges.iter().enumerate() {
            by_target[u as usize].push(k);
        }
        let mut out = Tensor::zeros(n, d);
        let mut scratch = Vec::new();
        for (u, incoming) in by_target.iter().enumerate() {
            if incoming.is_empty() {
                continue;
            }
            for c in 0..d {
                scratch.clear();
                for &k in incoming {
                    let v = edges[k].1 as usize;
                    scratch.push(tw.data[k] * th.data[v * d + c]);
                }
                out.data[u * d + c] = canonical_sum(&mut scratch);
            }
        }
        let requires = self.req(w) || self.req(h);
        Ok(self.push(
            out,
            Op::AdjMatMul {
                w: w.0,
                h: h.0,
                edges,
            },
            requires,
        ))
    }

    /// `out[r, :] = a[idx[r], :]`; the backward pass scatter-adds.
    pub fn gather_rows(&mut self, a: Var, idx: Arc<Vec<u32>>) -> Result<Var> {
        let ta = &self.nodes[a.0].value;
        let d = ta.cols;
        let mut out = Tensor::zeros(idx.len(), d);
        for (r, &i) in idx.iter().enumerate() {
            if i as usize >= ta.rows {
                return Err(Error::contract(
                    "gather_rows",
                    format!("row index {i} out of range for {} rows", ta.rows),
                ));
            }
            out.data[r * d..(r + 1) * d].copy_from_slice(ta.row(i as usize));
        }
        let requires = self.req(a);
        Ok(self.push(out, Op::GatherRows { a: a.0, idx }, requires))
    }

    /// Per-segment row sums: `out[s, :] = sum over rows i with map[i] == s`.
    ///
    /// Accumulation order is canonical in the summand values, making the
    /// result exactly invariant under permutations of rows within a segment.
    pub fn segment_sum(&mut self, a: Var, map: Arc<Vec<u32>>, segments: usize) -> Result<Var> {
        let ta = &self.nodes[a.0].value;
        if map.len() != ta.rows {
            return Err(Error::contract(
                "segment_sum",
                format!("map covers {} rows, tensor has {}", map.len(), ta.rows),
            ));
        }
        if let Some(&bad) = map.iter().find(|&&s| s as usize >= segments) {
            return Err(Error::contract(
                "segment_sum",
                format!("segment id {bad} out of range for {segments} segments"),
            ));
        }
        let d = ta.cols;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); segments];
        for (i, &s) in map.iter().enumerate() {
            members[s as usize].push(i);
        }
        let mut out = Tensor::zeros(segments, d);
        let mut scratch = Vec::new();
        for (s, rows) in members.iter().enumerate() {
            for c in 0..d {
                scratch.clear();
                for &i in rows {
                    scratch.push(ta.data[i * d + c]);
                }
                out.data[s * d + c] = canonical_sum(&mut scratch);
            }
        }
        let requires = self.req(a);
        Ok(self.push(out, Op::SegmentSum { a: a.0, map }, requires))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Accumulates gradients of the scalar `loss` into every tracked node.
    ///
    /// Visits each node exactly once, in reverse topological order. Calling
    /// `backward` twice on the same tape is a contract error.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.grads.is_some() {
            return Err(Error::contract(
                "backward",
                "tape already consumed by a previous backward call",
            ));
        }
        {
            let lt = &self.nodes[loss.0].value;
            if lt.rows != 1 || lt.cols != 1 {
                return Err(Error::contract(
                    "backward",
                    format!("loss must be 1x1, got {}x{}", lt.rows, lt.cols),
                ));
            }
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires {
                grads[i] = None;
                continue;
            }
            let Some(d) = grads[i].take() else { continue };
            self.propagate(i, &d, &mut grads);
            grads[i] = Some(d);
        }
        self.grads = Some(grads);
        Ok(())
    }

    fn propagate(&self, i: usize, d: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        let mut acc = |j: usize, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[j].requires {
                return;
            }
            let t = &self.nodes[j].value;
            let g = grads[j].get_or_insert_with(|| vec![0.0; t.data.len()]);
            f(g);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                // dA += dC * B^T, dB += A^T * dC
                acc(*a, &mut |g| mm_nt_acc(g, d, &tb.data, m, n, k));
                acc(*b, &mut |g| mm_tn_acc(g, &ta.data, d, k, m, n));
            }
            Op::Transpose { a } => {
                let ta = val(*a);
                let (r, c) = (ta.rows, ta.cols);
                acc(*a, &mut |g| {
                    for i2 in 0..r {
                        for j2 in 0..c {
                            g[i2 * c + j2] += d[j2 * r + i2];
                        }
                    }
                });
            }
            Op::Elementwise { a, b, kind, bcast } => {
                let (ta, tb) = (val(*a), val(*b));
                let (rows, cols) = (ta.rows, ta.cols);
                acc(*a, &mut |g| match kind {
                    EwKind::Add | EwKind::Sub => {
                        for (gv, dv) in g.iter_mut().zip(d) {
                            *gv += dv;
                        }
                    }
                    EwKind::Hadamard => {
                        for r in 0..rows {
                            for c in 0..cols {
                                let bv = match bcast {
                                    Bcast::None => tb.data[r * cols + c],
                                    Bcast::Scalar => tb.data[0],
                                    Bcast::Row => tb.data[c],
                                    Bcast::Col => tb.data[r],
                                };
                                g[r * cols + c] += d[r * cols + c] * bv;
                            }
                        }
                    }
                });
                let sign = if *kind == EwKind::Sub { -1.0 } else { 1.0 };
                acc(*b, &mut |g| {
                    for r in 0..rows {
                        for c in 0..cols {
                            let contrib = match kind {
                                EwKind::Add | EwKind::Sub => sign * d[r * cols + c],
                                EwKind::Hadamard => d[r * cols + c] * ta.data[r * cols + c],
                            };
                            match bcast {
                                Bcast::None => g[r * cols + c] += contrib,
                                Bcast::Scalar => g[0] += contrib,
                                Bcast::Row => g[c] += contrib,
                                Bcast::Col => g[r] += contrib,
                            }
                        }
                    }
                });
            }
            Op::Unary { a, kind } => {
                let (ta, ty) = (val(*a), &node.value);
                acc(*a, &mut |g| {
                    for idx in 0..g.len() {
                        let local = match kind {
                            UnaryKind::Sigmoid => ty.data[idx] * (1.0 - ty.data[idx]),
                            UnaryKind::Relu => {
                                if ta.data[idx] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            UnaryKind::Log => 1.0 / ta.data[idx],
                            UnaryKind::Exp => ty.data[idx],
                            UnaryKind::Neg => -1.0,
                            UnaryKind::Scale(c) => *c,
                        };
                        g[idx] += d[idx] * local;
                    }
                });
            }
            Op::ConcatCols { a, b } => {
                let (ca, cb) = (val(*a).cols, val(*b).cols);
                let rows = val(*a).rows;
                acc(*a, &mut |g| {
                    for r in 0..rows {
                        for c in 0..ca {
                            g[r * ca + c] += d[r * (ca + cb) + c];
                        }
                    }
                });
                acc(*b, &mut |g| {
                    for r in 0..rows {
                        for c in 0..cb {
                            g[r * cb + c] += d[r * (ca + cb) + ca + c];
                        }
                    }
                });
            }
            Op::Reduce { a, kind } => {
                let ta = val(*a);
                let (rows, cols) = (ta.rows, ta.cols);
                acc(*a, &mut |g| match kind {
                    ReduceKind::Sum => g.iter_mut().for_each(|gv| *gv += d[0]),
                    ReduceKind::Mean => {
                        let s = d[0] / (rows * cols) as f64;
                        g.iter_mut().for_each(|gv| *gv += s);
                    }
                    ReduceKind::RowSum => {
                        for r in 0..rows {
                            for c in 0..cols {
                                g[r * cols + c] += d[r];
                            }
                        }
                    }
                    ReduceKind::RowMean => {
                        for r in 0..rows {
                            for c in 0..cols {
                                g[r * cols + c] += d[r] / cols as f64;
                            }
                        }
                    }
                });
            }
            Op::RowL2Normalize { a, norms } => {
                let ty = &node.value;
                let (rows, cols) = (ty.rows, ty.cols);
                acc(*a, &mut |g| {
                    for r in 0..rows {
                        let y = &ty.data[r * cols..(r + 1) * cols];
                        let dr = &d[r * cols..(r + 1) * cols];
                        let dot: f64 = y.iter().zip(dr).map(|(yv, dv)| yv * dv).sum();
                        for c in 0..cols {
                            g[r * cols + c] += (dr[c] - y[c] * dot) / norms[r];
                        }
                    }
                });
            }
            Op::AdjMatMul { w, h, edges } => {
                let (tw, th) = (val(*w), val(*h));
                let cols = th.cols;
                acc(*w, &mut |g| {
                    for (k, &(u, v)) in edges.iter().enumerate() {
                        let du = &d[u as usize * cols..(u as usize + 1) * cols];
                        let hv = th.row(v as usize);
                        g[k] += du.iter().zip(hv).map(|(a2, b2)| a2 * b2).sum::<f64>();
                    }
                });
                acc(*h, &mut |g| {
                    for (k, &(u, v)) in edges.iter().enumerate() {
                        let wk = tw.data[k];
                        let du = &d[u as usize * cols..(u as usize + 1) * cols];
                        let gv = &mut g[v as usize * cols..(v as usize + 1) * cols];
                        for (gvc, duc) in gv.iter_mut().zip(du) {
                            *gvc += wk * duc;
                        }
                    }
                });
            }
            Op::GatherRows { a, idx } => {
                let cols = val(*a).cols;
                acc(*a, &mut |g| {
                    for (r, &i2) in idx.iter().enumerate() {
                        let src = &d[r * cols..(r + 1) * cols];
                        let dst = &mut g[i2 as usize * cols..(i2 as usize + 1) * cols];
                        for (gv, dv) in dst.iter_mut().zip(src) {
                            *gv += dv;
                        }
                    }
                });
            }
            Op::SegmentSum { a, map } => {
                let cols = val(*a).cols;
                acc(*a, &mut |g| {
                    for (i2, &s) in map.iter().enumerate() {
                        let src = &d[s as usize * cols..(s as usize + 1) * cols];
                        let dst = &mut g[i2 * cols..(i2 + 1) * cols];
                        for (gv, dv) in dst.iter_mut().zip(src) {
                            *gv += dv;
                        }
                    }
                });
            }
        }
    }

    /// Gradient of the last `backward` loss w.r.t. node `v`, if tracked.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.as_ref()?.get(v.0)?.as_deref()
    }

    /// Adds the tape gradient of `v` into `t.grad` (creating it if absent).
    pub fn accumulate_grad_into(&self, v: Var, t: &mut Tensor) -> Result<()> {
        let node_val = &self.nodes[v.0].value;
        if !node_val.same_shape(t) {
            return Err(Error::contract(
                "accumulate_grad_into",
                format!(
                    "node is {}x{}, tensor is {}x{}",
                    node_val.rows, node_val.cols, t.rows, t.cols
                ),
            ));
        }
        let g = self.grad(v).ok_or_else(|| {
            Error::contract("accumulate_grad_into", "no gradient: backward not run or node untracked")
        })?;
        let dst = t.grad.get_or_insert_with(|| vec![0.0; t.data.len()]);
        for (dv, gv) in dst.iter_mut().zip(g) {
            *dv += gv;
        }
        Ok(())
    }
}
