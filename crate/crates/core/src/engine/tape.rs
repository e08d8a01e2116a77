use rand::Rng;

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, log_sum_exp, sigmoid};
use super::{Gradients, ParamId, ParamStore, Tensor, TensorError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
struct LstmCache {
    hidden: usize,
    /// Activated gates `[i | f | g | o]` per time step, `[n x 4h]`.
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Rows { param: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Sqrt(Var),
    Softmax { src: Var, axis: usize },
    Normalize { src: Var, axis: usize },
    Sum { src: Var, axis: Option<usize>, scale: f64 },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { src: Var, axis: usize, start: usize },
    Select { src: Var, indices: Vec<usize> },
    Max { src: Var, index: usize },
    Mask { src: Var, mask: Vec<f64> },
    SoftmaxXent { logits: Var, targets: Vec<f64>, probs: Vec<f64> },
    Cosine { a: Var, b: Var, floor: f64 },
    Lstm { xw: Var, recurrent: Var, reverse: bool, cache: LstmCache },
}

#[derive(Debug)]
struct Node {
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of a computation over a borrowed [`ParamStore`].
///
/// Nodes are appended in execution order, which is always a valid
/// topological order; [`Tape::backward`] replays them in reverse.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn check_axis(op: &'static str, axis: usize) -> Result<(), TensorError> {
    if axis > 1 {
        Err(TensorError::InvalidAxis { op, axis })
    } else {
        Ok(())
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Leaf for a whole parameter tensor. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Gathers rows of a parameter matrix (embedding lookup). Gradients are
    /// scattered back into the selected rows only.
    pub fn rows(&mut self, id: ParamId, rows: &[usize]) -> Result<Var, TensorError> {
        let table = self.params.get(id);
        let cols = table.cols();
        if rows.is_empty() {
            return Err(TensorError::InvalidShape(vec![0, cols]));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= table.rows() {
                return Err(TensorError::OutOfBounds {
                    op: "rows",
                    index: r,
                    extent: table.rows(),
                });
            }
            data.extend_from_slice(table.row_slice(r));
        }
        let value = Tensor::from_parts(rows.len(), cols, data);
        Ok(self.push(
            value,
            Op::Rows {
                param: id,
                rows: rows.to_vec(),
            },
            true,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(m, n, out), Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (m, n) = (t.rows(), t.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = t.data()[i * n + j];
            }
        }
        let rg = self.rg(a);
        self.push(Tensor::from_parts(n, m, out), Op::Transpose(a), rg)
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        self.same_shape(op_name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(ta.rows(), ta.cols(), data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Adds a `[1 x n]` row to every row of an `[m x n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: ta.shape().to_vec(),
                right: tr.shape().to_vec(),
            });
        }
        let n = ta.cols();
        let mut data = ta.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, &b) in chunk.iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        let value = Tensor::from_parts(ta.rows(), n, data);
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::from_parts(t.rows(), t.cols(), data);
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, f64::sqrt, Op::Sqrt(a))
    }

    /// Softmax along `axis`: 1 normalises each row, 0 each column.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        check_axis("softmax", axis)?;
        let t = self.value(a);
        let value = along_axis(t, axis, |lane| {
            let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut out: Vec<f64> = lane.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= s);
            out
        });
        let rg = self.rg(a);
        Ok(self.push(value, Op::Softmax { src: a, axis }, rg))
    }

    /// Divides every entry by the sum of its lane along `axis`. Inputs are
    /// expected to be strictly positive.
    pub fn normalize(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        check_axis("normalize", axis)?;
        let t = self.value(a);
        let value = along_axis(t, axis, |lane| {
            let s: f64 = lane.iter().sum();
            lane.iter().map(|v| v / s).collect()
        });
        let rg = self.rg(a);
        Ok(self.push(value, Op::Normalize { src: a, axis }, rg))
    }

    fn reduce(&mut self, a: Var, axis: Option<usize>, mean: bool) -> Result<Var, TensorError> {
        let t = self.value(a);
        let (m, n) = (t.rows(), t.cols());
        let (value, count) = match axis {
            None => (Tensor::scalar(t.data().iter().sum()), m * n),
            Some(0) => {
                let mut out = vec![0.0; n];
                for r in t.data().chunks(n) {
                    out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
                }
                (Tensor::from_parts(1, n, out), m)
            }
            Some(1) => {
                let out = t.data().chunks(n).map(|r| r.iter().sum()).collect();
                (Tensor::from_parts(m, 1, out), n)
            }
            Some(axis) => return Err(TensorError::InvalidAxis { op: "reduce", axis }),
        };
        let scale = if mean { 1.0 / count as f64 } else { 1.0 };
        let value = if mean {
            let (r, c) = (value.rows(), value.cols());
            Tensor::from_parts(r, c, value.into_data().into_iter().map(|v| v * scale).collect())
        } else {
            value
        };
        let rg = self.rg(a);
        Ok(self.push(value, Op::Sum { src: a, axis, scale }, rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        self.reduce(a, None, false).expect("full reduction is infallible")
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        self.reduce(a, None, true).expect("full reduction is infallible")
    }

    /// Sum along `axis`; axis 0 collapses rows to `[1 x n]`, axis 1 columns to `[m x 1]`.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        self.reduce(a, Some(axis), false)
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        self.reduce(a, Some(axis), true)
    }

    /// Concatenates along `axis` (0 stacks rows, 1 joins columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        check_axis("concat", axis)?;
        let first = match parts.first() {
            Some(&v) => self.value(v),
            None => return Err(TensorError::EmptyAxis { op: "concat" }),
        };
        let (m0, n0) = (first.rows(), first.cols());
        for &p in &parts[1..] {
            let t = self.value(p);
            let ok = if axis == 0 { t.cols() == n0 } else { t.rows() == m0 };
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: first.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
        }
        let value = if axis == 0 {
            let mut data = Vec::new();
            let mut rows = 0;
            for &p in parts {
                let t = self.value(p);
                rows += t.rows();
                data.extend_from_slice(t.data());
            }
            Tensor::from_parts(rows, n0, data)
        } else {
            let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
            let mut data = Vec::with_capacity(m0 * cols);
            for r in 0..m0 {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row_slice(r));
                }
            }
            Tensor::from_parts(m0, cols, data)
        };
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Contiguous block of `len` rows (axis 0) or columns (axis 1).
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, TensorError> {
        check_axis("slice", axis)?;
        let t = self.value(a);
        let extent = t.shape()[axis];
        if len == 0 || start + len > extent {
            return Err(TensorError::OutOfBounds {
                op: "slice",
                index: start + len,
                extent,
            });
        }
        let n = t.cols();
        let value = if axis == 0 {
            Tensor::from_parts(len, n, t.data()[start * n..(start + len) * n].to_vec())
        } else {
            let mut data = Vec::with_capacity(t.rows() * len);
            for r in 0..t.rows() {
                data.extend_from_slice(&t.row_slice(r)[start..start + len]);
            }
            Tensor::from_parts(t.rows(), len, data)
        };
        let rg = self.rg(a);
        Ok(self.push(value, Op::Slice { src: a, axis, start }, rg))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var, TensorError> {
        self.slice(a, 0, r, 1)
    }

    pub fn col(&mut self, a: Var, c: usize) -> Result<Var, TensorError> {
        self.slice(a, 1, c, 1)
    }

    /// Picks entries by flat row-major index into a `[1 x k]` row.
    pub fn select(&mut self, a: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(a);
        if indices.is_empty() {
            return Err(TensorError::EmptyAxis { op: "select" });
        }
        let mut data = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= t.len() {
                return Err(TensorError::OutOfBounds {
                    op: "select",
                    index: i,
                    extent: t.len(),
                });
            }
            data.push(t.data()[i]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::row(data),
            Op::Select {
                src: a,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Maximum over all entries; the gradient flows to the first maximiser.
    pub fn max_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let index = super::tensor::argmax(t.data());
        let value = Tensor::scalar(t.data()[index]);
        let rg = self.rg(a);
        self.push(value, Op::Max { src: a, index }, rg)
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidRate(rate));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let len = self.value(a).len();
        let mask: Vec<f64> = (0..len)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let t = self.value(a);
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::from_parts(t.rows(), t.cols(), data);
        let rg = self.rg(a);
        Ok(self.push(value, Op::Mask { src: a, mask }, rg))
    }

    /// `-Σ_rows Σ_j target_j · log softmax(logits)_j`, computed with
    /// log-sum-exp. `targets` must match the logits' shape.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var, TensorError> {
        let t = self.value(logits);
        if t.shape() != targets.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                left: t.shape().to_vec(),
                right: targets.shape().to_vec(),
            });
        }
        let n = t.cols();
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(t.len());
        for (row, tgt) in t.data().chunks(n).zip(targets.data().chunks(n)) {
            let lse = log_sum_exp(row);
            for (&x, &y) in row.iter().zip(tgt) {
                loss -= y * (x - lse);
                probs.push((x - lse).exp());
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits,
                targets: targets.data().to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Cosine similarity of two equally-shaped tensors; norms below `floor`
    /// are clamped to it.
    pub fn cosine(&mut self, a: Var, b: Var, floor: f64) -> Result<Var, TensorError> {
        self.same_shape("cosine", a, b)?;
        let (ta, tb) = (self.value(a).data(), self.value(b).data());
        let dot: f64 = ta.iter().zip(tb).map(|(x, y)| x * y).sum();
        let na = norm(ta).max(floor);
        let nb = norm(tb).max(floor);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(dot / (na * nb)), Op::Cosine { a, b, floor }, rg))
    }

    /// Runs an LSTM over a sequence given the precomputed input projections
    /// `xw = X·W + b` (`[n x 4h]`, gate order i, f, g, o) and the recurrent
    /// matrix (`[h x 4h]`). Returns hidden states `[n x h]` indexed by
    /// original position; with `reverse` the sequence is read right to left.
    pub fn lstm(&mut self, xw: Var, recurrent: Var, reverse: bool) -> Result<Var, TensorError> {
        let (tx, tu) = (self.value(xw), self.value(recurrent));
        let hd = tu.rows();
        if tu.cols() != 4 * hd || tx.cols() != 4 * hd {
            return Err(TensorError::ShapeMismatch {
                op: "lstm",
                left: tx.shape().to_vec(),
                right: tu.shape().to_vec(),
            });
        }
        let n = tx.rows();
        let mut gates = vec![0.0; n * 4 * hd];
        let mut cells = vec![0.0; n * hd];
        let mut tanh_cells = vec![0.0; n * hd];
        let mut hidden = vec![0.0; n * hd];
        let mut prev: Option<usize> = None;
        let mut pre = vec![0.0; 4 * hd];
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            pre.copy_from_slice(tx.row_slice(t));
            if let Some(p) = prev {
                gemm_acc(&hidden[p * hd..(p + 1) * hd], tu.data(), &mut pre, 1, hd, 4 * hd);
            }
            for j in 0..hd {
                let i = sigmoid(pre[j]);
                let f = sigmoid(pre[hd + j]);
                let g = pre[2 * hd + j].tanh();
                let o = sigmoid(pre[3 * hd + j]);
                let c_prev = prev.map_or(0.0, |p| cells[p * hd + j]);
                let c = f * c_prev + i * g;
                let tc = c.tanh();
                let base = t * 4 * hd;
                gates[base + j] = i;
                gates[base + hd + j] = f;
                gates[base + 2 * hd + j] = g;
                gates[base + 3 * hd + j] = o;
                cells[t * hd + j] = c;
                tanh_cells[t * hd + j] = tc;
                hidden[t * hd + j] = o * tc;
            }
            prev = Some(t);
        }
        let rg = self.rg(xw) || self.rg(recurrent);
        Ok(self.push(
            Tensor::from_parts(n, hd, hidden),
            Op::Lstm {
                xw,
                recurrent,
                reverse,
                cache: LstmCache {
                    hidden: hd,
                    gates,
                    cells,
                    tanh_cells,
                },
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`, accumulating parameter gradients
    /// into `grads` (which must be shaped like this tape's store).
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<(), TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let out = self.value(Var(idx));
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    grads.get_mut(*id).iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Rows { param, rows } => {
                    let buf = grads.get_mut(*param);
                    let n = out.cols();
                    for (k, &r) in rows.iter().enumerate() {
                        let dst = &mut buf[r * n..(r + 1) * n];
                        dst.iter_mut().zip(&g[k * n..(k + 1) * n]).for_each(|(a, b)| *a += b);
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    if let Some(da) = self.slot(&mut adj, *a) {
                        gemm_nt_acc(&g, tb.data(), da, m, n, k);
                    }
                    if let Some(db) = self.slot(&mut adj, *b) {
                        gemm_tn_acc(ta.data(), &g, db, m, k, n);
                    }
                }
                Op::Transpose(a) => {
                    let (m, n) = (out.rows(), out.cols());
                    if let Some(da) = self.slot(&mut adj, *a) {
                        for i in 0..m {
                            for j in 0..n {
                                da[j * m + i] += g[i * n + j];
                            }
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if let Some(da) = self.slot(&mut adj, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                    }
                    if let Some(db) = self.slot(&mut adj, *b) {
                        db.iter_mut().zip(&g).for_each(|(d, v)| *d += sign * v);
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    if let Some(da) = self.slot(&mut adj, *a) {
                        for i in 0..g.len() {
                            da[i] += g[i] * tb[i];
                        }
                    }
                    if let Some(db) = self.slot(&mut adj, *b) {
                        for i in 0..g.len() {
                            db[i] += g[i] * ta[i];
                        }
                    }
                }
                Op::Div(a, b) => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    if let Some(da) = self.slot(&mut adj, *a) {
                        for i in 0..g.len() {
                            da[i] += g[i] / tb[i];
                        }
                    }
                    if let Some(db) = self.slot(&mut adj, *b) {
                        for i in 0..g.len() {
                            db[i] -= g[i] * ta[i] / (tb[i] * tb[i]);
                        }
                    }
                }
                Op::AddRow(a, r) => {
                    if let Some(da) = self.slot(&mut adj, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                    }
                    let n = out.cols();
                    if let Some(dr) = self.slot(&mut adj, *r) {
                        for chunk in g.chunks(n) {
                            dr.iter_mut().zip(chunk).for_each(|(d, v)| *d += v);
                        }
                    }
                }
                Op::Scale(a, c) => {
                    if let Some(da) = self.slot(&mut adj, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, v)| *d += c * v);
                    }
                }
                Op::AddScalar(a) => {
                    if let Some(da) = self.slot(&mut adj, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                    }
                }
                Op::Tanh(a) | Op::Sigmoid(a) | Op::Exp(a) | Op::Sqrt(a) => {
                    let y = out.data();
                    let deriv: fn(f64) -> f64 = match node.op {
                        Op::Tanh(_) => |y| 1.0 - y * y,
                        Op::Sigmoid(_) => |y| y * (1.0 - y),
                        Op::Exp(_) => |y| y,
                        _ => |y| 0.5 / y,
                    };
                    if let Some(da) = self.slot(&mut adj, *a) {
                        for i in 0..g.len() {
                            da[i] += g[i] * deriv(y[i]);
                        }
                    }
                }
                Op::Softmax { src, axis } | Op::Normalize { src, axis } => {
                    let softmax = matches!(node.op, Op::Softmax { .. });
                    let input = self.value(*src);
                    let (m, n) = (out.rows(), out.cols());
                    let y = out.data();
                    if let Some(da) = self.slot(&mut adj, *src) {
                        let lanes: Vec<Vec<usize>> = if *axis == 1 {
                            (0..m).map(|r| (0..n).map(|c| r * n + c).collect()).collect()
                        } else {
                            (0..n).map(|c| (0..m).map(|r| r * n + c).collect()).collect()
                        };
                        for lane in lanes {
                            let gy: f64 = lane.iter().map(|&i| g[i] * y[i]).sum();
                            if softmax {
                                for &i in &lane {
                                    da[i] += y[i] * (g[i] - gy);
                                }
                            } else {
                                let s: f64 = lane.iter().map(|&i| input.data()[i]).sum();
                                for &i in &lane {
                                    da[i] += (g[i] - gy) / s;
                                }
                            }
                        }
                    }
                }
                Op::Sum { src, axis, scale } => {
                    let input = self.value(*src);
                    let (m, n) = (input.rows(), input.cols());
                    if let Some(da) = self.slot(&mut adj, *src) {
                        for r in 0..m {
                            for c in 0..n {
                                let gi = match axis {
                                    None => g[0],
                                    Some(0) => g[c],
                                    _ => g[r],
                                };
                                da[r * n + c] += scale * gi;
                            }
                        }
                    }
                }
                Op::Concat { parts, axis } => {
                    let total_cols = out.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let t = self.value(p);
                        let (pm, pn) = (t.rows(), t.cols());
                        if let Some(dp) = self.slot(&mut adj, p) {
                            if *axis == 0 {
                                let src = &g[offset * total_cols..(offset + pm) * total_cols];
                                dp.iter_mut().zip(src).for_each(|(d, v)| *d += v);
                            } else {
                                for r in 0..pm {
                                    let src = &g[r * total_cols + offset..r * total_cols + offset + pn];
                                    dp[r * pn..(r + 1) * pn]
                                        .iter_mut()
                                        .zip(src)
                                        .for_each(|(d, v)| *d += v);
                                }
                            }
                        }
                        offset += if *axis == 0 { pm } else { pn };
                    }
                }
                Op::Slice { src, axis, start } => {
                    let n_src = self.value(*src).cols();
                    let (m, n) = (out.rows(), out.cols());
                    if let Some(ds) = self.slot(&mut adj, *src) {
                        for r in 0..m {
                            for c in 0..n {
                                let (sr, sc) = if *axis == 0 { (start + r, c) } else { (r, start + c) };
                                ds[sr * n_src + sc] += g[r * n + c];
                            }
                        }
                    }
                }
                Op::Select { src, indices } => {
                    if let Some(ds) = self.slot(&mut adj, *src) {
                        for (k, &i) in indices.iter().enumerate() {
                            ds[i] += g[k];
                        }
                    }
                }
                Op::Max { src, index } => {
                    if let Some(ds) = self.slot(&mut adj, *src) {
                        ds[*index] += g[0];
                    }
                }
                Op::Mask { src, mask } => {
                    if let Some(ds) = self.slot(&mut adj, *src) {
                        for i in 0..g.len() {
                            ds[i] += g[i] * mask[i];
                        }
                    }
                }
                Op::SoftmaxXent { logits, targets, probs } => {
                    let n = self.value(*logits).cols();
                    if let Some(dl) = self.slot(&mut adj, *logits) {
                        for (r, tgt) in targets.chunks(n).enumerate() {
                            let mass: f64 = tgt.iter().sum();
                            for c in 0..n {
                                let i = r * n + c;
                                dl[i] += g[0] * (probs[i] * mass - tgt[c]);
                            }
                        }
                    }
                }
                Op::Cosine { a, b, floor } => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    let (ra, rb) = (norm(ta), norm(tb));
                    let (na, nb) = (ra.max(*floor), rb.max(*floor));
                    let cos = out.item();
                    let grad_for = |x: &[f64], y: &[f64], rx: f64, nx: f64, d: &mut [f64]| {
                        for i in 0..x.len() {
                            let mut v = y[i] / (na * nb);
                            if rx >= *floor {
                                v -= cos * x[i] / (nx * nx);
                            }
                            d[i] += g[0] * v;
                        }
                    };
                    if let Some(da) = self.slot(&mut adj, *a) {
                        grad_for(ta, tb, ra, na, da);
                    }
                    if let Some(db) = self.slot(&mut adj, *b) {
                        grad_for(tb, ta, rb, nb, db);
                    }
                }
                Op::Lstm {
                    xw,
                    recurrent,
                    reverse,
                    cache,
                } => {
                    self.lstm_backward(&mut adj, &g, out, *xw, *recurrent, *reverse, cache);
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn lstm_backward(
        &self,
        adj: &mut [Option<Vec<f64>>],
        g: &[f64],
        out: &Tensor,
        xw: Var,
        recurrent: Var,
        reverse: bool,
        cache: &LstmCache,
    ) {
        let hd = cache.hidden;
        let n = out.rows();
        let u = self.value(recurrent).data();
        let hidden = out.data();
        let mut dxw = vec![0.0; n * 4 * hd];
        let mut du = vec![0.0; hd * 4 * hd];
        let mut dh_rec = vec![0.0; hd];
        let mut dc_rec = vec![0.0; hd];
        let mut dpre = vec![0.0; 4 * hd];
        for step in (0..n).rev() {
            let t = if reverse { n - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let base = t * 4 * hd;
            for j in 0..hd {
                let i = cache.gates[base + j];
                let f = cache.gates[base + hd + j];
                let gg = cache.gates[base + 2 * hd + j];
                let o = cache.gates[base + 3 * hd + j];
                let tc = cache.tanh_cells[t * hd + j];
                let c_prev = prev.map_or(0.0, |p| cache.cells[p * hd + j]);
                let dh = g[t * hd + j] + dh_rec[j];
                let dc = dh * o * (1.0 - tc * tc) + dc_rec[j];
                dpre[j] = dc * gg * i * (1.0 - i);
                dpre[hd + j] = dc * c_prev * f * (1.0 - f);
                dpre[2 * hd + j] = dc * i * (1.0 - gg * gg);
                dpre[3 * hd + j] = dh * tc * o * (1.0 - o);
                dc_rec[j] = dc * f;
            }
            dxw[base..base + 4 * hd].copy_from_slice(&dpre);
            dh_rec.fill(0.0);
            if let Some(p) = prev {
                gemm_tn_acc(&hidden[p * hd..(p + 1) * hd], &dpre, &mut du, 1, hd, 4 * hd);
                gemm_nt_acc(&dpre, u, &mut dh_rec, 1, 4 * hd, hd);
            }
        }
        if let Some(d) = self.slot(adj, xw) {
            d.iter_mut().zip(&dxw).for_each(|(a, b)| *a += b);
        }
        if let Some(d) = self.slot(adj, recurrent) {
            d.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        }
    }

    fn slot<'g>(&self, adj: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let len = self.value(v).len();
        Some(adj[v.0].get_or_insert_with(|| vec![0.0; len]))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn along_axis(t: &Tensor, axis: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Tensor {
    let (m, n) = (t.rows(), t.cols());
    let mut out = vec![0.0; m * n];
    if axis == 1 {
        for r in 0..m {
            out[r * n..(r + 1) * n].copy_from_slice(&f(t.row_slice(r)));
        }
    } else {
        for c in 0..n {
            let lane = t.column(c);
            for (r, v) in f(&lane).into_iter().enumerate() {
                out[r * n + c] = v;
            }
        }
    }
    Tensor::from_parts(m, n, out)
}
