//! Eager reverse-mode tape.
//!
//! Forward ops compute their values immediately and append a node; `backward`
//! walks the nodes in reverse, accumulating adjoints and adding parameter
//! gradients into a [`TensorSet`]-shaped buffer. The op set is exactly what
//! the policy network needs, nothing more.

use std::collections::HashMap;

use super::tensor::TensorSet;

/// Handle to a tape node: an id plus the value length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
    len: usize,
}

impl Var {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug)]
enum Op {
    /// Constant or parameter slice; `param` is (tensor index, offset).
    Leaf { param: Option<(usize, usize)> },
    Concat { parts: Vec<Var> },
    /// `w` viewed as a (value.len x x.len) row-major matrix times `x`.
    MatVec { w: Var, x: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    /// Elementwise `a * mul + add`.
    Affine { a: Var, mul: f64, add: f64 },
    /// Vector `a` scaled by the scalar node `s`.
    ScaleByScalar { a: Var, s: Var },
    Relu { a: Var },
    Tanh { a: Var },
    Sigmoid { a: Var },
    Exp { a: Var },
    LogSoftmax { a: Var },
    Dot { a: Var, b: Var },
    Index { a: Var, idx: usize },
    Slice { a: Var, offset: usize },
}

struct Node {
    op: Op,
    value: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_cache: HashMap<(usize, usize, usize), Var>,
    zero_cache: HashMap<usize, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.id].value
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        debug_assert!(value.iter().all(|v| v.is_finite()), "non-finite tape value");
        let id = self.nodes.len();
        let len = value.len();
        self.nodes.push(Node { op, value });
        Var { id, len }
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Leaf { param: None }, value)
    }

    /// A cached all-zero vector (used for initial recurrent states).
    pub fn zeros(&mut self, len: usize) -> Var {
        if let Some(&v) = self.zero_cache.get(&len) {
            return v;
        }
        let v = self.push(Op::Leaf { param: None }, vec![0.0; len]);
        self.zero_cache.insert(len, v);
        v
    }

    /// A slice of a parameter tensor. Cached, so repeated lookups of the same
    /// embedding row share one node (gradients still accumulate correctly).
    pub fn param_slice(&mut self, params: &TensorSet, tensor: usize, offset: usize, len: usize) -> Var {
        if let Some(&v) = self.param_cache.get(&(tensor, offset, len)) {
            return v;
        }
        let value = params.get(tensor).data()[offset..offset + len].to_vec();
        let v = self.push(Op::Leaf { param: Some((tensor, offset)) }, value);
        self.param_cache.insert((tensor, offset, len), v);
        v
    }

    /// A whole parameter tensor as one node.
    pub fn param(&mut self, params: &TensorSet, tensor: usize) -> Var {
        let len = params.get(tensor).len();
        self.param_slice(params, tensor, 0, len)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::with_capacity(parts.iter().map(|p| p.len).sum());
        for p in parts {
            value.extend_from_slice(&self.nodes[p.id].value);
        }
        self.push(Op::Concat { parts: parts.to_vec() }, value)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        assert!(x.len > 0 && w.len % x.len == 0, "matvec shape mismatch: {} x {}", w.len, x.len);
        let rows = w.len / x.len;
        let wv = &self.nodes[w.id].value;
        let xv = &self.nodes[x.id].value;
        let mut out = vec![0.0; rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &wv[r * x.len..(r + 1) * x.len];
            *slot = dot(row, xv);
        }
        self.push(Op::MatVec { w, x }, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(a.len, b.len, "add shape mismatch");
        let value = self.nodes[a.id]
            .value
            .iter()
            .zip(&self.nodes[b.id].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add { a, b }, value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(a.len, b.len, "mul shape mismatch");
        let value = self.nodes[a.id]
            .value
            .iter()
            .zip(&self.nodes[b.id].value)
            .map(|(x, y)| x * y)
            .collect();
        self.push(Op::Mul { a, b }, value)
    }

    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let value = self.nodes[a.id].value.iter().map(|x| x * mul + add).collect();
        self.push(Op::Affine { a, mul, add }, value)
    }

    pub fn scale_by_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(s.len, 1, "scale factor must be a scalar node");
        let factor = self.nodes[s.id].value[0];
        let value = self.nodes[a.id].value.iter().map(|x| x * factor).collect();
        self.push(Op::ScaleByScalar { a, s }, value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.id].value.iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu { a }, value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.id].value.iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh { a }, value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.id].value.iter().map(|x| sigmoid(*x)).collect();
        self.push(Op::Sigmoid { a }, value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.nodes[a.id].value.iter().map(|x| x.exp()).collect();
        self.push(Op::Exp { a }, value)
    }

    /// Max-shifted log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let value = log_softmax(&self.nodes[a.id].value);
        self.push(Op::LogSoftmax { a }, value)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(a.len, b.len, "dot shape mismatch");
        let value = vec![dot(&self.nodes[a.id].value, &self.nodes[b.id].value)];
        self.push(Op::Dot { a, b }, value)
    }

    pub fn index(&mut self, a: Var, idx: usize) -> Var {
        assert!(idx < a.len, "index out of range");
        let value = vec![self.nodes[a.id].value[idx]];
        self.push(Op::Index { a, idx }, value)
    }

    /// Splits an LSTM pre-activation into gates and builds the new
    /// hidden/cell pair. Gate row order is `[input, forget, candidate, output]`.
    pub fn lstm_step(
        &mut self,
        wx: Var,
        wh: Var,
        bias: Var,
        prev_hidden: Var,
        prev_cell: Var,
        input: Var,
    ) -> (Var, Var) {
        let h = prev_hidden.len;
        assert_eq!(bias.len, 4 * h, "lstm bias shape mismatch");
        let gx = self.matvec(wx, input);
        let gh = self.matvec(wh, prev_hidden);
        let sum = self.add(gx, gh);
        let pre = self.add(sum, bias);

        // Slice the 4h pre-activation via index-free concat arithmetic: build
        // gate views by re-running matvec would be wasteful, so slice here.
        let (i_gate, f_gate, g_gate, o_gate) = self.split_gates(pre, h);
        let i_act = self.sigmoid(i_gate);
        let f_act = self.sigmoid(f_gate);
        let g_act = self.tanh(g_gate);
        let o_act = self.sigmoid(o_gate);

        let keep = self.mul(f_act, prev_cell);
        let write = self.mul(i_act, g_act);
        let cell = self.add(keep, write);
        let cell_tanh = self.tanh(cell);
        let hidden = self.mul(o_act, cell_tanh);
        (hidden, cell)
    }

    fn split_gates(&mut self, pre: Var, h: usize) -> (Var, Var, Var, Var) {
        let a = self.slice(pre, 0, h);
        let b = self.slice(pre, h, h);
        let c = self.slice(pre, 2 * h, h);
        let d = self.slice(pre, 3 * h, h);
        (a, b, c, d)
    }

    /// Contiguous sub-vector, implemented as a gather with trivial backward.
    fn slice(&mut self, a: Var, offset: usize, len: usize) -> Var {
        assert!(offset + len <= a.len, "slice out of range");
        let value = self.nodes[a.id].value[offset..offset + len].to_vec();
        self.push(Op::Slice { a, offset }, value)
    }

    /// Two-layer perceptron: `w2 . relu(w1 . x)`.
    pub fn mlp2(&mut self, w1: Var, w2: Var, x: Var) -> Var {
        let z = self.matvec(w1, x);
        let z = self.relu(z);
        self.matvec(w2, z)
    }

    /// Reverse pass from a scalar loss; parameter gradients are added into
    /// `grads` (shaped like the parameter set the leaves came from).
    pub fn backward(&self, loss: Var, grads: &mut TensorSet) {
        assert_eq!(loss.len, 1, "loss must be scalar");
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        adj.resize_with(self.nodes.len(), || None);
        adj[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf { param: None } => {}
                Op::Leaf { param: Some((tensor, offset)) } => {
                    let data = grads.get_mut(*tensor).data_mut();
                    for (k, gv) in g.iter().enumerate() {
                        data[offset + k] += gv;
                    }
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let slot = slot(&mut adj, *p);
                        for k in 0..p.len {
                            slot[k] += g[off + k];
                        }
                        off += p.len;
                    }
                }
                Op::MatVec { w, x } => {
                    let cols = x.len;
                    let xv = &self.nodes[x.id].value;
                    let wv = &self.nodes[w.id].value;
                    {
                        let dw = slot(&mut adj, *w);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mut dw[r * cols..(r + 1) * cols];
                            for (slot, xvk) in row.iter_mut().zip(xv) {
                                *slot += gr * xvk;
                            }
                        }
                    }
                    {
                        let dx = slot(&mut adj, *x);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &wv[r * cols..(r + 1) * cols];
                            for (slot, wvk) in dx.iter_mut().zip(row) {
                                *slot += gr * wvk;
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    add_assign(slot(&mut adj, *a), &g);
                    add_assign(slot(&mut adj, *b), &g);
                }
                Op::Mul { a, b } => {
                    let av = self.nodes[a.id].value.clone();
                    let bv = &self.nodes[b.id].value;
                    {
                        let da = slot(&mut adj, *a);
                        for k in 0..g.len() {
                            da[k] += g[k] * bv[k];
                        }
                    }
                    {
                        let db = slot(&mut adj, *b);
                        for k in 0..g.len() {
                            db[k] += g[k] * av[k];
                        }
                    }
                }
                Op::Affine { a, mul, .. } => {
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[k] += g[k] * mul;
                    }
                }
                Op::ScaleByScalar { a, s } => {
                    let factor = self.nodes[s.id].value[0];
                    let av = &self.nodes[a.id].value;
                    let ds_contrib: f64 = g.iter().zip(av).map(|(gv, avk)| gv * avk).sum();
                    {
                        let da = slot(&mut adj, *a);
                        for k in 0..g.len() {
                            da[k] += g[k] * factor;
                        }
                    }
                    slot(&mut adj, *s)[0] += ds_contrib;
                }
                Op::Relu { a } => {
                    let y = &node.value;
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        if y[k] > 0.0 {
                            da[k] += g[k];
                        }
                    }
                }
                Op::Tanh { a } => {
                    let y = &node.value;
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                }
                Op::Sigmoid { a } => {
                    let y = &node.value;
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                }
                Op::Exp { a } => {
                    let y = &node.value;
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[k] += g[k] * y[k];
                    }
                }
                Op::LogSoftmax { a } => {
                    let y = &node.value;
                    let gsum: f64 = g.iter().sum();
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[k] += g[k] - y[k].exp() * gsum;
                    }
                }
                Op::Dot { a, b } => {
                    let g0 = g[0];
                    let av = self.nodes[a.id].value.clone();
                    let bv = &self.nodes[b.id].value;
                    {
                        let da = slot(&mut adj, *a);
                        for k in 0..da.len() {
                            da[k] += g0 * bv[k];
                        }
                    }
                    {
                        let db = slot(&mut adj, *b);
                        for k in 0..db.len() {
                            db[k] += g0 * av[k];
                        }
                    }
                }
                Op::Index { a, idx } => {
                    slot(&mut adj, *a)[*idx] += g[0];
                }
                Op::Slice { a, offset } => {
                    let da = slot(&mut adj, *a);
                    for k in 0..g.len() {
                        da[offset + k] += g[k];
                    }
                }
            }
        }
    }
}

fn slot<'a>(adj: &'a mut [Option<Vec<f64>>], var: Var) -> &'a mut Vec<f64> {
    adj[var.id].get_or_insert_with(|| vec![0.0; var.len])
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - max - log_z).collect()
}
