use super::fault::{self, Fault};
use super::Tensor;
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul {
        a: NodeId,
        b: NodeId,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose(NodeId),
    Add {
        a: NodeId,
        b: NodeId,
        broadcast: bool,
    },
    Mul {
        a: NodeId,
        b: NodeId,
        broadcast: bool,
    },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    LayerNorm {
        a: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    ReduceTime(NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Vec<f64>,
    },
    Sum(NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Slice {
        a: NodeId,
        start: usize,
    },
    StackRows(Vec<NodeId>),
    Row {
        a: NodeId,
        index: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Append-only differentiation graph. Confined to one thread; build one per
/// forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `id`; exactly zero when `id` does not influence the root.
    pub fn get(&self, id: NodeId) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => Tensor::new(self.shapes[id.0].clone(), g.clone()).expect("shape"),
            None => Tensor::zeros(&self.shapes[id.0]),
        }
    }

    /// Moves the raw gradient buffer out; `None` means all zeros.
    pub fn take(&mut self, id: NodeId) -> Option<Vec<f64>> {
        self.grads[id.0].take()
    }
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::dim(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn accumulate<'g>(
    grads: &'g mut [Option<Vec<f64>>],
    nodes: &[Node],
    id: NodeId,
) -> Option<&'g mut Vec<f64>> {
    let node = &nodes[id.0];
    if !node.needs_grad {
        return None;
    }
    let len = node.value.len();
    Some(grads[id.0].get_or_insert_with(|| vec![0.0; len]))
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[NodeId]) -> NodeId {
        let needs_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => inputs.iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, &[])
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant, &[])
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Matrix product. Either side may be rank 1: a left vector acts as a
    /// `1×K` row (result `[N]`), a right vector as a `K×1` column (result
    /// `[M]`).
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, n, out_shape) = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => (sa[0], sa[1], sb[1], vec![sa[0], sb[1]]),
            (2, 1) if sa[1] == sb[0] => (sa[0], sa[1], 1, vec![sa[0]]),
            (1, 2) if sa[0] == sb[0] => (1, sa[0], sb[1], vec![sb[1]]),
            _ => return Err(shape_err("matmul", &sa, &sb)),
        };
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av[i * k..(i + 1) * k];
            if n == 1 {
                out[i] = dot(arow, bv);
            } else {
                let orow = &mut out[i * n..(i + 1) * n];
                for (p, &s) in arow.iter().enumerate() {
                    axpy(orow, s, &bv[p * n..(p + 1) * n]);
                }
            }
        }
        let t = Tensor::new(out_shape, out)?;
        Ok(self.push(t, Op::MatMul { a, b, m, k, n }, &[a, b]))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 {
            return Err(Error::dim(format!("transpose needs rank 2, got {s:?}")));
        }
        let (r, c) = (s[0], s[1]);
        let av = self.value(a).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av[i * c + j];
            }
        }
        let t = Tensor::new(vec![c, r], out)?;
        Ok(self.push(t, Op::Transpose(a), &[a]))
    }

    fn binary_layout(&self, op: &str, a: NodeId, b: NodeId) -> Result<bool> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(false)
        } else if sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0] {
            Ok(true)
        } else {
            Err(shape_err(op, sa, sb))
        }
    }

    fn binary(&self, a: NodeId, b: NodeId, broadcast: bool, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let av = self.value(a);
        let bv = self.value(b).data();
        let data = if broadcast {
            let w = bv.len();
            av.data()
                .iter()
                .enumerate()
                .map(|(i, &x)| f(x, bv[i % w]))
                .collect()
        } else {
            av.data().iter().zip(bv).map(|(&x, &y)| f(x, y)).collect()
        };
        Tensor::new(av.shape().to_vec(), data).expect("same shape")
    }

    /// Elementwise sum; `b` may be a vector broadcast over the rows of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let broadcast = self.binary_layout("add", a, b)?;
        let t = self.binary(a, b, broadcast, |x, y| x + y);
        Ok(self.push(t, Op::Add { a, b, broadcast }, &[a, b]))
    }

    /// Elementwise product; `b` may be a vector broadcast over the rows of `a`.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let broadcast = self.binary_layout("mul", a, b)?;
        let t = self.binary(a, b, broadcast, |x, y| x * y);
        Ok(self.push(t, Op::Mul { a, b, broadcast }, &[a, b]))
    }

    fn unary(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let v = self.value(a);
        Tensor::new(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect()).expect("shape")
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let t = self.unary(a, f64::tanh);
        self.push(t, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let t = self.unary(a, sigmoid);
        self.push(t, Op::Sigmoid(a), &[a])
    }

    /// Softmax of a vector, computed with max subtraction.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || v.is_empty() {
            return Err(Error::dim(format!(
                "softmax needs a non-empty vector, got {:?}",
                v.shape()
            )));
        }
        let t = Tensor::vector(softmax(v.data()));
        Ok(self.push(t, Op::Softmax(a), &[a]))
    }

    /// Layer normalization over the last axis:
    /// `gain ⊙ (a − μ) / sqrt(σ² + eps) + bias`, with population variance.
    /// A matrix input is normalized row by row.
    pub fn layer_norm(&mut self, a: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be >= 0, got {eps}")));
        }
        let sa = self.shape(a).to_vec();
        let h = *sa.last().unwrap_or(&0);
        if sa.is_empty() || sa.len() > 2 || h < 2 {
            return Err(Error::dim(format!(
                "layer_norm needs a last axis of at least 2 elements, got {sa:?}"
            )));
        }
        if self.shape(gain) != [h] || self.shape(bias) != [h] {
            return Err(Error::dim(format!(
                "layer_norm gain/bias must be [{h}], got {:?} and {:?}",
                self.shape(gain),
                self.shape(bias)
            )));
        }
        let av = self.value(a).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let rows = av.len() / h;
        let mut xhat = vec![0.0; av.len()];
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = vec![0.0; av.len()];
        for r in 0..rows {
            let x = &av[r * h..(r + 1) * h];
            let mean = x.iter().sum::<f64>() / h as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let inv = 1.0 / (var + eps).sqrt();
            if !inv.is_finite() {
                return Err(Error::Numeric(
                    "layer_norm of a constant vector with eps = 0".into(),
                ));
            }
            inv_std.push(inv);
            for i in 0..h {
                let xh = (x[i] - mean) * inv;
                xhat[r * h + i] = xh;
                out[r * h + i] = g[i] * xh + b[i];
            }
        }
        let t = Tensor::new(sa, out)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                a,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[a, gain, bias],
        ))
    }

    /// Column sums of a `T×H` matrix. `T = 0` yields the zero vector.
    pub fn reduce_time(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 {
            return Err(Error::dim(format!("reduce_time needs rank 2, got {s:?}")));
        }
        let (t, h) = (s[0], s[1]);
        let av = self.value(a).data();
        let mut out = vec![0.0; h];
        for r in 0..t {
            for (o, v) in out.iter_mut().zip(&av[r * h..(r + 1) * h]) {
                *o += v;
            }
        }
        let v = Tensor::vector(out);
        Ok(self.push(v, Op::ReduceTime(a), &[a]))
    }

    /// Summed (not averaged) negative log-likelihood of `targets` under
    /// row-wise softmax of `logits`, over unmasked steps.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize], mask: &[bool]) -> Result<NodeId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != targets.len() || mask.len() != targets.len() {
            return Err(Error::dim(format!(
                "cross_entropy: logits {s:?} vs {} targets / {} mask entries",
                targets.len(),
                mask.len()
            )));
        }
        let (t_len, v) = (s[0], s[1]);
        let lv = self.value(logits).data();
        let mut probs = vec![0.0; t_len * v];
        let mut loss = 0.0;
        for t in 0..t_len {
            if !mask[t] {
                continue;
            }
            if targets[t] >= v {
                return Err(Error::Data(format!(
                    "target id {} out of range for vocabulary {} at step {}",
                    targets[t], v, t
                )));
            }
            let row = &lv[t * v..(t + 1) * v];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let lse = max + z.ln();
            loss += lse - row[targets[t]];
            for (p, x) in probs[t * v..(t + 1) * v].iter_mut().zip(row) {
                *p = (x - lse).exp();
            }
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let t = self.unary(a, |x| k * x);
        self.push(t, Op::Scale(a, k), &[a])
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 1 {
                return Err(Error::dim(format!("concat needs vectors, got {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), parts))
    }

    /// `a[start..start + len]` of a vector.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || start + len > v.len() {
            return Err(Error::dim(format!(
                "slice {start}..{} out of {:?}",
                start + len,
                v.shape()
            )));
        }
        let t = Tensor::vector(v.data()[start..start + len].to_vec());
        Ok(self.push(t, Op::Slice { a, start }, &[a]))
    }

    /// Stacks `width`-long vectors as the rows of a matrix. An empty list
    /// yields a `0×width` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId], width: usize) -> Result<NodeId> {
        let mut data = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            let v = self.value(r);
            if v.shape() != [width] {
                return Err(Error::dim(format!(
                    "stack_rows expects [{width}], got {:?}",
                    v.shape()
                )));
            }
            data.extend_from_slice(v.data());
        }
        let t = Tensor::new(vec![rows.len(), width], data)?;
        Ok(self.push(t, Op::StackRows(rows.to_vec()), rows))
    }

    /// Row `index` of a matrix; the backward pass scatters into that row only.
    pub fn row(&mut self, a: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 2 || index >= v.shape()[0] {
            return Err(Error::Data(format!(
                "row {index} out of range for {:?}",
                v.shape()
            )));
        }
        let t = Tensor::vector(v.row(index).to_vec());
        Ok(self.push(t, Op::Row { a, index }, &[a]))
    }

    /// Reverse-mode accumulation from a scalar `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::Usage(format!(
                "backward root must be scalar, got shape {:?}",
                self.shape(root)
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf | Op::Constant => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backward_node(node, &g, &mut grads);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn backward_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for i in 0..m {
                        let darow = &mut da[i * k..(i + 1) * k];
                        if n == 1 {
                            axpy(darow, g[i], bv);
                        } else {
                            let grow = &g[i * n..(i + 1) * n];
                            for (p, d) in darow.iter_mut().enumerate() {
                                *d += dot(grow, &bv[p * n..(p + 1) * n]);
                            }
                        }
                    }
                }
                if let Some(db) = accumulate(grads, nodes, *b) {
                    for i in 0..m {
                        let arow = &av[i * k..(i + 1) * k];
                        if n == 1 {
                            axpy(db, g[i], arow);
                        } else {
                            let grow = &g[i * n..(i + 1) * n];
                            for (p, &s) in arow.iter().enumerate() {
                                axpy(&mut db[p * n..(p + 1) * n], s, grow);
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let s = nodes[a.0].value.shape();
                let (r, c) = (s[0], s[1]);
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
            Op::Add { a, b, broadcast } => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    axpy(da, 1.0, g);
                }
                if let Some(db) = accumulate(grads, nodes, *b) {
                    if *broadcast {
                        let w = db.len();
                        for row in g.chunks(w) {
                            axpy(db, 1.0, row);
                        }
                    } else {
                        axpy(db, 1.0, g);
                    }
                }
            }
            Op::Mul { a, b, broadcast } => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                let w = bv.len();
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for (i, d) in da.iter_mut().enumerate() {
                        *d += g[i] * bv[i % w];
                    }
                }
                if let Some(db) = accumulate(grads, nodes, *b) {
                    if *broadcast {
                        for (i, (gi, ai)) in g.iter().zip(av).enumerate() {
                            db[i % w] += gi * ai;
                        }
                    } else {
                        for (d, (gi, ai)) in db.iter_mut().zip(g.iter().zip(av)) {
                            *d += gi * ai;
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for (d, (gi, yi)) in da.iter_mut().zip(g.iter().zip(y)) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for (d, (gi, yi)) in da.iter_mut().zip(g.iter().zip(y)) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
            }
            Op::Softmax(a) => {
                let y = node.value.data();
                let gy = dot(g, y);
                if let Some(da) = accumulate(grads, nodes, *a) {
                    for (d, (gi, yi)) in da.iter_mut().zip(g.iter().zip(y)) {
                        *d += yi * (gi - gy);
                    }
                }
            }
            Op::LayerNorm {
                a,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = nodes[gain.0].value.data();
                let h = gv.len();
                if let Some(da) = accumulate(grads, nodes, *a) {
                    let drop_term = fault::active(Fault::LayerNormBackward);
                    let mut dxhat = vec![0.0; h];
                    for (r, inv) in inv_std.iter().enumerate() {
                        let gr = &g[r * h..(r + 1) * h];
                        let xr = &xhat[r * h..(r + 1) * h];
                        for i in 0..h {
                            dxhat[i] = gr[i] * gv[i];
                        }
                        let mean1 = dxhat.iter().sum::<f64>() / h as f64;
                        let mean2 = if drop_term { 0.0 } else { dot(&dxhat, xr) / h as f64 };
                        for i in 0..h {
                            da[r * h + i] += inv * (dxhat[i] - mean1 - xr[i] * mean2);
                        }
                    }
                }
                if let Some(dg) = accumulate(grads, nodes, *gain) {
                    for (i, (gi, xi)) in g.iter().zip(xhat).enumerate() {
                        dg[i % h] += gi * xi;
                    }
                }
                if let Some(db) = accumulate(grads, nodes, *bias) {
                    for row in g.chunks(h) {
                        axpy(db, 1.0, row);
                    }
                }
            }
            Op::ReduceTime(a) => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    let h = g.len();
                    for row in da.chunks_mut(h) {
                        axpy(row, 1.0, g);
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
                probs,
            } => {
                if let Some(dl) = accumulate(grads, nodes, *logits) {
                    let v = nodes[logits.0].value.shape()[1];
                    for (t, (&target, &on)) in targets.iter().zip(mask).enumerate() {
                        if !on {
                            continue;
                        }
                        let row = &mut dl[t * v..(t + 1) * v];
                        axpy(row, g[0], &probs[t * v..(t + 1) * v]);
                        row[target] -= g[0];
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Scale(a, k) => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    axpy(da, *k, g);
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    if let Some(dp) = accumulate(grads, nodes, *p) {
                        axpy(dp, 1.0, &g[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::Slice { a, start } => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    axpy(&mut da[*start..*start + g.len()], 1.0, g);
                }
            }
            Op::StackRows(rows) => {
                if let Some(&first) = rows.first() {
                    let w = nodes[first.0].value.len();
                    for (i, r) in rows.iter().enumerate() {
                        if let Some(dr) = accumulate(grads, nodes, *r) {
                            axpy(dr, 1.0, &g[i * w..(i + 1) * w]);
                        }
                    }
                }
            }
            Op::Row { a, index } => {
                if let Some(da) = accumulate(grads, nodes, *a) {
                    let w = g.len();
                    axpy(&mut da[index * w..(index + 1) * w], 1.0, g);
                }
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
