use super::Tensor;

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    /// Elementwise, same shape.
    Add(Var, Var),
    /// `(r,c) + (1,c)`, the row vector broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `(r,c) * (1,c)`.
    MulRow(Var, Var),
    /// `(r,c) * (r,1)`.
    MulCol(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Softplus(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    /// `(r,k) @ (k,c)`.
    Matmul(Var, Var),
    /// `(r,k) @ (c,k)^T`.
    MatmulNT(Var, Var),
    /// Row gather from an embedding table `(v,d)` at the given ids.
    Embedding(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LayerNormRows(Var, f64),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    /// `out[i] = a[i, idx[i]]`, producing `(r,1)`.
    TakePerRow(Var, Vec<usize>),
    SumAll(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Wengert tape. Ops append nodes, so indices are already in topological
/// order and [`Graph::backward`] is a single reverse sweep.
///
/// Shape violations are programming errors and panic with the op name and
/// both shapes.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

// (ra,ca) @ (rb,cb)
fn mm(a: &[f64], ra: usize, ca: usize, b: &[f64], cb: usize) -> Vec<f64> {
    let mut out = vec![0.0; ra * cb];
    for i in 0..ra {
        for k in 0..ca {
            let aik = a[i * ca + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * cb..(k + 1) * cb];
            let orow = &mut out[i * cb..(i + 1) * cb];
            for j in 0..cb {
                orow[j] += aik * brow[j];
            }
        }
    }
    out
}

// (ra,ca) @ (rb,ca)^T -> (ra,rb)
fn mm_nt(a: &[f64], ra: usize, ca: usize, b: &[f64], rb: usize) -> Vec<f64> {
    let mut out = vec![0.0; ra * rb];
    for i in 0..ra {
        let arow = &a[i * ca..(i + 1) * ca];
        for j in 0..rb {
            let brow = &b[j * ca..(j + 1) * ca];
            let mut s = 0.0;
            for k in 0..ca {
                s += arow[k] * brow[k];
            }
            out[i * rb + j] = s;
        }
    }
    out
}

// (ra,ca)^T @ (ra,cb) -> (ca,cb)
fn mm_tn(a: &[f64], ra: usize, ca: usize, b: &[f64], cb: usize) -> Vec<f64> {
    let mut out = vec![0.0; ca * cb];
    for k in 0..ra {
        let arow = &a[k * ca..(k + 1) * ca];
        let brow = &b[k * cb..(k + 1) * cb];
        for i in 0..ca {
            let aki = arow[i];
            if aki == 0.0 {
                continue;
            }
            let orow = &mut out[i * cb..(i + 1) * cb];
            for j in 0..cb {
                orow[j] += aki * brow[j];
            }
        }
    }
    out
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// The value of a `(1,1)` node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "scalar expected, got shape {:?}", t.shape());
        t.data()[0]
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape2(&self, v: Var) -> (usize, usize) {
        (self.value(v).rows(), self.value(v).cols())
    }

    fn check_same_shape(&self, op: &'static str, a: Var, b: Var) {
        let sa = self.value(a).shape();
        let sb = self.value(b).shape();
        assert_eq!(sa, sb, "shape mismatch in {op}: {sa:?} vs {sb:?}");
    }

    /// Mount a tensor as a differentiable leaf (honors `requires_grad`).
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let needs = t.requires_grad();
        self.push(t.clone(), Op::Leaf, needs)
    }

    /// Mount a tensor as a non-differentiable constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    pub fn constant_scalar(&mut self, x: f64) -> Var {
        self.constant(Tensor::scalar(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.check_same_shape("add", a, b);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::Add(a, b), needs)
    }

    /// `(r,c) + (1,c)`: row vector added to every row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (r, c) = self.shape2(a);
        let (rr, rc) = self.shape2(row);
        assert!(
            rr == 1 && rc == c,
            "shape mismatch in add_row: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(row).shape()
        );
        let mut data = self.value(a).data().to_vec();
        let rv = self.value(row).data().to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += rv[j];
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a) || self.needs(row);
        self.push(t, Op::AddRow(a, row), needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.check_same_shape("sub", a, b);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::Sub(a, b), needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.check_same_shape("mul", a, b);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::Mul(a, b), needs)
    }

    /// `(r,c) * (1,c)`: per-column scaling.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let (r, c) = self.shape2(a);
        let (rr, rc) = self.shape2(row);
        assert!(
            rr == 1 && rc == c,
            "shape mismatch in mul_row: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(row).shape()
        );
        let mut data = self.value(a).data().to_vec();
        let rv = self.value(row).data().to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] *= rv[j];
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a) || self.needs(row);
        self.push(t, Op::MulRow(a, row), needs)
    }

    /// `(r,c) * (r,1)`: per-row scaling.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (r, c) = self.shape2(a);
        let (cr, cc) = self.shape2(col);
        assert!(
            cr == r && cc == 1,
            "shape mismatch in mul_col: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(col).shape()
        );
        let mut data = self.value(a).data().to_vec();
        let cv = self.value(col).data().to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] *= cv[i];
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a) || self.needs(col);
        self.push(t, Op::MulCol(a, col), needs)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.check_same_shape("div", a, b);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x / y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::Div(a, b), needs)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data);
        let needs = self.needs(a);
        self.push(t, op, needs)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Ln(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), stable_softplus)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), stable_sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::MulScalar(a, c), |x| x * c)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ra, ca) = self.shape2(a);
        let (rb, cb) = self.shape2(b);
        assert_eq!(
            ca, rb,
            "shape mismatch in matmul: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(b).shape()
        );
        let data = mm(self.value(a).data(), ra, ca, self.value(b).data(), cb);
        let t = Tensor::new(vec![ra, cb], data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::Matmul(a, b), needs)
    }

    /// `a @ b^T` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (ra, ca) = self.shape2(a);
        let (rb, cb) = self.shape2(b);
        assert_eq!(
            ca, cb,
            "shape mismatch in matmul_nt: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(b).shape()
        );
        let data = mm_nt(self.value(a).data(), ra, ca, self.value(b).data(), rb);
        let t = Tensor::new(vec![ra, rb], data);
        let needs = self.needs(a) || self.needs(b);
        self.push(t, Op::MatmulNT(a, b), needs)
    }

    /// Gather rows of an embedding table: `(v,d)` at `ids` -> `(len,d)`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let (v, d) = self.shape2(table);
        assert!(!ids.is_empty(), "embedding: empty id list");
        for &id in ids {
            assert!(
                id < v,
                "embedding id {id} out of range for table with {v} rows"
            );
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let t = Tensor::new(vec![ids.len(), d], data);
        let needs = self.needs(table);
        self.push(t, Op::Embedding(table, ids.to_vec()), needs)
    }

    /// Row-wise softmax with max subtraction; masked logits at `-1e30` come
    /// out exactly zero.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape2(a);
        let src = self.value(a).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &src[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                let e = (row[j] - m).exp();
                data[i * c + j] = e;
                z += e;
            }
            for j in 0..c {
                data[i * c + j] /= z;
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a);
        self.push(t, Op::SoftmaxRows(a), needs)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape2(a);
        let src = self.value(a).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &src[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            for j in 0..c {
                data[i * c + j] = row[j] - lse;
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a);
        self.push(t, Op::LogSoftmaxRows(a), needs)
    }

    /// Row-wise normalization to zero mean and unit variance (population
    /// variance, `eps` inside the square root). No learned affine; compose
    /// with `mul_row`/`add_row` for gain and bias.
    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Var {
        let (r, c) = self.shape2(a);
        let src = self.value(a).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &src[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let s = (var + eps).sqrt();
            for j in 0..c {
                data[i * c + j] = (row[j] - mean) / s;
            }
        }
        let t = Tensor::new(vec![r, c], data);
        let needs = self.needs(a);
        self.push(t, Op::LayerNormRows(a, eps), needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: empty part list");
        let r = self.shape2(parts[0]).0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (rp, cp) = self.shape2(p);
            assert_eq!(
                rp,
                r,
                "shape mismatch in concat_cols: {:?} vs {:?}",
                self.value(parts[0]).shape(),
                self.value(p).shape()
            );
            widths.push(cp);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.value(p).data();
                data.extend_from_slice(&src[i * w..(i + 1) * w]);
            }
        }
        let t = Tensor::new(vec![r, total], data);
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(t, Op::ConcatCols(parts.to_vec()), needs)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape2(a);
        assert!(
            start + len <= c,
            "slice_cols [{start}, {start}+{len}) out of range for {:?}",
            self.value(a).shape()
        );
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&src[i * c + start..i * c + start + len]);
        }
        let t = Tensor::new(vec![r, len], data);
        let needs = self.needs(a);
        self.push(t, Op::SliceCols(a, start, len), needs)
    }

    /// Per-row column gather: `out[i] = a[i, idx[i]]`, shaped `(r,1)`.
    pub fn take_per_row(&mut self, a: Var, idx: &[usize]) -> Var {
        let (r, c) = self.shape2(a);
        assert_eq!(idx.len(), r, "take_per_row: {} indices for {r} rows", idx.len());
        for &j in idx {
            assert!(j < c, "take_per_row index {j} out of range for {c} columns");
        }
        let src = self.value(a).data();
        let data = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| src[i * c + j])
            .collect();
        let t = Tensor::new(vec![r, 1], data);
        let needs = self.needs(a);
        self.push(t, Op::TakePerRow(a, idx.to_vec()), needs)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), needs)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum_all(a);
        self.mul_scalar(s, 1.0 / n as f64)
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate additively on
    /// shared inputs; intermediate grads are freed once consumed, leaves
    /// keep theirs for export.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.value(loss).shape()
        );
        assert!(
            self.nodes[loss.0].needs_grad,
            "backward: loss does not depend on any differentiable leaf"
        );
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf | Op::Constant) {
                continue;
            }
            let g = self.nodes[i].grad.take().expect("grad present");
            let contributions = self.local_grads(i, &g);
            for (parent, contrib) in contributions {
                if !self.nodes[parent.0].needs_grad {
                    continue;
                }
                let n = self.nodes[parent.0].value.len();
                let slot = self.nodes[parent.0].grad.get_or_insert_with(|| vec![0.0; n]);
                for (s, c) in slot.iter_mut().zip(&contrib) {
                    *s += c;
                }
            }
        }
    }

    /// Gradient contributions of node `i` to each of its parents.
    fn local_grads(&self, i: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf | Op::Constant => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::AddRow(a, row) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let mut rg = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        rg[j] += g[i * c + j];
                    }
                }
                vec![(*a, g.to_vec()), (*row, rg)]
            }
            Op::Sub(a, b) => vec![(*a, g.to_vec()), (*b, g.iter().map(|x| -x).collect())],
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let ga = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                let gb = g.iter().zip(av).map(|(x, y)| x * y).collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::MulRow(a, row) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let av = self.value(*a).data();
                let rv = self.value(*row).data();
                let mut ga = vec![0.0; r * c];
                let mut gr = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] = g[i * c + j] * rv[j];
                        gr[j] += g[i * c + j] * av[i * c + j];
                    }
                }
                vec![(*a, ga), (*row, gr)]
            }
            Op::MulCol(a, col) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let av = self.value(*a).data();
                let cv = self.value(*col).data();
                let mut ga = vec![0.0; r * c];
                let mut gc = vec![0.0; r];
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] = g[i * c + j] * cv[i];
                        gc[i] += g[i * c + j] * av[i * c + j];
                    }
                }
                vec![(*a, ga), (*col, gc)]
            }
            Op::Div(a, b) => {
                let bv = self.value(*b).data();
                let ga = g.iter().zip(bv).map(|(x, y)| x / y).collect();
                let gb = g
                    .iter()
                    .zip(out.iter().zip(bv))
                    .map(|(x, (o, y))| -x * o / y)
                    .collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::Neg(a) => vec![(*a, g.iter().map(|x| -x).collect())],
            Op::Exp(a) => vec![(*a, g.iter().zip(out).map(|(x, o)| x * o).collect())],
            Op::Ln(a) => {
                let av = self.value(*a).data();
                vec![(*a, g.iter().zip(av).map(|(x, v)| x / v).collect())]
            }
            Op::Square(a) => {
                let av = self.value(*a).data();
                vec![(*a, g.iter().zip(av).map(|(x, v)| 2.0 * v * x).collect())]
            }
            Op::Softplus(a) => {
                let av = self.value(*a).data();
                vec![(
                    *a,
                    g.iter()
                        .zip(av)
                        .map(|(x, v)| x * stable_sigmoid(*v))
                        .collect(),
                )]
            }
            Op::Relu(a) => {
                let av = self.value(*a).data();
                vec![(
                    *a,
                    g.iter()
                        .zip(av)
                        .map(|(x, v)| if *v > 0.0 { *x } else { 0.0 })
                        .collect(),
                )]
            }
            Op::Sigmoid(a) => vec![(
                *a,
                g.iter().zip(out).map(|(x, o)| x * o * (1.0 - o)).collect(),
            )],
            Op::Tanh(a) => vec![(
                *a,
                g.iter().zip(out).map(|(x, o)| x * (1.0 - o * o)).collect(),
            )],
            Op::AddScalar(a) => vec![(*a, g.to_vec())],
            Op::MulScalar(a, c) => vec![(*a, g.iter().map(|x| x * c).collect())],
            Op::Matmul(a, b) => {
                let (ra, ca) = (self.value(*a).rows(), self.value(*a).cols());
                let cb = self.value(*b).cols();
                // dA = G @ B^T ; dB = A^T @ G
                let ga = mm_nt(g, ra, cb, self.value(*b).data(), ca);
                let gb = mm_tn(self.value(*a).data(), ra, ca, g, cb);
                vec![(*a, ga), (*b, gb)]
            }
            Op::MatmulNT(a, b) => {
                let (ra, ca) = (self.value(*a).rows(), self.value(*a).cols());
                let rb = self.value(*b).rows();
                // C = A @ B^T : dA = G @ B ; dB = G^T @ A
                let ga = mm(g, ra, rb, self.value(*b).data(), ca);
                let gb = mm_tn(g, ra, rb, self.value(*a).data(), ca);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Embedding(table, ids) => {
                let (v, d) = (self.value(*table).rows(), self.value(*table).cols());
                let mut gt = vec![0.0; v * d];
                for (i, &id) in ids.iter().enumerate() {
                    for j in 0..d {
                        gt[id * d + j] += g[i * d + j];
                    }
                }
                vec![(*table, gt)]
            }
            Op::SoftmaxRows(a) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    let y = &out[i * c..(i + 1) * c];
                    let gi = &g[i * c..(i + 1) * c];
                    let dot: f64 = gi.iter().zip(y).map(|(x, v)| x * v).sum();
                    for j in 0..c {
                        ga[i * c + j] = y[j] * (gi[j] - dot);
                    }
                }
                vec![(*a, ga)]
            }
            Op::LogSoftmaxRows(a) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    let y = &out[i * c..(i + 1) * c];
                    let gi = &g[i * c..(i + 1) * c];
                    let gsum: f64 = gi.iter().sum();
                    for j in 0..c {
                        ga[i * c + j] = gi[j] - y[j].exp() * gsum;
                    }
                }
                vec![(*a, ga)]
            }
            Op::LayerNormRows(a, eps) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let av = self.value(*a).data();
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    let x = &av[i * c..(i + 1) * c];
                    let y = &out[i * c..(i + 1) * c];
                    let gi = &g[i * c..(i + 1) * c];
                    let mean = x.iter().sum::<f64>() / c as f64;
                    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                    let s = (var + eps).sqrt();
                    let gmean = gi.iter().sum::<f64>() / c as f64;
                    let gydot = gi.iter().zip(y).map(|(x, v)| x * v).sum::<f64>() / c as f64;
                    for j in 0..c {
                        ga[i * c + j] = (gi[j] - gmean - y[j] * gydot) / s;
                    }
                }
                vec![(*a, ga)]
            }
            Op::ConcatCols(parts) => {
                let r = node.value.rows();
                let total = node.value.cols();
                let mut offset = 0;
                let mut res = Vec::with_capacity(parts.len());
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut gp = vec![0.0; r * w];
                    for i in 0..r {
                        gp[i * w..(i + 1) * w]
                            .copy_from_slice(&g[i * total + offset..i * total + offset + w]);
                    }
                    res.push((p, gp));
                    offset += w;
                }
                res
            }
            Op::SliceCols(a, start, len) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    ga[i * c + start..i * c + start + len]
                        .copy_from_slice(&g[i * len..(i + 1) * len]);
                }
                vec![(*a, ga)]
            }
            Op::TakePerRow(a, idx) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; r * c];
                for (i, &j) in idx.iter().enumerate() {
                    ga[i * c + j] += g[i];
                }
                vec![(*a, ga)]
            }
            Op::SumAll(a) => {
                let n = self.value(*a).len();
                vec![(*a, vec![g[0]; n])]
            }
        }
    }
}
