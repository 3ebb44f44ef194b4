//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records one forward pass. Every operation appends a node and
//! returns a [`Var`] handle; [`Tape::backward`] walks the nodes in reverse and
//! accumulates gradients for the parameters that were read through
//! [`Tape::param`]. Sparse operands of [`Tape::spmm`] are constants: gradients
//! flow to the dense side only.

mod adam;
mod gradcheck;
mod nn;
mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use nn::Linear;
pub use params::{glorot_uniform, ParamId, ParamStore};

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Hadamard(Var, Var),
    RowScale {
        alpha: Var,
        z: Var,
    },
    ScalarMul {
        s: Var,
        z: Var,
    },
    AddRowBias {
        z: Var,
        b: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Log(Var),
    Concat(Vec<Var>),
    Gather(Var, Arc<Vec<usize>>),
    Column(Var, usize),
    L1RowNorm(Var),
    Cosine(Var, Var),
    Dropout(Var, Array2<f64>),
    CrossEntropy {
        logits: Var,
        targets: Arc<Vec<(usize, usize)>>,
        probs: Array2<f64>,
    },
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "constant",
            Op::Param(_) => "parameter",
            Op::MatMul(..) => "matmul",
            Op::SpMM(..) => "spmm",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale(..) => "scale",
            Op::Hadamard(..) => "hadamard",
            Op::RowScale { .. } => "row_scale",
            Op::ScalarMul { .. } => "scalar_mul",
            Op::AddRowBias { .. } => "add_row_bias",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softmax(_) => "softmax",
            Op::Log(_) => "log",
            Op::Concat(_) => "concat",
            Op::Gather(..) => "gather",
            Op::Column(..) => "column",
            Op::L1RowNorm(_) => "l1_row_normalize",
            Op::Cosine(..) => "cosine",
            Op::Dropout(..) => "dropout",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Gradients of one backward pass, keyed by parameter.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    grads: HashMap<ParamId, Array2<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(&id)
    }

    /// Gradient of `id`, or zeros of the parameter's shape when it was not reached.
    pub fn get_or_zeros(&self, store: &ParamStore, id: ParamId) -> Array2<f64> {
        self.grads
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(store.value(id).dim()))
    }
}

/// One forward pass worth of recorded operations.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    train: bool,
    deterministic: bool,
    params: HashMap<ParamId, Var>,
}

impl Tape {
    /// A tape whose dropout layers are active when `train` is true.
    pub fn new(train: bool) -> Self {
        Self {
            nodes: Vec::new(),
            train,
            deterministic: false,
            params: HashMap::new(),
        }
    }

    pub fn eval() -> Self {
        Self::new(false)
    }

    /// Tape used by the gradient checker: any stochastic op is refused.
    pub(crate) fn deterministic(train: bool) -> Self {
        Self {
            deterministic: true,
            ..Self::new(train)
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.shape(v) {
            (1, 1) => Ok(self.value(v)[[0, 0]]),
            other => Err(Error::Shape(format!("expected a scalar, got {other:?}"))),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value produced by {}",
                op.name()
            )));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push(value, Op::Leaf, false)
    }

    /// Reads a parameter onto the tape. Repeated reads share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let v = self.push(store.value(id).clone(), Op::Param(id), true)?;
        self.params.insert(id, v);
        Ok(v)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((_, k1), (k2, _)) = (self.shape(a), self.shape(b));
        if k1 != k2 {
            return Err(Error::Shape(format!(
                "matmul: {:?} x {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// Sparse (constant) times dense.
    pub fn spmm(&mut self, a: &Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = a.spmm(self.value(x).view())?;
        let rg = self.rg(x);
        self.push(value, Op::SpMM(Arc::clone(a), x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a) * c;
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "hadamard")?;
        let value = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Hadamard(a, b), rg)
    }

    /// `diag(alpha) z` for an `N x 1` column `alpha`.
    pub fn row_scale(&mut self, alpha: Var, z: Var) -> Result<Var> {
        let (n, one) = self.shape(alpha);
        if one != 1 || n != self.shape(z).0 {
            return Err(Error::Shape(format!(
                "row_scale: alpha {:?}, z {:?}",
                self.shape(alpha),
                self.shape(z)
            )));
        }
        let value = self.value(z) * self.value(alpha);
        let rg = self.rg(alpha) || self.rg(z);
        self.push(value, Op::RowScale { alpha, z }, rg)
    }

    /// `s * z` for a `1 x 1` node `s`.
    pub fn scalar_mul(&mut self, s: Var, z: Var) -> Result<Var> {
        let c = self.scalar(s)?;
        let value = self.value(z) * c;
        let rg = self.rg(s) || self.rg(z);
        self.push(value, Op::ScalarMul { s, z }, rg)
    }

    /// Adds the `1 x d` row `b` to every row of `z`.
    pub fn add_row_bias(&mut self, z: Var, b: Var) -> Result<Var> {
        if self.shape(b) != (1, self.shape(z).1) {
            return Err(Error::Shape(format!(
                "add_row_bias: z {:?}, bias {:?}",
                self.shape(z),
                self.shape(b)
            )));
        }
        let value = self.value(z) + self.value(b);
        let rg = self.rg(z) || self.rg(b);
        self.push(value, Op::AddRowBias { z, b }, rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).mapv(|v| v.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).mapv(|v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).1 == 0 {
            return Err(Error::InvalidArgument("softmax over an empty row".into()));
        }
        let value = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::Softmax(a), rg)
    }

    /// Natural logarithm; every input must be positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(v) = self.value(a).iter().find(|&&v| v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log of non-positive value {v}"
            )));
        }
        let value = self.value(a).mapv(f64::ln);
        let rg = self.rg(a);
        self.push(value, Op::Log(a), rg)
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let rows = self.shape(first).0;
        if let Some(bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(Error::Shape(format!(
                "concat: {} rows vs {:?}",
                rows,
                self.shape(*bad)
            )));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::Concat(parts.to_vec()), rg)
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let n = self.shape(a).0;
        if let Some(r) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Range(format!("gather row {r} of {n}")));
        }
        let value = self.value(a).select(Axis(0), rows);
        let rg = self.rg(a);
        self.push(value, Op::Gather(a, Arc::new(rows.to_vec())), rg)
    }

    /// Column `j` as an `N x 1` node.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        if j >= self.shape(a).1 {
            return Err(Error::Range(format!(
                "column {j} of a {:?} matrix",
                self.shape(a)
            )));
        }
        let value = self.value(a).slice(s![.., j..j + 1]).to_owned();
        let rg = self.rg(a);
        self.push(value, Op::Column(a, j), rg)
    }

    /// Divides each row by its L1 norm; all-zero rows stay zero.
    pub fn l1_row_normalize(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        for mut row in value.outer_iter_mut() {
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                row.mapv_inplace(|v| v / s);
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::L1RowNorm(a), rg)
    }

    /// Cosine similarity of two equally shaped vectors (`1 x 1` result).
    /// A zero-norm operand yields similarity 0.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "cosine")?;
        let (x, y) = (self.value(a), self.value(b));
        let (na, nb) = (norm(x), norm(y));
        let c = if na > 0.0 && nb > 0.0 {
            (x * y).sum() / (na * nb)
        } else {
            0.0
        };
        let rg = self.rg(a) || self.rg(b);
        self.push(Array2::from_elem((1, 1), c), Op::Cosine(a, b), rg)
    }

    /// Inverted dropout: in training mode each entry is kept with probability
    /// `1 - rate` and scaled by `1 / (1 - rate)`; in evaluation mode it is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !self.train || rate == 0.0 {
            return Ok(a);
        }
        if self.deterministic {
            return Err(Error::InvalidArgument(
                "dropout is active: gradient checking needs a deterministic forward pass".into(),
            ));
        }
        let keep = 1.0 - rate;
        let mask = Array2::from_shape_fn(self.shape(a), |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let value = self.value(a) * &mask;
        let rg = self.rg(a);
        self.push(value, Op::Dropout(a, mask), rg)
    }

    /// Mean cross-entropy of `softmax(logits)` over `(node, class)` targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[(usize, usize)]) -> Result<Var> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument(
                "cross-entropy over an empty node set".into(),
            ));
        }
        let (n, k) = self.shape(logits);
        if let Some(&(i, c)) = targets.iter().find(|&&(i, c)| i >= n || c >= k) {
            return Err(Error::Range(format!(
                "target ({i}, {c}) outside logits {n}x{k}"
            )));
        }
        let x = self.value(logits);
        let probs = softmax_rows(x);
        let mut loss = 0.0;
        for &(i, c) in targets {
            let row = x.row(i);
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - x[[i, c]];
        }
        loss /= targets.len() as f64;
        let rg = self.rg(logits);
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                targets: Arc::new(targets.to_vec()),
                probs,
            },
            rg,
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let len = self.value(a).len();
        if len == 0 {
            return Err(Error::InvalidArgument("mean of an empty matrix".into()));
        }
        let value = Array2::from_elem((1, 1), self.value(a).sum() / len as f64);
        let rg = self.rg(a);
        self.push(value, Op::Mean(a), rg)
    }

    /// Back-propagates from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let mut acc = |v: Var, d: Array2<f64>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.grads.entry(*id).and_modify(|e| *e += &g).or_insert(g);
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        acc(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.rg(*b) {
                        acc(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::SpMM(m, x) => acc(*x, m.spmm_transpose(g.view())?),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&g);
                    acc(*a, g);
                }
                Op::Scale(a, c) => acc(*a, g * *c),
                Op::Hadamard(a, b) => {
                    acc(*a, &g * self.value(*b));
                    acc(*b, g * self.value(*a));
                }
                Op::RowScale { alpha, z } => {
                    if self.rg(*alpha) {
                        let da = (&g * self.value(*z)).sum_axis(Axis(1)).insert_axis(Axis(1));
                        acc(*alpha, da);
                    }
                    acc(*z, g * self.value(*alpha));
                }
                Op::ScalarMul { s, z } => {
                    if self.rg(*s) {
                        let ds = (&g * self.value(*z)).sum();
                        acc(*s, Array2::from_elem((1, 1), ds));
                    }
                    let c = self.value(*s)[[0, 0]];
                    acc(*z, g * c);
                }
                Op::AddRowBias { z, b } => {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*z, g);
                }
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    acc(*a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    acc(*a, d);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(*a, (g - &dot) * y);
                }
                Op::Log(a) => acc(*a, g / self.value(*a)),
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        acc(p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::Gather(a, rows) => {
                    let mut d = Array2::zeros(self.shape(*a));
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = d.row_mut(r);
                        dst += &g.row(k);
                    }
                    acc(*a, d);
                }
                Op::Column(a, j) => {
                    let mut d = Array2::zeros(self.shape(*a));
                    d.slice_mut(s![.., *j..*j + 1]).assign(&g);
                    acc(*a, d);
                }
                Op::L1RowNorm(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut d = Array2::zeros(x.dim());
                    for r in 0..x.nrows() {
                        let s: f64 = x.row(r).iter().map(|v| v.abs()).sum();
                        if s == 0.0 {
                            continue;
                        }
                        let gy: f64 = g.row(r).dot(&y.row(r));
                        for c in 0..x.ncols() {
                            d[[r, c]] = (g[[r, c]] - x[[r, c]].signum() * gy) / s;
                        }
                    }
                    acc(*a, d);
                }
                Op::Cosine(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let (nx, ny) = (norm(x), norm(y));
                    if nx > 0.0 && ny > 0.0 {
                        let c = node.value[[0, 0]];
                        let up = g[[0, 0]];
                        let dx = (y / (nx * ny) - x * (c / (nx * nx))) * up;
                        let dy = (x / (nx * ny) - y * (c / (ny * ny))) * up;
                        acc(*a, dx);
                        acc(*b, dy);
                    }
                }
                Op::Dropout(a, mask) => acc(*a, g * mask),
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let up = g[[0, 0]] / targets.len() as f64;
                    let mut d = Array2::zeros(probs.dim());
                    for &(i, c) in targets.iter() {
                        let mut row = d.row_mut(i);
                        row.scaled_add(up, &probs.row(i));
                        row[c] -= up;
                    }
                    acc(*logits, d);
                }
                Op::Sum(a) => {
                    let c = g[[0, 0]];
                    acc(*a, Array2::from_elem(self.shape(*a), c));
                }
                Op::Mean(a) => {
                    let len = self.value(*a).len() as f64;
                    let c = g[[0, 0]] / len;
                    acc(*a, Array2::from_elem(self.shape(*a), c));
                }
            }
        }
        Ok(out)
    }
}

fn norm(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.outer_iter_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}
