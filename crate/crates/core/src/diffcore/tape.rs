use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::tensor::Tensor;
use crate::math;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive op kinds accepted by [`Tape::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    MatMul,
    /// Elementwise sum; the second operand may be a row broadcast over the
    /// rows of the first.
    Add,
    Mul,
    Relu,
    Tanh,
    Sigmoid,
    Log,
    Square,
    /// Mean of all elements, producing a one-element tensor.
    Mean,
    /// Concatenation along the last axis.
    Concat,
    /// Columns `start..start + len` of the last axis.
    Slice { start: usize, len: usize },
    Scale(f64),
    Clip { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add { lhs: Var, rhs: Var, broadcast: bool },
    Mul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Square(Var),
    Mean(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize, len: usize },
    Scale(Var, f64),
    Clip { src: Var, lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of primitive ops. Nodes are appended in evaluation order,
/// which is a topological order, so backward is a reverse scan.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }
}

fn dims(op: &'static str, shapes: &[&[usize]]) -> Error {
    Error::Dimension { op, shapes: shapes.iter().map(|s| s.to_vec()).collect() }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient (parameters, saliency inputs).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn finish(&mut self, name: &'static str, value: Tensor, op: Op, rg: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        Ok(self.push(value, op, rg))
    }

    /// Applies a primitive op by kind.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        let unary = |inputs: &[Var]| -> Result<Var> {
            match inputs {
                [a] => Ok(*a),
                _ => Err(Error::contract("op expects exactly one input")),
            }
        };
        let binary = |inputs: &[Var]| -> Result<(Var, Var)> {
            match inputs {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::contract("op expects exactly two inputs")),
            }
        };
        match kind {
            OpKind::MatMul => binary(inputs).and_then(|(a, b)| self.matmul(a, b)),
            OpKind::Add => binary(inputs).and_then(|(a, b)| self.add(a, b)),
            OpKind::Mul => binary(inputs).and_then(|(a, b)| self.mul(a, b)),
            OpKind::Relu => unary(inputs).and_then(|a| self.relu(a)),
            OpKind::Tanh => unary(inputs).and_then(|a| self.tanh(a)),
            OpKind::Sigmoid => unary(inputs).and_then(|a| self.sigmoid(a)),
            OpKind::Log => unary(inputs).and_then(|a| self.log(a)),
            OpKind::Square => unary(inputs).and_then(|a| self.square(a)),
            OpKind::Mean => unary(inputs).and_then(|a| self.mean(a)),
            OpKind::Concat => self.concat(inputs),
            OpKind::Slice { start, len } => unary(inputs).and_then(|a| self.slice(a, start, len)),
            OpKind::Scale(c) => unary(inputs).and_then(|a| self.scale(a, c)),
            OpKind::Clip { lo, hi } => unary(inputs).and_then(|a| self.clip(a, lo, hi)),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(dims("matmul", &[av.shape(), bv.shape()]));
        }
        let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul(av.data(), bv.data(), m, k, n, &mut out);
        let rg = self.requires(a) || self.requires(b);
        self.finish("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let broadcast = if av.shape() == bv.shape() {
            false
        } else if av.rank() == 2
            && bv.len() == av.cols()
            && (bv.rank() == 1 || (bv.rank() == 2 && bv.shape()[0] == 1))
        {
            true
        } else {
            return Err(dims("add", &[av.shape(), bv.shape()]));
        };
        let mut out = av.data().to_vec();
        if broadcast {
            kernels::add_row(&mut out, bv.data());
        } else {
            for (o, y) in out.iter_mut().zip(bv.data()) {
                *o += y;
            }
        }
        let value = Tensor::from_parts(av.shape().to_vec(), out);
        let rg = self.requires(a) || self.requires(b);
        self.finish("add", value, Op::Add { lhs: a, rhs: b, broadcast }, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dims("mul", &[av.shape(), bv.shape()]));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_parts(av.shape().to_vec(), out);
        let rg = self.requires(a) || self.requires(b);
        self.finish("mul", value, Op::Mul(a, b), rg)
    }

    fn unary_map(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = self.value(a).map(f);
        let rg = self.requires(a);
        self.finish(name, value, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary_map("relu", a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary_map("tanh", a, math::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary_map("sigmoid", a, math::sigmoid, Op::Sigmoid(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary_map("log", a, math::ln, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary_map("square", a, |x| x * x, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary_map("scale", a, |x| c * x, Op::Scale(a, c))
    }

    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo <= hi) {
            return Err(Error::contract("clip bounds must satisfy lo <= hi"));
        }
        self.unary_map("clip", a, |x| x.clamp(lo, hi), Op::Clip { src: a, lo, hi })
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.requires(a);
        self.finish("mean", Tensor::scalar(m), Op::Mean(a), rg)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::contract("concat of zero tensors"))?;
        let lead: Vec<usize> = {
            let s = self.value(*first).shape();
            s[..s.len() - 1].to_vec()
        };
        let mut total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            if s[..s.len() - 1] != lead[..] {
                let shapes: Vec<&[usize]> = parts.iter().map(|p| self.value(*p).shape()).collect();
                return Err(dims("concat", &shapes));
            }
            total += s[s.len() - 1];
        }
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                let v = self.value(*p);
                let c = v.cols();
                out.extend_from_slice(&v.data()[r * c..(r + 1) * c]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let rg = parts.iter().any(|p| self.requires(*p));
        self.finish("concat", Tensor::from_parts(shape, out), Op::Concat(parts.to_vec()), rg)
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a);
        let c = v.cols();
        if len == 0 || start + len > c {
            return Err(dims("slice", &[v.shape(), &[start, len]]));
        }
        let rows = v.len() / c;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&v.data()[r * c + start..r * c + start + len]);
        }
        let mut shape = v.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let rg = self.requires(a);
        self.finish("slice", Tensor::from_parts(shape, out), Op::Slice { src: a, start, len }, rg)
    }

    /// `a - b` built from primitives.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    /// Mean squared difference over all elements.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let d = self.sub(pred, target)?;
        let sq = self.square(d)?;
        self.mean(sq)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract("backward requires a scalar (one-element) loss"));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
        if !self.requires(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.requires(*a) {
                    let mut da = vec![0.0; m * k];
                    kernels::matmul_a_bt_acc(gd, bv.data(), m, k, n, &mut da);
                    self.accumulate(grads, *a, Tensor::from_parts(vec![m, k], da));
                }
                if self.requires(*b) {
                    let mut db = vec![0.0; k * n];
                    kernels::matmul_at_b_acc(av.data(), gd, m, k, n, &mut db);
                    self.accumulate(grads, *b, Tensor::from_parts(vec![k, n], db));
                }
            }
            Op::Add { lhs, rhs, broadcast } => {
                self.accumulate(grads, *lhs, g.clone());
                if self.requires(*rhs) {
                    let rv = self.value(*rhs);
                    if *broadcast {
                        let n = rv.len();
                        let mut db = vec![0.0; n];
                        for row in gd.chunks_exact(n) {
                            for (d, x) in db.iter_mut().zip(row) {
                                *d += x;
                            }
                        }
                        self.accumulate(grads, *rhs, Tensor::from_parts(rv.shape().to_vec(), db));
                    } else {
                        self.accumulate(grads, *rhs, g.clone());
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.requires(*a) {
                    let d = gd.iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, *a, Tensor::from_parts(av.shape().to_vec(), d));
                }
                if self.requires(*b) {
                    let d = gd.iter().zip(av.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, Tensor::from_parts(bv.shape().to_vec(), d));
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let d = gd.iter().zip(x.data()).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 });
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), d.collect()));
            }
            Op::Tanh(a) => {
                let d = gd.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y));
                self.accumulate(grads, *a, Tensor::from_parts(out.shape().to_vec(), d.collect()));
            }
            Op::Sigmoid(a) => {
                let d = gd.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y));
                self.accumulate(grads, *a, Tensor::from_parts(out.shape().to_vec(), d.collect()));
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let d = gd.iter().zip(x.data()).map(|(g, x)| g / x);
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), d.collect()));
            }
            Op::Square(a) => {
                let x = self.value(*a);
                let d = gd.iter().zip(x.data()).map(|(g, x)| 2.0 * x * g);
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), d.collect()));
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                let share = gd[0] / x.len() as f64;
                self.accumulate(grads, *a, Tensor::full(x.shape(), share));
            }
            Op::Concat(parts) => {
                let total = out.cols();
                let rows = out.len() / total;
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let c = pv.cols();
                    if self.requires(*p) {
                        let mut d = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            d.extend_from_slice(&gd[r * total + offset..r * total + offset + c]);
                        }
                        self.accumulate(grads, *p, Tensor::from_parts(pv.shape().to_vec(), d));
                    }
                    offset += c;
                }
            }
            Op::Slice { src, start, len } => {
                let sv = self.value(*src);
                let c = sv.cols();
                let mut d = vec![0.0; sv.len()];
                for (r, chunk) in gd.chunks_exact(*len).enumerate() {
                    d[r * c + start..r * c + start + len].copy_from_slice(chunk);
                }
                self.accumulate(grads, *src, Tensor::from_parts(sv.shape().to_vec(), d));
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, g.map(|v| c * v));
            }
            Op::Clip { src, lo, hi } => {
                let x = self.value(*src);
                let d = gd
                    .iter()
                    .zip(x.data())
                    .map(|(g, &x)| if x >= *lo && x < *hi { *g } else { 0.0 });
                self.accumulate(grads, *src, Tensor::from_parts(x.shape().to_vec(), d.collect()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i2 = t.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = t.constant(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
        let y = t.matmul(i2, x).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 4.0]);
        assert_eq!(t.value(y).shape(), &[2, 1]);
    }

    #[test]
    fn relu_definition() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap());
        let y = t.apply(OpKind::Relu, &[x]).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn log_sigmoid_zero() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(0.0));
        let s = t.sigmoid(x).unwrap();
        let l = t.log(s).unwrap();
        assert!((t.value(l).item().unwrap() - libm::log(0.5)).abs() < 1e-15);
        assert!((t.value(l).item().unwrap() + 0.6931).abs() < 1e-4);
    }

    #[test]
    fn shape_mismatch_names_the_op() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        match t.matmul(a, b) {
            Err(Error::Dimension { op, shapes }) => {
                assert_eq!(op, "matmul");
                assert_eq!(shapes, vec![vec![2, 3], vec![2, 3]]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let c = t.constant(Tensor::zeros(&[3]));
        assert!(matches!(t.mul(a, c), Err(Error::Dimension { op: "mul", .. })));
    }

    #[test]
    fn square_derivative() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item().unwrap(), 6.0);
    }

    #[test]
    fn mean_rule() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.5, -2.0]).unwrap());
        let m = t.mean(x).unwrap();
        let g = t.backward(m).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn log_of_zero_is_non_finite_error() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![0.0, 1.0]).unwrap());
        assert_eq!(t.log(x), Err(Error::NonFinite { op: "log" }));
    }

    #[test]
    fn fan_out_sums_exactly() {
        // loss = tanh(x) + x², dx = (1 - tanh²x) + 2x
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.7));
        let a = t.tanh(x).unwrap();
        let b = t.square(x).unwrap();
        let s = t.add(a, b).unwrap();
        let g = t.backward(s).unwrap().get(x).unwrap().item().unwrap();

        let mut ta = Tape::new();
        let xa = ta.leaf(Tensor::scalar(0.7));
        let ya = ta.tanh(xa).unwrap();
        let ga = ta.backward(ya).unwrap().get(xa).unwrap().item().unwrap();
        let mut tb = Tape::new();
        let xb = tb.leaf(Tensor::scalar(0.7));
        let yb = tb.square(xb).unwrap();
        let gb = tb.backward(yb).unwrap().get(xb).unwrap().item().unwrap();
        assert_eq!(g, ga + gb);
    }

    #[test]
    fn relu_and_clip_kink_conventions() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![0.0, -1.0, 1.0]).unwrap());
        let r = t.relu(x).unwrap();
        let c = t.clip(x, -1.0, 1.0).unwrap();
        let s = t.add(r, c).unwrap();
        let m = t.mean(s).unwrap();
        let g = t.backward(m).unwrap();
        let third = 1.0 / 3.0;
        // relu'(0)=0, clip passes at lo, blocks at hi
        assert_eq!(g.get(x).unwrap().data(), &[third, third, third]);
    }

    #[test]
    fn broadcast_add_sums_bias_gradient_over_rows() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[3, 2]));
        let b = t.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let y = t.add(x, b).unwrap();
        let m = t.mean(y).unwrap();
        let g = t.backward(m).unwrap();
        assert_eq!(g.get(b).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn concat_and_slice_route_gradients() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = t.concat(&[a, b]).unwrap();
        assert_eq!(t.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let s = t.slice(c, 1, 1).unwrap();
        assert_eq!(t.value(s).data(), &[3.0, 5.0]);
        let m = t.mean(s).unwrap();
        let g = t.backward(m).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(g.get(b).unwrap().data(), &[0.5, 0.0, 0.5, 0.0]);
    }
}
