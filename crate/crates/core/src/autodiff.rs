//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation in creation order, which is already a
//! topological order of the graph, so the backward pass is a single reverse
//! sweep. [`Var`] is a cheap copyable handle into the tape.
//!
//! ```
//! use vaecca::{Tape, Tensor};
//!
//! let tape = Tape::<f64>::new();
//! let w = tape.param(0, Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
//! let loss = w.square().sum();
//! let mut grads = vaecca::Gradients::new();
//! tape.backward(loss, &mut grads).unwrap();
//! assert_eq!(grads.get(0).unwrap().as_slice(), &[2.0, 4.0, 6.0, 8.0]);
//! ```

use std::cell::{Cell, RefCell};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Exp,
    /// Natural log; the caller keeps inputs positive.
    Ln,
    Square,
    /// `log(1 + eˣ)`, evaluated without overflow.
    Softplus,
    Tanh,
    /// Subtracts each row's mean from that row.
    CenterRows,
    /// Scales each row to unit Euclidean norm; all-zero rows map to zero.
    NormalizeRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// Adds a `1 × cols` row to every row of the left operand.
    AddRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    Frobenius,
}

#[derive(Debug, Clone, Copy)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    /// `a · bᵀ`
    MatMulT(usize, usize),
    Binary(BinaryOp, usize, usize),
    Unary(UnaryOp, usize),
    Scale(usize, T),
    AddScalar(usize, T),
    Reduce(Reduction, usize),
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    param: Option<usize>,
}

/// Recording of one forward computation.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    degenerate_rows: Cell<usize>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

/// Gradients accumulated per parameter slot across backward passes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients<T> {
    slots: Vec<Option<Tensor<T>>>,
}

/// Gradient of one backward pass with respect to every node on the tape.
pub struct NodeGradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            degenerate_rows: Cell::new(0),
        }
    }

    /// Leaf that receives gradients under `slot` in [`Tape::backward`].
    pub fn param(&self, slot: usize, value: Tensor<T>) -> Var<'_, T> {
        self.push(Op::Leaf, value, Some(slot))
    }

    /// Leaf that never receives gradients.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Op::Leaf, value, None)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of all-zero rows seen by [`UnaryOp::NormalizeRows`] so far.
    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows.get()
    }

    fn push(&self, op: Op<T>, value: Tensor<T>, param: Option<usize>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value, param });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Tensor<T> {
        self.nodes.borrow()[id].value.clone()
    }

    /// Backward pass from a scalar `loss`, returning the gradient of every node.
    pub fn gradients(&self, loss: Var<'_, T>) -> Result<NodeGradients<T>> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {shape:?}"
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(T::one()));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let val = |i: usize| &nodes[i].value;
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, a, g.matmul_t(val(b))?)?;
                    accumulate(&mut grads, b, val(a).t_matmul(&g)?)?;
                }
                Op::MatMulT(a, b) => {
                    accumulate(&mut grads, a, g.matmul(val(b))?)?;
                    accumulate(&mut grads, b, g.t_matmul(val(a))?)?;
                }
                Op::Binary(kind, a, b) => match kind {
                    BinaryOp::Add => {
                        accumulate(&mut grads, a, g.clone())?;
                        accumulate(&mut grads, b, g.clone())?;
                    }
                    BinaryOp::Sub => {
                        accumulate(&mut grads, a, g.clone())?;
                        accumulate(&mut grads, b, g.scale(-T::one()))?;
                    }
                    BinaryOp::Mul => {
                        accumulate(&mut grads, a, g.mul(val(b))?)?;
                        accumulate(&mut grads, b, g.mul(val(a))?)?;
                    }
                    BinaryOp::AddRow => {
                        accumulate(&mut grads, b, g.sum_rows())?;
                        accumulate(&mut grads, a, g.clone())?;
                    }
                },
                Op::Unary(kind, a) => {
                    let x = val(a);
                    let y = &node.value;
                    let da = match kind {
                        UnaryOp::Exp => g.mul(y)?,
                        UnaryOp::Ln => g.zip_map(x, "ln'", |g, x| g / x)?,
                        UnaryOp::Square => g.zip_map(x, "square'", |g, x| g * (x + x))?,
                        UnaryOp::Softplus => g.zip_map(x, "softplus'", |g, x| g * sigmoid(x))?,
                        UnaryOp::Tanh => g.zip_map(y, "tanh'", |g, y| g * (T::one() - y * y))?,
                        UnaryOp::CenterRows => center_rows(&g),
                        UnaryOp::NormalizeRows => normalize_rows_backward(x, y, &g),
                    };
                    accumulate(&mut grads, a, da)?;
                }
                Op::Scale(a, s) => accumulate(&mut grads, a, g.scale(s))?,
                Op::AddScalar(a, _) => accumulate(&mut grads, a, g.clone())?,
                Op::Reduce(kind, a) => {
                    let x = val(a);
                    let up = g.item();
                    let da = match kind {
                        Reduction::Sum => Tensor::full(x.rows(), x.cols(), up),
                        Reduction::Mean => {
                            Tensor::full(x.rows(), x.cols(), up / T::from_usize_exact(x.len()))
                        }
                        Reduction::Frobenius => {
                            let norm = node.value.item();
                            if norm == T::zero() {
                                // Subgradient at the origin.
                                Tensor::zeros(x.rows(), x.cols())
                            } else {
                                x.scale(up / norm)
                            }
                        }
                    };
                    accumulate(&mut grads, a, da)?;
                }
            }
            grads[id] = Some(g);
        }

        Ok(NodeGradients {
            grads,
            shapes: nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    /// Backward pass from `loss`, adding each parameter's gradient into
    /// `acc`. Parameters not reached by `loss` receive a zero gradient.
    pub fn backward(&self, loss: Var<'_, T>, acc: &mut Gradients<T>) -> Result<()> {
        let node_grads = self.gradients(loss)?;
        let nodes = self.nodes.borrow();
        for (id, node) in nodes.iter().enumerate() {
            if let Some(slot) = node.param {
                let g = node_grads.grads[id]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols()));
                acc.accumulate(slot, g)?;
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], id: usize, g: Tensor<T>) -> Result<()> {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    // max(x, 0) + log1p(exp(-|x|))
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn center_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    let n = T::from_usize_exact(x.cols().max(1));
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().copied().sum::<T>() / n;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

fn normalize_rows<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, usize) {
    let mut out = x.clone();
    let mut degenerate = 0;
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = dot(row, row).sqrt();
        if norm == T::zero() {
            degenerate += 1;
        } else {
            row.iter_mut().for_each(|v| *v = *v / norm);
        }
    }
    (out, degenerate)
}

fn normalize_rows_backward<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let xr = x.row(i);
        let norm = dot(xr, xr).sqrt();
        if norm == T::zero() {
            continue;
        }
        let (yr, gr) = (y.row(i), g.row(i));
        let proj = dot(yr, gr);
        for ((o, &yv), &gv) in out.row_mut(i).iter_mut().zip(yr).zip(gr) {
            *o = (gv - yv * proj) / norm;
        }
    }
    out
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Tensor<T> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    fn check_same_tape(&self, other: &Var<'t, T>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars from different tapes combined"
        );
    }

    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.check_same_tape(&other);
        let v = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.matmul(&nodes[other.id].value)?
        };
        Ok(self.tape.push(Op::MatMul(self.id, other.id), v, None))
    }

    /// `self · otherᵀ`
    pub fn matmul_t(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.check_same_tape(&other);
        let v = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.matmul_t(&nodes[other.id].value)?
        };
        Ok(self.tape.push(Op::MatMulT(self.id, other.id), v, None))
    }

    pub fn binary(self, kind: BinaryOp, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.check_same_tape(&other);
        let v = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            match kind {
                BinaryOp::Add => a.add(b)?,
                BinaryOp::Sub => a.sub(b)?,
                BinaryOp::Mul => a.mul(b)?,
                BinaryOp::AddRow => a.add_row(b)?,
            }
        };
        Ok(self.tape.push(Op::Binary(kind, self.id, other.id), v, None))
    }

    pub fn unary(self, kind: UnaryOp) -> Var<'t, T> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            match kind {
                UnaryOp::Exp => a.map(T::exp),
                UnaryOp::Ln => a.map(T::ln),
                UnaryOp::Square => a.map(|x| x * x),
                UnaryOp::Softplus => a.map(softplus),
                UnaryOp::Tanh => a.map(T::tanh),
                UnaryOp::CenterRows => center_rows(a),
                UnaryOp::NormalizeRows => {
                    let (out, degenerate) = normalize_rows(a);
                    let seen = self.tape.degenerate_rows.get();
                    self.tape.degenerate_rows.set(seen + degenerate);
                    out
                }
            }
        };
        self.tape.push(Op::Unary(kind, self.id), v, None)
    }

    pub fn reduce(self, kind: Reduction) -> Result<Var<'t, T>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            if a.is_empty() {
                return Err(Error::Empty { op: "reduce" });
            }
            match kind {
                Reduction::Sum => a.sum(),
                Reduction::Mean => a.mean()?,
                Reduction::Frobenius => a.frobenius(),
            }
        };
        Ok(self
            .tape
            .push(Op::Reduce(kind, self.id), Tensor::scalar(v), None))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(BinaryOp::Add, other)
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(BinaryOp::Sub, other)
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(BinaryOp::Mul, other)
    }

    pub fn add_row(self, row: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(BinaryOp::AddRow, row)
    }

    pub fn scale(self, s: T) -> Var<'t, T> {
        let v = self.tape.nodes.borrow()[self.id].value.scale(s);
        self.tape.push(Op::Scale(self.id, s), v, None)
    }

    pub fn add_scalar(self, s: T) -> Var<'t, T> {
        let v = self.tape.nodes.borrow()[self.id].value.map(|x| x + s);
        self.tape.push(Op::AddScalar(self.id, s), v, None)
    }

    pub fn exp(self) -> Var<'t, T> {
        self.unary(UnaryOp::Exp)
    }

    pub fn ln(self) -> Var<'t, T> {
        self.unary(UnaryOp::Ln)
    }

    pub fn square(self) -> Var<'t, T> {
        self.unary(UnaryOp::Square)
    }

    pub fn softplus(self) -> Var<'t, T> {
        self.unary(UnaryOp::Softplus)
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(UnaryOp::Tanh)
    }

    pub fn center_rows(self) -> Var<'t, T> {
        self.unary(UnaryOp::CenterRows)
    }

    pub fn normalize_rows(self) -> Var<'t, T> {
        self.unary(UnaryOp::NormalizeRows)
    }

    /// Sum of all entries. Never fails for non-empty inputs.
    pub fn sum(self) -> Var<'t, T> {
        self.reduce(Reduction::Sum)
            .unwrap_or_else(|_| self.tape.constant(Tensor::scalar(T::zero())))
    }

    pub fn mean(self) -> Result<Var<'t, T>> {
        self.reduce(Reduction::Mean)
    }

    pub fn frobenius(self) -> Result<Var<'t, T>> {
        self.reduce(Reduction::Frobenius)
    }
}

impl<T: Scalar> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

impl<T: Scalar> NodeGradients<T> {
    /// Gradient with respect to `var`; zero if `var` does not affect the loss.
    pub fn wrt(&self, var: Var<'_, T>) -> Tensor<T> {
        self.grads[var.id].clone().unwrap_or_else(|| {
            let (r, c) = self.shapes[var.id];
            Tensor::zeros(r, c)
        })
    }
}

impl<T: Scalar> Gradients<T> {
    pub fn new() -> Self {
        Self { slots: Vec::new() }
    }

    pub fn get(&self, slot: usize) -> Option<&Tensor<T>> {
        self.slots.get(slot).and_then(Option::as_ref)
    }

    /// Clears all accumulated gradients.
    pub fn reset(&mut self) {
        self.slots.clear();
    }

    pub fn accumulate(&mut self, slot: usize, g: Tensor<T>) -> Result<()> {
        if self.slots.len() <= slot {
            self.slots.resize(slot + 1, None);
        }
        accumulate(&mut self.slots, slot, g)
    }

    /// Global L2 norm over every accumulated gradient.
    pub fn norm(&self) -> T {
        self.slots
            .iter()
            .flatten()
            .map(|g| g.as_slice().iter().map(|&v| v * v).sum::<T>())
            .sum::<T>()
            .sqrt()
    }

    pub fn scale_all(&mut self, s: T) {
        for g in self.slots.iter_mut().flatten() {
            *g = g.scale(s);
        }
    }
}
