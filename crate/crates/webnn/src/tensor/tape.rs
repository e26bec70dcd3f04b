use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::{ops, Real, Tensor};
use crate::error::{Error, Result};

enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    MatMul(usize, usize),
    LeakyRelu(usize, T),
    Sigmoid(usize),
    Softmax(usize),
    MeanAxis(usize, usize),
    Sum(usize),
    Reshape(usize),
    TransposeLast(usize),
    Select {
        input: usize,
        axis: usize,
        index: usize,
    },
    Narrow {
        input: usize,
        axis: usize,
        start: usize,
    },
    Pad {
        input: usize,
        axis: usize,
    },
    Stack {
        inputs: Vec<usize>,
        axis: usize,
    },
    Conv2d {
        input: usize,
        kernel: usize,
        bias: usize,
        stride: usize,
    },
    BceWithLogits {
        logits: usize,
        target: Tensor<T>,
    },
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
    },
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Record of one forward pass. Nodes are appended in execution order, so
/// the record is already topologically sorted.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Real> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.value().shape())
            .finish()
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn needs_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// A constant input; no gradient is tracked for it.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable leaf whose gradient [`Tape::backward`] reports.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, true)
    }

    fn unary(&self, value: Tensor<T>, input: usize, op: Op<T>) -> Var<'_, T> {
        let rg = self.needs_grad(input);
        self.push(value, op, rg)
    }

    fn binary(&self, value: Tensor<T>, a: usize, b: usize, op: Op<T>) -> Var<'_, T> {
        let rg = self.needs_grad(a) || self.needs_grad(b);
        self.push(value, op, rg)
    }

    /// Reverse-mode sweep from a single-element `root`.
    ///
    /// Gradients of a value used several times are summed. Only leaves
    /// created with [`Tape::param`] keep their gradient in the result.
    pub fn backward(&self, root: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root_value = &nodes[root.id].value;
        if root_value.len() != 1 {
            return Err(Error::InvalidShape {
                shape: root_value.shape().to_vec(),
                reason: "backward root must be a scalar".into(),
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.id] = Some(Tensor::ones(root_value.shape().to_vec()));

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let mut acc = |input: usize, grad: Tensor<T>| {
                if !nodes[input].requires_grad {
                    return;
                }
                match &mut grads[input] {
                    Some(existing) => {
                        for (e, v) in existing.data_mut().iter_mut().zip(grad.data()) {
                            *e += *v;
                        }
                    }
                    slot @ None => *slot = Some(grad),
                }
            };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(*a, ops::reduce_to_shape(&g, val(*a).shape()));
                    acc(*b, ops::reduce_to_shape(&g, val(*b).shape()));
                }
                Op::Sub(a, b) => {
                    acc(*a, ops::reduce_to_shape(&g, val(*a).shape()));
                    acc(*b, ops::reduce_to_shape(&g.map(|v| -v), val(*b).shape()));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    if nodes[*a].requires_grad {
                        acc(*a, ops::reduce_to_shape(&ops::mul(&g, vb)?, va.shape()));
                    }
                    if nodes[*b].requires_grad {
                        acc(*b, ops::reduce_to_shape(&ops::mul(&g, va)?, vb.shape()));
                    }
                }
                Op::Scale(a, c) => acc(*a, g.map(|v| v * *c)),
                Op::MatMul(a, b) => {
                    let (da, db) = ops::batched_matmul_backward(
                        val(*a),
                        val(*b),
                        &g,
                        nodes[*a].requires_grad,
                        nodes[*b].requires_grad,
                    )?;
                    if let Some(da) = da {
                        acc(*a, da);
                    }
                    if let Some(db) = db {
                        acc(*b, db);
                    }
                }
                Op::LeakyRelu(a, alpha) => {
                    let x = val(*a);
                    let data = x
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&xi, &gi)| gi * ops::leaky_relu_grad_scalar(xi, *alpha))
                        .collect();
                    acc(*a, Tensor::from_parts(x.shape().to_vec(), data));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let data = y
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&yi, &gi)| gi * yi * (T::one() - yi))
                        .collect();
                    acc(*a, Tensor::from_parts(y.shape().to_vec(), data));
                }
                Op::Softmax(a) => acc(*a, ops::softmax_last_backward(&node.value, &g)),
                Op::MeanAxis(a, axis) => acc(*a, ops::mean_axis_backward(&g, val(*a).shape(), *axis)),
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    acc(*a, Tensor::full(val(*a).shape().to_vec(), gv));
                }
                Op::Reshape(a) => acc(*a, Tensor::from_parts(val(*a).shape().to_vec(), g.into_data())),
                Op::TransposeLast(a) => acc(*a, ops::transpose_last(&g)?),
                Op::Select { input, axis, index } => {
                    acc(*input, ops::select_backward(&g, val(*input).shape(), *axis, *index));
                }
                Op::Narrow { input, axis, start } => {
                    acc(*input, ops::narrow_backward(&g, val(*input).shape(), *axis, *start));
                }
                Op::Pad { input, axis } => {
                    let len = val(*input).shape()[*axis];
                    acc(*input, ops::narrow(&g, *axis, 0, len)?);
                }
                Op::Stack { inputs, axis } => {
                    for (k, &input) in inputs.iter().enumerate() {
                        if nodes[input].requires_grad {
                            acc(input, ops::select(&g, *axis, k)?);
                        }
                    }
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    stride,
                } => {
                    let (dx, dk, db) = ops::conv2d_backward(val(*input), val(*kernel), val(*bias), *stride, &g)?;
                    acc(*input, dx);
                    acc(*kernel, dk);
                    acc(*bias, db);
                }
                Op::BceWithLogits { logits, target } => {
                    acc(
                        *logits,
                        ops::bce_with_logits_backward(val(*logits), target, g.data()[0]),
                    );
                }
                Op::CrossEntropy { logits, labels } => {
                    acc(*logits, ops::cross_entropy_backward(val(*logits), labels, g.data()[0])?);
                }
            }
        }

        let grads = grads
            .into_iter()
            .zip(nodes.iter())
            .map(|(g, n)| match (&n.op, n.requires_grad) {
                (Op::Leaf, true) => g.or_else(|| Some(Tensor::zeros(n.value.shape().to_vec()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

/// Parameter gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a parameter leaf, or `None` for non-parameters.
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.grads.get_mut(var.id).and_then(Option::take)
    }
}

#[allow(clippy::should_implement_trait)]
impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn same_tape(&self, other: &Var<'_, T>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars from different tapes cannot be combined"
        );
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Self> {
        self.same_tape(&other);
        let v = ops::add(&self.value(), &other.value())?;
        Ok(self.tape.binary(v, self.id, other.id, Op::Add(self.id, other.id)))
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Self> {
        self.same_tape(&other);
        let v = ops::sub(&self.value(), &other.value())?;
        Ok(self.tape.binary(v, self.id, other.id, Op::Sub(self.id, other.id)))
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Self> {
        self.same_tape(&other);
        let v = ops::mul(&self.value(), &other.value())?;
        Ok(self.tape.binary(v, self.id, other.id, Op::Mul(self.id, other.id)))
    }

    pub fn scale(self, c: T) -> Self {
        let v = self.value().map(|x| x * c);
        self.tape.unary(v, self.id, Op::Scale(self.id, c))
    }

    pub fn matmul(self, other: Var<'t, T>) -> Result<Self> {
        self.same_tape(&other);
        let v = ops::batched_matmul(&self.value(), &other.value())?;
        Ok(self.tape.binary(v, self.id, other.id, Op::MatMul(self.id, other.id)))
    }

    pub fn leaky_relu(self, alpha: T) -> Self {
        let v = ops::leaky_relu(&self.value(), alpha);
        self.tape.unary(v, self.id, Op::LeakyRelu(self.id, alpha))
    }

    pub fn sigmoid(self) -> Self {
        let v = ops::sigmoid(&self.value());
        self.tape.unary(v, self.id, Op::Sigmoid(self.id))
    }

    pub fn softmax(self) -> Result<Self> {
        let v = ops::softmax_last(&self.value())?;
        Ok(self.tape.unary(v, self.id, Op::Softmax(self.id)))
    }

    pub fn mean_axis(self, axis: usize) -> Result<Self> {
        let v = ops::mean_axis(&self.value(), axis)?;
        Ok(self.tape.unary(v, self.id, Op::MeanAxis(self.id, axis)))
    }

    pub fn sum(self) -> Self {
        let v = ops::sum_all(&self.value());
        self.tape.unary(v, self.id, Op::Sum(self.id))
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let v = self.value().reshape(shape)?;
        Ok(self.tape.unary(v, self.id, Op::Reshape(self.id)))
    }

    pub fn transpose_last(self) -> Result<Self> {
        let v = ops::transpose_last(&self.value())?;
        Ok(self.tape.unary(v, self.id, Op::TransposeLast(self.id)))
    }

    pub fn select(self, axis: usize, index: usize) -> Result<Self> {
        let v = ops::select(&self.value(), axis, index)?;
        let op = Op::Select {
            input: self.id,
            axis,
            index,
        };
        Ok(self.tape.unary(v, self.id, op))
    }

    pub fn narrow(self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let v = ops::narrow(&self.value(), axis, start, len)?;
        let op = Op::Narrow {
            input: self.id,
            axis,
            start,
        };
        Ok(self.tape.unary(v, self.id, op))
    }

    pub fn pad_axis(self, axis: usize, new_len: usize) -> Result<Self> {
        let v = ops::pad_axis(&self.value(), axis, new_len)?;
        Ok(self.tape.unary(v, self.id, Op::Pad { input: self.id, axis }))
    }

    pub fn stack(items: &[Var<'t, T>], axis: usize) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Validation("stack of zero tensors".into()))?;
        items.iter().for_each(|v| first.same_tape(v));
        let values: Vec<_> = items.iter().map(|v| v.value()).collect();
        let refs: Vec<&Tensor<T>> = values.iter().map(|v| v.as_ref()).collect();
        let v = ops::stack(&refs, axis)?;
        let tape = first.tape;
        let rg = items.iter().any(|v| tape.needs_grad(v.id));
        let inputs = items.iter().map(|v| v.id).collect();
        Ok(tape.push(v, Op::Stack { inputs, axis }, rg))
    }

    pub fn conv2d(self, kernel: Var<'t, T>, bias: Var<'t, T>, stride: usize) -> Result<Self> {
        self.same_tape(&kernel);
        self.same_tape(&bias);
        let v = ops::conv2d(&self.value(), &kernel.value(), &bias.value(), stride)?;
        let tape = self.tape;
        let rg = [self.id, kernel.id, bias.id].iter().any(|&i| tape.needs_grad(i));
        let op = Op::Conv2d {
            input: self.id,
            kernel: kernel.id,
            bias: bias.id,
            stride,
        };
        Ok(tape.push(v, op, rg))
    }

    pub fn bce_with_logits(self, target: &Tensor<T>) -> Result<Self> {
        let loss = ops::bce_with_logits(&self.value(), target)?;
        let op = Op::BceWithLogits {
            logits: self.id,
            target: target.clone(),
        };
        Ok(self.tape.unary(Tensor::scalar(loss), self.id, op))
    }

    pub fn cross_entropy(self, labels: &[usize]) -> Result<Self> {
        let loss = ops::cross_entropy(&self.value(), labels)?;
        let op = Op::CrossEntropy {
            logits: self.id,
            labels: labels.to_vec(),
        };
        Ok(self.tape.unary(Tensor::scalar(loss), self.id, op))
    }
}
