//! Reverse-mode automatic differentiation on a recording tape.
//!
//! Operations are appended to the tape in execution order, which is also a
//! topological order. `backward` walks the tape once in reverse.

use std::cell::{Ref, RefCell};

use super::{matmul_acc, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Along dimension 0: one entry per row.
    Rows,
    /// Along dimension 1: one entry per column.
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    /// `ln(max(x, floor))`
    Ln(usize, f64),
    Softmax(usize, Axis),
    GatherRows(usize, Vec<usize>),
    MaskedFill(usize, Vec<bool>),
    Sum(usize),
    Transpose(usize),
    SliceCols(usize, usize),
    SliceRows(usize, usize),
    ConcatRows(Vec<usize>),
    RepeatRows(usize),
    Select(usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

/// A single-owner recording of a computation.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        inner.grads.push(None);
        Var {
            tape: self,
            id: inner.nodes.len() - 1,
        }
    }

    /// Records a trainable input.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Records an input that receives no gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let inner = self.inner.borrow();
        ids.iter().any(|&i| inner.nodes[i].requires_grad)
    }

    fn unary(
        &self,
        a: usize,
        op: Op,
        f: impl FnOnce(&Tensor) -> Result<Tensor, TensorError>,
    ) -> Result<Var<'_>, TensorError> {
        let value = f(&self.inner.borrow().nodes[a].value)?;
        let rg = self.needs(&[a]);
        Ok(self.push(value, op, rg))
    }

    fn binary(
        &self,
        a: usize,
        b: usize,
        op: Op,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor, TensorError>,
    ) -> Result<Var<'_>, TensorError> {
        let value = {
            let inner = self.inner.borrow();
            f(&inner.nodes[a].value, &inner.nodes[b].value)?
        };
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    /// Row lookup `table[ids[i], :]`; the backward pass scatter-adds.
    pub fn gather_rows<'t>(&'t self, table: Var<'t>, ids: &[usize]) -> Result<Var<'t>, TensorError> {
        self.unary(table.id, Op::GatherRows(table.id, ids.to_vec()), |t| {
            let d = t.cols();
            let mut data = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                if id >= t.rows() {
                    return Err(TensorError::IndexOutOfRange {
                        index: id,
                        len: t.rows(),
                    });
                }
                data.extend_from_slice(t.row(id));
            }
            Tensor::new(ids.len(), d, data)
        })
    }

    /// Stacks `1×c` (or `k×c`) pieces vertically.
    pub fn concat_rows<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>, TensorError> {
        let ids: Vec<usize> = parts.iter().map(|v| v.id).collect();
        let value = {
            let inner = self.inner.borrow();
            let first = parts
                .first()
                .map(|p| &inner.nodes[p.id].value)
                .ok_or(TensorError::BadData {
                    shape: vec![0, 0],
                    len: 0,
                })?;
            let cols = first.cols();
            let mut rows = 0;
            let mut data = Vec::new();
            for &id in &ids {
                let v = &inner.nodes[id].value;
                if v.cols() != cols {
                    return Err(mismatch("concat_rows", first, v));
                }
                rows += v.rows();
                data.extend_from_slice(v.data());
            }
            Tensor::new(rows, cols, data)?
        };
        let rg = self.needs(&ids);
        Ok(self.push(value, Op::ConcatRows(ids), rg))
    }

    pub fn value(&self, v: Var<'_>) -> Tensor {
        self.inner.borrow().nodes[v.id].value.clone()
    }

    fn value_ref(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.inner.borrow(), |i| &i.nodes[id].value)
    }

    /// Accumulated gradient of a recorded value, if any backward pass reached it.
    pub fn grad(&self, v: Var<'_>) -> Option<Tensor> {
        let inner = self.inner.borrow();
        let shape = inner.nodes[v.id].value.shape();
        inner.grads[v.id]
            .as_ref()
            .map(|g| Tensor::new(shape[0], shape[1], g.clone()).expect("gradient shape"))
    }

    pub fn zero_grad(&self) {
        let mut inner = self.inner.borrow_mut();
        for g in inner.grads.iter_mut() {
            *g = None;
        }
    }

    /// Backpropagates from a scalar. Gradients accumulate across calls
    /// until [`Tape::zero_grad`].
    pub fn backward(&self, loss: Var<'_>) -> Result<(), TensorError> {
        let mut inner = self.inner.borrow_mut();
        let shape = inner.nodes[loss.id].value.shape();
        if shape != [1, 1] {
            return Err(TensorError::NotScalar {
                shape: shape.to_vec(),
            });
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.id] = Some(vec![1.0]);
        let nodes = &inner.nodes;

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = Some(g);
                continue;
            }
            let send = |target: usize, grads: &mut Vec<Option<Vec<f64>>>, f: &dyn Fn(&mut [f64])| {
                if !nodes[target].requires_grad {
                    return;
                }
                let slot = grads[target].get_or_insert_with(|| vec![0.0; nodes[target].value.len()]);
                f(slot);
            };
            let out = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let av = &nodes[*a].value;
                    let bv = &nodes[*b].value;
                    let (p, q, r) = (av.rows(), av.cols(), bv.cols());
                    send(*a, &mut grads, &|da| {
                        // dA = dC · Bᵀ
                        for i in 0..p {
                            let gr = &g[i * r..(i + 1) * r];
                            for k in 0..q {
                                let br = &bv.data()[k * r..(k + 1) * r];
                                da[i * q + k] += gr.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                    send(*b, &mut grads, &|db| {
                        // dB = Aᵀ · dC
                        for i in 0..p {
                            let gr = &g[i * r..(i + 1) * r];
                            for k in 0..q {
                                let aik = av.data()[i * q + k];
                                if aik == 0.0 {
                                    continue;
                                }
                                for (d, &x) in db[k * r..(k + 1) * r].iter_mut().zip(gr) {
                                    *d += aik * x;
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    for (target, s) in [(*a, 1.0), (*b, sign)] {
                        let scalar = nodes[target].value.len() == 1 && g.len() != 1;
                        send(target, &mut grads, &|d| {
                            if scalar {
                                d[0] += s * g.iter().sum::<f64>();
                            } else {
                                for (x, &y) in d.iter_mut().zip(&g) {
                                    *x += s * y;
                                }
                            }
                        });
                    }
                }
                Op::Mul(a, b) => {
                    for (target, other) in [(*a, *b), (*b, *a)] {
                        let ov = &nodes[other].value;
                        let scalar_target = nodes[target].value.len() == 1 && g.len() != 1;
                        send(target, &mut grads, &|d| {
                            let o = |i: usize| if ov.len() == 1 { ov.data()[0] } else { ov.data()[i] };
                            if scalar_target {
                                d[0] += g.iter().enumerate().map(|(i, y)| y * o(i)).sum::<f64>();
                            } else {
                                for (i, x) in d.iter_mut().enumerate() {
                                    *x += g[i] * o(i);
                                }
                            }
                        });
                    }
                }
                Op::Scale(a, s) => send(*a, &mut grads, &|d| {
                    for (x, &y) in d.iter_mut().zip(&g) {
                        *x += s * y;
                    }
                }),
                Op::Tanh(a) => send(*a, &mut grads, &|d| {
                    for ((x, &y), &t) in d.iter_mut().zip(&g).zip(out.data()) {
                        *x += y * (1.0 - t * t);
                    }
                }),
                Op::Sigmoid(a) => send(*a, &mut grads, &|d| {
                    for ((x, &y), &s) in d.iter_mut().zip(&g).zip(out.data()) {
                        *x += y * s * (1.0 - s);
                    }
                }),
                Op::Ln(a, floor) => {
                    let av = &nodes[*a].value;
                    send(*a, &mut grads, &|d| {
                        for ((x, &y), &v) in d.iter_mut().zip(&g).zip(av.data()) {
                            if v > *floor {
                                *x += y / v;
                            }
                        }
                    });
                }
                Op::Softmax(a, axis) => {
                    let (rows, cols) = (out.rows(), out.cols());
                    let (lines, len, stride, step) = match axis {
                        Axis::Cols => (rows, cols, cols, 1),
                        Axis::Rows => (cols, rows, 1, cols),
                    };
                    send(*a, &mut grads, &|d| {
                        for l in 0..lines {
                            let base = l * stride;
                            let idx = |j: usize| base + j * step;
                            let dot: f64 = (0..len).map(|j| g[idx(j)] * out.data()[idx(j)]).sum();
                            for j in 0..len {
                                let y = out.data()[idx(j)];
                                d[idx(j)] += y * (g[idx(j)] - dot);
                            }
                        }
                    });
                }
                Op::GatherRows(table, ids) => {
                    let dcols = out.cols();
                    send(*table, &mut grads, &|d| {
                        for (r, &id) in ids.iter().enumerate() {
                            for c in 0..dcols {
                                d[id * dcols + c] += g[r * dcols + c];
                            }
                        }
                    });
                }
                Op::MaskedFill(a, keep) => send(*a, &mut grads, &|d| {
                    for (i, x) in d.iter_mut().enumerate() {
                        if keep[i] {
                            *x += g[i];
                        }
                    }
                }),
                Op::Sum(a) => send(*a, &mut grads, &|d| {
                    for x in d.iter_mut() {
                        *x += g[0];
                    }
                }),
                Op::Transpose(a) => {
                    let (rows, cols) = (out.rows(), out.cols());
                    send(*a, &mut grads, &|d| {
                        // input is cols×rows
                        for i in 0..rows {
                            for j in 0..cols {
                                d[j * rows + i] += g[i * cols + j];
                            }
                        }
                    });
                }
                Op::SliceCols(a, start) => {
                    let in_cols = nodes[*a].value.cols();
                    let (rows, cols) = (out.rows(), out.cols());
                    send(*a, &mut grads, &|d| {
                        for i in 0..rows {
                            for j in 0..cols {
                                d[i * in_cols + start + j] += g[i * cols + j];
                            }
                        }
                    });
                }
                Op::SliceRows(a, start) => {
                    let cols = out.cols();
                    send(*a, &mut grads, &|d| {
                        for (x, &y) in d[start * cols..start * cols + g.len()].iter_mut().zip(&g) {
                            *x += y;
                        }
                    });
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p].value.len();
                        let piece = &g[offset..offset + len];
                        send(p, &mut grads, &|d| {
                            for (x, &y) in d.iter_mut().zip(piece) {
                                *x += y;
                            }
                        });
                        offset += len;
                    }
                }
                Op::RepeatRows(a) => {
                    let cols = out.cols();
                    send(*a, &mut grads, &|d| {
                        for row in g.chunks(cols) {
                            for (x, &y) in d.iter_mut().zip(row) {
                                *x += y;
                            }
                        }
                    });
                }
                Op::Select(a, idx) => send(*a, &mut grads, &|d| d[*idx] += g[0]),
            }
            grads[id] = Some(g);
        }

        for (id, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            if !inner.nodes[id].requires_grad {
                continue;
            }
            match &mut inner.grads[id] {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(*self)
    }

    pub fn shape(&self) -> [usize; 2] {
        self.tape.value_ref(self.id).shape()
    }

    /// Value of a `1×1` result.
    pub fn item(&self) -> Result<f64, TensorError> {
        self.tape.value_ref(self.id).item()
    }

    pub fn grad(&self) -> Option<Tensor> {
        self.tape.grad(*self)
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.tape.binary(self.id, rhs.id, Op::MatMul(self.id, rhs.id), |a, b| {
            if a.cols() != b.rows() {
                return Err(mismatch("matmul", a, b));
            }
            let mut out = Tensor::zeros(a.rows(), b.cols());
            matmul_acc(a.data(), b.data(), out.data_mut(), a.rows(), a.cols(), b.cols());
            Ok(out)
        })
    }

    fn zip_with(
        self,
        rhs: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>, TensorError> {
        self.tape.binary(self.id, rhs.id, op, |a, b| {
            let data = if a.shape() == b.shape() {
                a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
            } else if b.len() == 1 {
                let y = b.data()[0];
                a.data().iter().map(|&x| f(x, y)).collect()
            } else if a.len() == 1 {
                let x = a.data()[0];
                b.data().iter().map(|&y| f(x, y)).collect()
            } else {
                return Err(mismatch(name, a, b));
            };
            let shape = if a.len() == 1 && b.len() != 1 { b.shape() } else { a.shape() };
            Tensor::new(shape[0], shape[1], data)
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.zip_with(rhs, "add", Op::Add(self.id, rhs.id), |x, y| x + y)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.zip_with(rhs, "sub", Op::Sub(self.id, rhs.id), |x, y| x - y)
    }

    /// Elementwise product.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.zip_with(rhs, "mul", Op::Mul(self.id, rhs.id), |x, y| x * y)
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.map(Op::Scale(self.id, s), |x| x * s)
    }

    fn map(self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        self.tape
            .unary(self.id, op, |a| {
                Tensor::new(a.rows(), a.cols(), a.data().iter().map(|&x| f(x)).collect())
            })
            .expect("elementwise map preserves shape")
    }

    pub fn tanh(self) -> Var<'t> {
        self.map(Op::Tanh(self.id), f64::tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.map(Op::Sigmoid(self.id), sigmoid)
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor applies.
    pub fn ln_clamped(self, floor: f64) -> Var<'t> {
        self.map(Op::Ln(self.id, floor), |x| x.max(floor).ln())
    }

    /// Softmax along `axis`, stabilised by subtracting the maximum. Entries
    /// equal to `-inf` get probability zero.
    pub fn softmax(self, axis: Axis) -> Result<Var<'t>, TensorError> {
        self.tape.unary(self.id, Op::Softmax(self.id, axis), |a| {
            let (rows, cols) = (a.rows(), a.cols());
            let (lines, len, stride, step) = match axis {
                Axis::Cols => (rows, cols, cols, 1),
                Axis::Rows => (cols, rows, 1, cols),
            };
            let mut out = vec![0.0; a.len()];
            for l in 0..lines {
                let idx = |j: usize| l * stride + j * step;
                let max = (0..len)
                    .map(|j| a.data()[idx(j)])
                    .fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(TensorError::DegenerateRow { row: l });
                }
                let mut total = 0.0;
                for j in 0..len {
                    let e = (a.data()[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[idx(j)] /= total;
                }
            }
            Tensor::new(rows, cols, out)
        })
    }

    /// Sets entries to `value` wherever `mask` is false. The mask has one
    /// entry per row (`Axis::Rows`) or per column (`Axis::Cols`).
    pub fn masked_fill(self, mask: &[bool], axis: Axis, value: f64) -> Result<Var<'t>, TensorError> {
        let [rows, cols] = self.shape();
        let expected = match axis {
            Axis::Rows => rows,
            Axis::Cols => cols,
        };
        if mask.len() != expected {
            return Err(TensorError::ShapeMismatch {
                op: "masked_fill",
                left: vec![rows, cols],
                right: vec![mask.len()],
            });
        }
        let keep: Vec<bool> = (0..rows * cols)
            .map(|i| match axis {
                Axis::Rows => mask[i / cols],
                Axis::Cols => mask[i % cols],
            })
            .collect();
        let op = Op::MaskedFill(self.id, keep.clone());
        self.tape.unary(self.id, op, |a| {
            let data = a
                .data()
                .iter()
                .zip(&keep)
                .map(|(&x, &k)| if k { x } else { value })
                .collect();
            Tensor::new(rows, cols, data)
        })
    }

    pub fn sum(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Sum(self.id), |a| {
                Ok(Tensor::scalar(a.data().iter().sum()))
            })
            .expect("sum")
    }

    pub fn transpose(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Transpose(self.id), |a| {
                let (r, c) = (a.rows(), a.cols());
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        data[j * r + i] = a.data()[i * c + j];
                    }
                }
                Tensor::new(c, r, data)
            })
            .expect("transpose")
    }

    pub fn slice_cols(self, start: usize, len: usize) -> Result<Var<'t>, TensorError> {
        self.tape.unary(self.id, Op::SliceCols(self.id, start), |a| {
            if start + len > a.cols() {
                return Err(TensorError::IndexOutOfRange {
                    index: start + len,
                    len: a.cols(),
                });
            }
            let mut data = Vec::with_capacity(a.rows() * len);
            for r in 0..a.rows() {
                data.extend_from_slice(&a.row(r)[start..start + len]);
            }
            Tensor::new(a.rows(), len, data)
        })
    }

    pub fn slice_rows(self, start: usize, len: usize) -> Result<Var<'t>, TensorError> {
        self.tape.unary(self.id, Op::SliceRows(self.id, start), |a| {
            if start + len > a.rows() {
                return Err(TensorError::IndexOutOfRange {
                    index: start + len,
                    len: a.rows(),
                });
            }
            let c = a.cols();
            Tensor::new(len, c, a.data()[start * c..(start + len) * c].to_vec())
        })
    }

    /// `1×c` → `n×c` by copying the row.
    pub fn repeat_rows(self, n: usize) -> Result<Var<'t>, TensorError> {
        self.tape.unary(self.id, Op::RepeatRows(self.id), |a| {
            if a.rows() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "repeat_rows",
                    left: a.shape().to_vec(),
                    right: vec![1, a.cols()],
                });
            }
            Tensor::new(n, a.cols(), a.data().repeat(n))
        })
    }

    /// The entry at flat (row-major) index `idx`, as a scalar.
    pub fn select(self, idx: usize) -> Result<Var<'t>, TensorError> {
        self.tape.unary(self.id, Op::Select(self.id, idx), |a| {
            a.data()
                .get(idx)
                .map(|&v| Tensor::scalar(v))
                .ok_or(TensorError::IndexOutOfRange {
                    index: idx,
                    len: a.len(),
                })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_values() {
        let tape = Tape::new();
        let m = tape.constant(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let i = tape.constant(Tensor::identity(2));
        assert_eq!(i.matmul(m).unwrap().value(), m.value());
        let ones = tape.constant(t(&[vec![1.0], vec![1.0]]));
        assert_eq!(m.matmul(ones).unwrap().value(), t(&[vec![3.0], vec![7.0]]));
        let a = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(
            a.matmul(a),
            Err(TensorError::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn elementwise_values() {
        let tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        assert_eq!(z.tanh().item().unwrap(), 0.0);
        assert_eq!(z.sigmoid().item().unwrap(), 0.5);
        let a = tape.constant(Tensor::row_vector(vec![1.0, 2.0]));
        let b = tape.constant(Tensor::row_vector(vec![3.0, 4.0]));
        assert_eq!(a.add(b).unwrap().value().data(), &[4.0, 6.0]);
        assert_eq!(a.mul(b).unwrap().value().data(), &[3.0, 8.0]);
        assert_eq!(a.sub(b).unwrap().value().data(), &[-2.0, -2.0]);
        let c = tape.constant(Tensor::row_vector(vec![1.0, 2.0, 3.0]));
        assert!(a.add(c).is_err());
        let two = tape.constant(Tensor::scalar(2.0));
        assert_eq!(c.mul(two).unwrap().value().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn softmax_values() {
        let tape = Tape::new();
        let s = tape
            .constant(Tensor::row_vector(vec![0.0, 0.0]))
            .softmax(Axis::Cols)
            .unwrap();
        assert_eq!(s.value().data(), &[0.5, 0.5]);
        let s = tape
            .constant(Tensor::row_vector(vec![2f64.ln(), 0.0]))
            .softmax(Axis::Cols)
            .unwrap()
            .value();
        assert!((s.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.data()[1] - 1.0 / 3.0).abs() < 1e-15);
        let dead = tape.constant(Tensor::row_vector(vec![f64::NEG_INFINITY; 2]));
        assert!(matches!(
            dead.softmax(Axis::Cols),
            Err(TensorError::DegenerateRow { row: 0 })
        ));
        // column-wise
        let m = tape.constant(t(&[vec![0.0, 1.0], vec![0.0, 1.0]]));
        let s = m.softmax(Axis::Rows).unwrap().value();
        assert_eq!(s.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn masked_fill_cases() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::row_vector(vec![3.0, 5.0]));
        assert_eq!(
            x.masked_fill(&[true, true], Axis::Cols, 0.0).unwrap().value(),
            x.value()
        );
        let p = x
            .masked_fill(&[true, false], Axis::Cols, f64::NEG_INFINITY)
            .unwrap()
            .softmax(Axis::Cols)
            .unwrap();
        assert_eq!(p.value().data(), &[1.0, 0.0]);
        let zero = x.masked_fill(&[false, false], Axis::Cols, 0.0).unwrap();
        assert_eq!(zero.value().data(), &[0.0, 0.0]);
        assert!(x.masked_fill(&[true], Axis::Cols, 0.0).is_err());
        let m = tape.constant(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let r = m.masked_fill(&[false, true], Axis::Rows, 0.0).unwrap();
        assert_eq!(r.value().data(), &[0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn gather_rows_scatter_adds() {
        let tape = Tape::new();
        let table = tape.param(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let g = tape.gather_rows(table, &[0, 0]).unwrap();
        assert_eq!(g.value().data(), &[1.0, 2.0, 1.0, 2.0]);
        tape.backward(g.sum()).unwrap();
        assert_eq!(table.grad().unwrap().data(), &[2.0, 2.0, 0.0, 0.0]);
        let empty = tape.gather_rows(table, &[]).unwrap();
        assert_eq!(empty.shape(), [0, 2]);
        assert!(matches!(
            tape.gather_rows(table, &[2]),
            Err(TensorError::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn backward_basics() {
        let tape = Tape::new();
        let w = tape.param(t(&[vec![1.0, -2.0], vec![0.5, 3.0]]));
        tape.backward(w.sum()).unwrap();
        assert_eq!(w.grad().unwrap().data(), &[1.0; 4]);
        tape.zero_grad();
        let sq = w.mul(w).unwrap().sum();
        tape.backward(sq).unwrap();
        assert_eq!(w.grad().unwrap().data(), &[2.0, -4.0, 1.0, 6.0]);
        // a second call accumulates
        tape.backward(sq).unwrap();
        assert_eq!(w.grad().unwrap().data(), &[4.0, -8.0, 2.0, 12.0]);
        assert!(matches!(
            tape.backward(w),
            Err(TensorError::NotScalar { .. })
        ));
    }

    #[test]
    fn constants_get_no_grad() {
        let tape = Tape::new();
        let c = tape.constant(Tensor::row_vector(vec![1.0, 2.0]));
        let w = tape.param(Tensor::row_vector(vec![3.0, 4.0]));
        tape.backward(c.mul(w).unwrap().sum()).unwrap();
        assert!(c.grad().is_none());
        assert_eq!(w.grad().unwrap().data(), &[1.0, 2.0]);
    }
}
