//! Reverse-mode gradient tape over dense matrix operations.
//!
//! A [`Tape`] records a forward computation as a flat list of nodes; calling
//! [`Tape::backward`] on a 1x1 loss node sweeps the list in reverse and
//! accumulates gradients for every node, including the inputs. A fresh tape
//! is built per training batch; parameters enter as [`Tape::input`] leaves
//! and the caller copies the leaf gradients back out.
//!
//! Sparse matrices and dropout masks are constants of the graph: gradients
//! flow through them, never to them.

use std::sync::Arc;

use super::scalar::{logistic, softplus, Scalar};
use super::sparse::CsrMatrix;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Clamp floor for log arguments inside the cross-entropy loss.
const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

/// Sparse operator plus its transpose, so the backward pass needs no
/// on-the-fly transposition.
#[derive(Debug, Clone)]
pub struct SparseOp<T> {
    forward: CsrMatrix<T>,
    backward: CsrMatrix<T>,
}

impl<T: Scalar> SparseOp<T> {
    pub fn new(m: CsrMatrix<T>) -> Self {
        let backward = m.transpose();
        Self {
            forward: m,
            backward,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.forward
    }

    pub fn rows(&self) -> usize {
        self.forward.rows()
    }

    pub fn cols(&self) -> usize {
        self.forward.cols()
    }
}

enum Op<T> {
    Input,
    MatMul(VarId, VarId),
    SpMM(Arc<SparseOp<T>>, VarId),
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Hadamard(VarId, VarId),
    MulConst(VarId, Arc<Tensor2<T>>),
    Scale(VarId, T),
    Relu(VarId),
    GatherRows(VarId, Arc<Vec<u32>>),
    RowSum(VarId),
    SumSquares(VarId),
    ConcatCols(VarId, VarId),
    AddRowBroadcast(VarId, VarId),
    BceWithLogits(VarId, Arc<Vec<T>>),
    SoftplusNegSum(VarId),
}

struct Node<T> {
    value: Tensor2<T>,
    op: Op<T>,
}

/// Gradients produced by a backward sweep, indexed by [`VarId`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. the given node; `None` if the node does
    /// not influence the loss.
    pub fn get(&self, id: VarId) -> Option<&Tensor2<T>> {
        self.grads[id.0].as_ref()
    }
}

/// Recorded forward computation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor2<T>, op: Op<T>) -> VarId {
        self.nodes.push(Node { value, op });
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Tensor2<T> {
        &self.nodes[id.0].value
    }

    fn shape(&self, id: VarId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    /// Leaf node (parameter or constant input).
    pub fn input(&mut self, t: Tensor2<T>) -> VarId {
        self.push(t, Op::Input)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn spmm(&mut self, m: &Arc<SparseOp<T>>, x: VarId) -> VarId {
        assert_eq!(m.cols(), self.shape(x).0, "spmm shape mismatch");
        let v = m.forward.matmul_dense(self.value(x));
        self.push(v, Op::SpMM(Arc::clone(m), x))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).hadamard(self.value(b));
        self.push(v, Op::Hadamard(a, b))
    }

    /// Elementwise product with a constant (no gradient to the constant).
    pub fn mul_const(&mut self, x: VarId, mask: Arc<Tensor2<T>>) -> VarId {
        let v = self.value(x).hadamard(&mask);
        self.push(v, Op::MulConst(x, mask))
    }

    pub fn scale(&mut self, x: VarId, c: T) -> VarId {
        let v = self.value(x).scale(c);
        self.push(v, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let v = self.value(x).map(super::scalar::relu);
        self.push(v, Op::Relu(x))
    }

    /// Rows of `x` selected by `idx` (rows may repeat).
    pub fn gather_rows(&mut self, x: VarId, idx: Arc<Vec<u32>>) -> VarId {
        let src = self.value(x);
        let mut v = Tensor2::zeros(idx.len(), src.cols());
        for (out_r, &r) in idx.iter().enumerate() {
            v.row_mut(out_r).copy_from_slice(src.row(r as usize));
        }
        self.push(v, Op::GatherRows(x, idx))
    }

    /// (r x c) -> (r x 1) row sums.
    pub fn row_sum(&mut self, x: VarId) -> VarId {
        let src = self.value(x);
        let mut v = Tensor2::zeros(src.rows(), 1);
        for r in 0..src.rows() {
            v.set(r, 0, src.row(r).iter().copied().sum());
        }
        self.push(v, Op::RowSum(x))
    }

    /// Sum of squared entries, as a 1x1 node.
    pub fn sum_squares(&mut self, x: VarId) -> VarId {
        let s = self.value(x).sum_squares();
        self.push(Tensor2::from_vec(1, 1, vec![s]), Op::SumSquares(x))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        assert_eq!(ra, rb, "concat_cols row mismatch");
        let mut v = Tensor2::zeros(ra, ca + cb);
        for r in 0..ra {
            v.row_mut(r)[..ca].copy_from_slice(self.value(a).row(r));
            v.row_mut(r)[ca..].copy_from_slice(self.value(b).row(r));
        }
        self.push(v, Op::ConcatCols(a, b))
    }

    /// Adds a (1 x c) row vector to every row of `x`.
    pub fn add_row_broadcast(&mut self, x: VarId, row: VarId) -> VarId {
        let (_, c) = self.shape(x);
        assert_eq!(self.shape(row), (1, c), "broadcast row shape mismatch");
        let rowv = self.value(row).clone();
        let v = {
            let src = self.value(x);
            let mut v = src.clone();
            for r in 0..v.rows() {
                for (o, &b) in v.row_mut(r).iter_mut().zip(rowv.row(0)) {
                    *o += b;
                }
            }
            v
        };
        self.push(v, Op::AddRowBroadcast(x, row))
    }

    /// Summed binary cross-entropy of logistic(score) against 0/1 labels,
    /// with log arguments clamped at 1e-12. Scores must be (n x 1).
    pub fn bce_with_logits(&mut self, scores: VarId, labels: Arc<Vec<T>>) -> VarId {
        let (n, c) = self.shape(scores);
        assert_eq!(c, 1, "scores must be a column");
        assert_eq!(n, labels.len(), "one label per score");
        let clamp = T::from_f64_lossy(LOG_CLAMP);
        let mut total = T::zero();
        for (i, &y) in labels.iter().enumerate() {
            let p = logistic(self.value(scores).get(i, 0));
            let pos = p.max(clamp).ln();
            let neg = (T::one() - p).max(clamp).ln();
            total = total - (y * pos + (T::one() - y) * neg);
        }
        self.push(
            Tensor2::from_vec(1, 1, vec![total]),
            Op::BceWithLogits(scores, labels),
        )
    }

    /// Sum of ln(1 + e^(-x)) over all entries: the pairwise ranking loss
    /// applied to score differences.
    pub fn softplus_neg_sum(&mut self, x: VarId) -> VarId {
        let s: T = self
            .value(x)
            .values()
            .iter()
            .map(|&v| softplus(-v))
            .sum();
        self.push(Tensor2::from_vec(1, 1, vec![s]), Op::SoftplusNegSum(x))
    }

    /// Reverse sweep from a 1x1 loss node.
    pub fn backward(&self, loss: VarId) -> Result<Gradients<T>> {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");
        let lv = self.value(loss).scalar();
        if !lv.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss value {lv}")));
        }

        let mut grads: Vec<Option<Tensor2<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor2::filled(1, 1, T::one()));

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::SpMM(m, x) => {
                    accumulate(&mut grads, *x, m.backward.matmul_dense(&g));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.scale(-T::one()));
                }
                Op::Hadamard(a, b) => {
                    accumulate(&mut grads, *a, g.hadamard(self.value(*b)));
                    accumulate(&mut grads, *b, g.hadamard(self.value(*a)));
                }
                Op::MulConst(x, mask) => {
                    accumulate(&mut grads, *x, g.hadamard(mask));
                }
                Op::Scale(x, c) => {
                    accumulate(&mut grads, *x, g.scale(*c));
                }
                Op::Relu(x) => {
                    let gx = g.zip_map(self.value(*x), |gv, xv| {
                        if xv > T::zero() {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut grads, *x, gx);
                }
                Op::GatherRows(x, idx) => {
                    let mut gx = Tensor2::zeros(self.shape(*x).0, self.shape(*x).1);
                    for (out_r, &r) in idx.iter().enumerate() {
                        let src = g.row(out_r);
                        for (o, &s) in gx.row_mut(r as usize).iter_mut().zip(src) {
                            *o += s;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::RowSum(x) => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Tensor2::zeros(r, c);
                    for i in 0..r {
                        let gi = g.get(i, 0);
                        gx.row_mut(i).iter_mut().for_each(|v| *v = gi);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumSquares(x) => {
                    let g0 = g.scalar();
                    let two = T::from_f64_lossy(2.0);
                    accumulate(&mut grads, *x, self.value(*x).scale(two * g0));
                }
                Op::ConcatCols(a, b) => {
                    let (ra, ca) = self.shape(*a);
                    let (_, cb) = self.shape(*b);
                    let mut ga = Tensor2::zeros(ra, ca);
                    let mut gb = Tensor2::zeros(ra, cb);
                    for r in 0..ra {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                        gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRowBroadcast(x, row) => {
                    let (_, c) = self.shape(*x);
                    let mut grow = Tensor2::zeros(1, c);
                    for r in 0..g.rows() {
                        for (o, &s) in grow.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += s;
                        }
                    }
                    accumulate(&mut grads, *x, g.clone());
                    accumulate(&mut grads, *row, grow);
                }
                Op::BceWithLogits(scores, labels) => {
                    let g0 = g.scalar();
                    let clamp = T::from_f64_lossy(LOG_CLAMP);
                    let n = labels.len();
                    let mut gs = Tensor2::zeros(n, 1);
                    for (i, &y) in labels.iter().enumerate() {
                        let p = logistic(self.value(*scores).get(i, 0));
                        let mut d = T::zero();
                        if p > clamp {
                            d = d - y * (T::one() - p);
                        }
                        if T::one() - p > clamp {
                            d = d + (T::one() - y) * p;
                        }
                        gs.set(i, 0, g0 * d);
                    }
                    accumulate(&mut grads, *scores, gs);
                }
                Op::SoftplusNegSum(x) => {
                    let g0 = g.scalar();
                    let gx = self
                        .value(*x)
                        .map(|v| g0 * (logistic(v) - T::one()));
                    accumulate(&mut grads, *x, gx);
                }
            }
            // restore this node's grad for callers that inspect interior nodes
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor2<T>>], id: VarId, g: Tensor2<T>) {
    match &mut grads[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor2<f64> {
        Tensor2::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn matmul_gradient_hand_checked() {
        // loss = sum of squares of (A*B)
        let mut tape = Tape::new();
        let a = tape.input(t(1, 2, &[2.0, 3.0]));
        let b = tape.input(t(2, 1, &[4.0, 5.0]));
        let c = tape.matmul(a, b); // [23]
        let loss = tape.sum_squares(c);
        assert_eq!(tape.value(loss).scalar(), 529.0);
        let grads = tape.backward(loss).unwrap();
        // dL/dc = 2*23 = 46; dL/da = 46*[4,5]; dL/db = 46*[2,3]^T
        assert_eq!(grads.get(a).unwrap().values(), &[184.0, 230.0]);
        assert_eq!(grads.get(b).unwrap().values(), &[92.0, 138.0]);
    }

    #[test]
    fn relu_and_sum_gradients() {
        let mut tape = Tape::new();
        let x = tape.input(t(1, 3, &[-1.0, 0.0, 2.0]));
        let r = tape.relu(x);
        assert_eq!(tape.value(r).values(), &[0.0, 0.0, 2.0]);
        let loss = tape.sum_squares(r);
        let grads = tape.backward(loss).unwrap();
        // dL/dr = 2r = [0, 0, 4], gated by x > 0
        assert_eq!(grads.get(x).unwrap().values(), &[0.0, 0.0, 4.0]);
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let mut tape = Tape::new();
        let x = tape.input(t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let g = tape.gather_rows(x, Arc::new(vec![2, 0, 2]));
        assert_eq!(tape.value(g).values(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let s = tape.row_sum(g);
        let loss = tape.sum_squares(s);
        let grads = tape.backward(loss).unwrap();
        // row sums: [11, 3, 11]; dL/ds = [22, 6, 22]; row 2 hit twice
        assert_eq!(
            grads.get(x).unwrap().values(),
            &[6.0, 6.0, 0.0, 0.0, 44.0, 44.0]
        );
    }

    #[test]
    fn bce_matches_hand_values() {
        // single triple, s=0, y=1 -> ln 2
        let mut tape = Tape::new();
        let s = tape.input(t(1, 1, &[0.0]));
        let loss = tape.bce_with_logits(s, Arc::new(vec![1.0]));
        assert!((tape.value(loss).scalar() - std::f64::consts::LN_2).abs() < 1e-15);
        let grads = tape.backward(loss).unwrap();
        // sigma(0) - 1 = -0.5
        assert!((grads.get(s).unwrap().scalar() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn bce_asymptote() {
        let mut tape = Tape::new();
        let s = tape.input(t(1, 1, &[40.0]));
        let loss = tape.bce_with_logits(s, Arc::new(vec![1.0]));
        assert!(tape.value(loss).scalar() < 1e-15);
    }

    #[test]
    fn pairwise_loss_value_and_grad() {
        // -ln sigma(2) at a score difference of 2
        let mut tape = Tape::new();
        let d = tape.input(t(1, 1, &[2.0]));
        let loss = tape.softplus_neg_sum(d);
        assert!((tape.value(loss).scalar() - 0.126_928_011_042_972_6).abs() < 1e-12);
        let grads = tape.backward(loss).unwrap();
        assert!((grads.get(d).unwrap().scalar() - (logistic(2.0) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn spmm_backward_uses_transpose() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, 2.0), (1, 2, 3.0)]);
        let op = Arc::new(SparseOp::new(m));
        let mut tape = Tape::new();
        let x = tape.input(t(3, 1, &[1.0, 1.0, 1.0]));
        let y = tape.spmm(&op, x);
        assert_eq!(tape.value(y).values(), &[2.0, 3.0]);
        let loss = tape.sum_squares(y);
        let grads = tape.backward(loss).unwrap();
        // dL/dy = [4, 6]; dL/dx = M^T [4,6] = [0, 8, 18]
        assert_eq!(grads.get(x).unwrap().values(), &[0.0, 8.0, 18.0]);
    }

    #[test]
    fn broadcast_and_concat_gradients() {
        let mut tape = Tape::new();
        let x = tape.input(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.input(t(1, 2, &[10.0, 20.0]));
        let y = tape.add_row_broadcast(x, b);
        assert_eq!(tape.value(y).values(), &[11.0, 22.0, 13.0, 24.0]);
        let z = tape.input(t(2, 1, &[0.5, 0.5]));
        let c = tape.concat_cols(y, z);
        assert_eq!(tape.value(c).shape(), (2, 3));
        let s = tape.row_sum(c);
        let loss = tape.sum_squares(s);
        let grads = tape.backward(loss).unwrap();
        // row sums 33.5, 37.5 -> ds = [67, 75]
        assert_eq!(grads.get(b).unwrap().values(), &[142.0, 142.0]);
        assert_eq!(grads.get(z).unwrap().values(), &[67.0, 75.0]);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.input(t(1, 1, &[f64::INFINITY]));
        let loss = tape.sum_squares(x);
        assert!(tape.backward(loss).is_err());
    }
}
