//! Forward building blocks shared by the encoders.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::{dropout_mask, logistic, RngStream, SparseOp, VarId};
use crate::{GradTape, Real, Tensor};

/// Activation applied to a layer's pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Dropout context of a forward pass: no-op unless training with a
/// positive ratio.
pub struct DropoutCtx<'a> {
    pub ratio: f64,
    pub training: bool,
    pub rng: &'a mut RngStream,
}

impl DropoutCtx<'_> {
    fn apply(&mut self, tape: &mut GradTape, x: VarId) -> Result<VarId> {
        if !self.training || self.ratio == 0.0 {
            return Ok(x);
        }
        let (r, c) = {
            let v = tape.value(x);
            (v.rows(), v.cols())
        };
        let mask = dropout_mask(r, c, self.ratio, self.rng)?;
        Ok(tape.mul_const(x, Arc::new(mask)))
    }
}

fn activate(tape: &mut GradTape, x: VarId, act: Activation) -> VarId {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Identity => x,
    }
}

/// One graph-convolution layer: activation of the normalized propagation
/// `adj * h * w`, with dropout applied to the pre-activation while training.
pub fn gcn_layer_forward(
    tape: &mut GradTape,
    h: VarId,
    adj: &Arc<SparseOp<Real>>,
    w: VarId,
    act: Activation,
    dropout: &mut DropoutCtx,
) -> Result<VarId> {
    let (hn, hd) = tape.value(h).shape();
    let (wr, wc) = tape.value(w).shape();
    if adj.cols() != hn {
        return Err(Error::Config(format!(
            "graph has {} nodes but features have {hn} rows",
            adj.cols()
        )));
    }
    if wr != hd || wc != wr {
        return Err(Error::Config(format!(
            "layer weight must be {hd}x{hd}, got {wr}x{wc}"
        )));
    }
    let prop = tape.spmm(adj, h);
    let pre = tape.matmul(prop, w);
    let pre = dropout.apply(tape, pre)?;
    Ok(activate(tape, pre, act))
}

/// Composition of a neighbour embedding with a relation embedding:
/// element-wise difference.
pub fn compose(e_s: &[f64], e_r: &[f64]) -> Result<Vec<f64>> {
    if e_s.len() != e_r.len() {
        return Err(Error::Config(format!(
            "compose on vectors of different dimensions {} and {}",
            e_s.len(),
            e_r.len()
        )));
    }
    Ok(e_s.iter().zip(e_r).map(|(&s, &r)| s - r).collect())
}

/// Relation embedding as a linear combination of basis vectors:
/// `sum_k alpha[k] * basis_row_k`.
pub fn relation_embedding(alpha: &[f64], basis: &Tensor) -> Vec<f64> {
    assert_eq!(alpha.len(), basis.rows(), "one weight per basis vector");
    let mut out = vec![0.0; basis.cols()];
    for (k, &a) in alpha.iter().enumerate() {
        for (o, &b) in out.iter_mut().zip(basis.row(k)) {
            *o += a * b;
        }
    }
    out
}

/// Interaction score: embedding dot product plus both entity biases.
pub fn predict_score(u: &[f64], v: &[f64], user_bias: f64, item_bias: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    dot + user_bias + item_bias
}

/// Weighted sum of the element-wise embedding product (identity output
/// activation).
pub fn gmf_forward(u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.len() != w.len() {
        return Err(Error::Config(format!(
            "gmf dimensions disagree: u={}, v={}, w={}",
            u.len(),
            v.len(),
            w.len()
        )));
    }
    Ok(u.iter().zip(v).zip(w).map(|((&a, &b), &c)| a * b * c).sum())
}

/// Plain (non-tape) binary cross-entropy with L2 regularization: the
/// logistic function squashes raw scores, log arguments are clamped at
/// 1e-12 and the squared norms of the regularized parameters are scaled
/// by lambda.
pub fn bce_loss(scores: &[f64], labels: &[f64], lambda: f64, theta: &[&Tensor]) -> f64 {
    assert_eq!(scores.len(), labels.len(), "one score per label");
    let mut loss = 0.0;
    for (&s, &y) in scores.iter().zip(labels) {
        let p = logistic(s);
        loss -= y * p.max(1e-12).ln() + (1.0 - y) * (1.0 - p).max(1e-12).ln();
    }
    loss + lambda * theta.iter().map(|t| t.sum_squares()).sum::<f64>()
}

/// Pairwise ranking loss: -ln(sigma(s_pos - s_neg)).
pub fn bpr_loss(positive_score: f64, negative_score: f64) -> f64 {
    crate::num::softplus(-(positive_score - negative_score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::CsrMatrix;

    #[test]
    fn compose_hand_examples() {
        assert_eq!(compose(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(compose(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(compose(&[1.0, 2.0], &[0.5, -1.0]).unwrap(), vec![0.5, 3.0]);
        assert!(compose(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn relation_embedding_hand_examples() {
        let basis = Tensor::from_rows(&[vec![0.5, -1.0]]);
        assert_eq!(relation_embedding(&[0.0], &basis), vec![0.0, 0.0]);
        assert_eq!(relation_embedding(&[2.0], &basis), vec![1.0, -2.0]);
        let basis2 = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(relation_embedding(&[1.0, 1.0], &basis2), vec![1.0, 1.0]);
    }

    #[test]
    fn predict_score_hand_examples() {
        assert_eq!(predict_score(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0), 0.0);
        assert_eq!(predict_score(&[1.0, 2.0], &[3.0, -1.0], 0.5, -0.5), 1.0);
    }

    #[test]
    fn predict_score_rotation_invariance() {
        // simultaneous rotation of both embeddings leaves the dot intact
        let (c, s) = (0.6f64, 0.8f64);
        let u = [1.5, -0.3];
        let v = [0.7, 2.2];
        let ru = [c * u[0] - s * u[1], s * u[0] + c * u[1]];
        let rv = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        let a = predict_score(&u, &v, 0.1, 0.2);
        let b = predict_score(&ru, &rv, 0.1, 0.2);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gmf_hand_examples() {
        // all-ones weights reduce to the dot product
        assert_eq!(
            gmf_forward(&[1.0, 2.0], &[3.0, 4.0], &[1.0, 1.0]).unwrap(),
            11.0
        );
        assert_eq!(gmf_forward(&[1.0, 2.0], &[2.0, 3.0], &[1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(gmf_forward(&[1.0, 2.0], &[2.0, 3.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(gmf_forward(&[1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn bce_hand_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(&[0.0], &[1.0], 0.0, &[]) - ln2).abs() < 1e-15);
        assert!(bce_loss(&[40.0], &[1.0], 0.0, &[]) < 1e-15);
        let theta = Tensor::from_rows(&[vec![3.0, 4.0]]);
        assert!((bce_loss(&[], &[], 1.0, &[&theta]) - 25.0).abs() < 1e-15);
    }

    #[test]
    fn bce_is_convex_in_scores() {
        // midpoint inequality on random score pairs
        let mut rng = RngStream::new(3);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let labels: Vec<f64> = (0..4).map(|_| f64::from(rng.unit() < 0.5)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| 0.5 * (x + y)).collect();
            let lm = bce_loss(&mid, &labels, 0.0, &[]);
            let avg =
                0.5 * (bce_loss(&a, &labels, 0.0, &[]) + bce_loss(&b, &labels, 0.0, &[]));
            assert!(lm <= avg + 1e-12, "midpoint {lm} above average {avg}");
        }
    }

    #[test]
    fn bpr_hand_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bpr_loss(1.0, 1.0) - ln2).abs() < 1e-15);
        assert!(bpr_loss(50.0, 0.0) < 1e-15);
        assert!((bpr_loss(2.0, 0.0) - 0.126_928_011_042_972_6).abs() < 1e-12);
        // adding a constant to both scores changes nothing
        assert_eq!(bpr_loss(1.3, 0.2).to_bits(), bpr_loss(101.3, 100.2).to_bits());
    }

    #[test]
    fn gcn_layer_identity_propagation() {
        // edgeless graph (identity operator), identity weights, no activation
        let adj = Arc::new(SparseOp::new(CsrMatrix::identity(2)));
        let mut tape = GradTape::new();
        let h = tape.input(Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]));
        let mut eye = Tensor::zeros(2, 2);
        eye.set(0, 0, 1.0);
        eye.set(1, 1, 1.0);
        let w = tape.input(eye);
        let mut rng = RngStream::new(1);
        let mut ctx = DropoutCtx { ratio: 0.5, training: false, rng: &mut rng };
        let out = gcn_layer_forward(&mut tape, h, &adj, w, Activation::Identity, &mut ctx).unwrap();
        assert_eq!(tape.value(out), tape.value(h));
    }

    #[test]
    fn gcn_layer_hand_product() {
        // adj = [[.5,.5],[.5,.5]], H = [[2,0],[0,2]], W = I, relu
        let adj = Arc::new(SparseOp::new(CsrMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)],
        )));
        let mut tape = GradTape::new();
        let h = tape.input(Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]));
        let mut eye = Tensor::zeros(2, 2);
        eye.set(0, 0, 1.0);
        eye.set(1, 1, 1.0);
        let w = tape.input(eye);
        let mut rng = RngStream::new(1);
        let mut ctx = DropoutCtx { ratio: 0.0, training: true, rng: &mut rng };
        let out = gcn_layer_forward(&mut tape, h, &adj, w, Activation::Relu, &mut ctx).unwrap();
        assert_eq!(tape.value(out).values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gcn_layer_matches_message_passing_form() {
        // node-by-node evaluation with the propagation weights as the oracle
        let mut rng = RngStream::new(21);
        for _ in 0..20 {
            let n = 5;
            let d = 3;
            // random symmetric weighted graph, plus normalized self-loops
            let mut triplets = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i < j && rng.unit() < 0.6 {
                        let w = rng.uniform(0.1, 1.0);
                        triplets.push((i as u32, j as u32, w));
                        triplets.push((j as u32, i as u32, w));
                    }
                }
            }
            let a = CsrMatrix::from_triplets(n, n, &triplets);
            let norm = crate::graph::normalize_adjacency(&a).unwrap();
            let h0 = Tensor::uniform(n, d, -1.0, 1.0, &mut rng);
            let w = Tensor::uniform(d, d, -1.0, 1.0, &mut rng);

            let adj = Arc::new(SparseOp::new(norm.clone()));
            let mut tape = GradTape::new();
            let hv = tape.input(h0.clone());
            let wv = tape.input(w.clone());
            let mut drng = RngStream::new(1);
            let mut ctx = DropoutCtx { ratio: 0.0, training: false, rng: &mut drng };
            let out =
                gcn_layer_forward(&mut tape, hv, &adj, wv, Activation::Relu, &mut ctx).unwrap();

            // oracle: for each node, sum weighted neighbour messages W^T h_j
            let hw = h0.matmul(&w);
            for i in 0..n {
                let mut msg = vec![0.0f64; d];
                for (j, a_ij) in norm.row_entries(i) {
                    for (m, &x) in msg.iter_mut().zip(hw.row(j as usize)) {
                        *m += a_ij * x;
                    }
                }
                for (c, &m) in msg.iter().enumerate() {
                    let want = m.max(0.0);
                    assert!(
                        (tape.value(out).get(i, c) - want).abs() < 1e-12,
                        "node {i} col {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn bce_tape_and_plain_agree() {
        let scores = [0.3, -1.2, 2.0, 0.0];
        let labels = [1.0, 0.0, 1.0, 0.0];
        let plain = bce_loss(&scores, &labels, 0.0, &[]);
        let mut tape = GradTape::new();
        let s = tape.input(Tensor::from_vec(4, 1, scores.to_vec()));
        let l = tape.bce_with_logits(s, Arc::new(labels.to_vec()));
        assert!((tape.value(l).scalar() - plain).abs() < 1e-14);
    }
}
