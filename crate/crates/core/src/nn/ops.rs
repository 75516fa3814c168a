//! Differentiable primitives. Weight matrices are stored `[in, out]`.

use super::{NnError, SparseVec, Tensor};
use crate::num::Scalar;

fn check_affine<S: Scalar>(in_len: usize, w: &Tensor<S>, b: &Tensor<S>) -> Result<(), NnError> {
    if w.shape().len() != 2 || w.shape()[0] != in_len {
        return Err(NnError::ShapeMismatch {
            op: "dense",
            left: vec![in_len],
            right: w.shape().to_vec(),
        });
    }
    if b.shape() != [w.shape()[1]] {
        return Err(NnError::ShapeMismatch {
            op: "dense",
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

#[inline]
fn axpy<S: Scalar>(y: &mut [S], a: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Eight interleaved partial sums so the loop vectorizes; the summation
/// order is fixed, so results stay deterministic.
#[inline]
fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [S::zero(); 8];
    let mut xc = x.chunks_exact(8);
    let mut yc = y.chunks_exact(8);
    for (a, b) in (&mut xc).zip(&mut yc) {
        for j in 0..8 {
            acc[j] = acc[j] + a[j] * b[j];
        }
    }
    let mut tail = S::zero();
    for (&a, &b) in xc.remainder().iter().zip(yc.remainder()) {
        tail = tail + a * b;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y = x W + b`.
pub fn dense<S: Scalar>(input: &[S], w: &Tensor<S>, b: &Tensor<S>) -> Result<Vec<S>, NnError> {
    check_affine(input.len(), w, b)?;
    let mut out = b.data().to_vec();
    for (i, &x) in input.iter().enumerate() {
        if x != S::zero() {
            axpy(&mut out, x, w.row(i));
        }
    }
    Ok(out)
}

/// Accumulates `dW += x^T dy`, `db += dy` and returns `dx`.
pub fn dense_backward<S: Scalar>(
    input: &[S],
    w: &Tensor<S>,
    dout: &[S],
    gw: &mut Tensor<S>,
    gb: &mut Tensor<S>,
) -> Result<Vec<S>, NnError> {
    check_affine(input.len(), w, gb)?;
    if dout.len() != w.shape()[1] || gw.shape() != w.shape() {
        return Err(NnError::ShapeMismatch {
            op: "dense_backward",
            left: vec![dout.len()],
            right: w.shape().to_vec(),
        });
    }
    axpy(gb.data_mut(), S::one(), dout);
    let cols = w.shape()[1];
    let mut din = Vec::with_capacity(input.len());
    let gwd = gw.data_mut();
    for (i, &x) in input.iter().enumerate() {
        if x != S::zero() {
            axpy(&mut gwd[i * cols..(i + 1) * cols], x, dout);
        }
        din.push(dot(w.row(i), dout));
    }
    Ok(din)
}

/// [`dense`] over a sparse input; only stored entries are touched.
pub fn sparse_dense<S: Scalar>(
    input: &SparseVec<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
) -> Result<Vec<S>, NnError> {
    check_affine(input.len(), w, b)?;
    let mut out = b.data().to_vec();
    for (&i, &x) in input.indices().iter().zip(input.values()) {
        axpy(&mut out, x, w.row(i as usize));
    }
    Ok(out)
}

/// Backward of [`sparse_dense`]. Returns the gradient of each stored entry
/// when `want_input_grad` is set.
pub fn sparse_dense_backward<S: Scalar>(
    input: &SparseVec<S>,
    w: &Tensor<S>,
    dout: &[S],
    gw: &mut Tensor<S>,
    gb: &mut Tensor<S>,
    want_input_grad: bool,
) -> Result<Option<Vec<S>>, NnError> {
    check_affine(input.len(), w, gb)?;
    if dout.len() != w.shape()[1] || gw.shape() != w.shape() {
        return Err(NnError::ShapeMismatch {
            op: "sparse_dense_backward",
            left: vec![dout.len()],
            right: w.shape().to_vec(),
        });
    }
    axpy(gb.data_mut(), S::one(), dout);
    let cols = w.shape()[1];
    let gwd = gw.data_mut();
    for (&i, &x) in input.indices().iter().zip(input.values()) {
        let i = i as usize;
        axpy(&mut gwd[i * cols..(i + 1) * cols], x, dout);
    }
    Ok(want_input_grad.then(|| {
        input
            .indices()
            .iter()
            .map(|&i| dot(w.row(i as usize), dout))
            .collect()
    }))
}

pub fn relu<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|&v| v.max(S::zero())).collect()
}

/// Gradient through ReLU given its output `y`; the kink at 0 gets gradient 0.
pub fn relu_backward<S: Scalar>(y: &[S], dy: &[S]) -> Vec<S> {
    y.iter()
        .zip(dy)
        .map(|(&y, &d)| if y > S::zero() { d } else { S::zero() })
        .collect()
}

pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[target]` and its gradient with respect to the logits.
pub fn softmax_xent<S: Scalar>(logits: &[S], target: usize) -> Result<(S, Vec<S>), NnError> {
    if target >= logits.len() {
        return Err(NnError::IndexOutOfRange {
            index: target,
            len: logits.len(),
        });
    }
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let total: S = logits.iter().map(|&z| (z - m).exp()).sum();
    let log_z = m + total.ln();
    let loss = log_z - logits[target];
    let mut grad: Vec<S> = logits.iter().map(|&z| (z - log_z).exp()).collect();
    grad[target] = grad[target] - S::one();
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrads<S> {
    pub anchor: Vec<S>,
    pub positive: Vec<S>,
    pub negative: Vec<S>,
}

fn l2_dist<S: Scalar>(a: &[S], b: &[S]) -> (S, Vec<S>) {
    let diff: Vec<S> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let d = diff.iter().map(|&v| v * v).sum::<S>().sqrt();
    (d, diff)
}

/// `max(0, |a-p| - |a-n| + margin)` with plain Euclidean distances.
///
/// The subgradient is zero at the hinge kink, and a distance term that is
/// exactly zero contributes no gradient.
pub fn triplet_margin<S: Scalar>(
    anchor: &[S],
    positive: &[S],
    negative: &[S],
    margin: S,
) -> Result<(S, TripletGrads<S>), NnError> {
    if anchor.len() != positive.len() || anchor.len() != negative.len() {
        return Err(NnError::ShapeMismatch {
            op: "triplet_margin",
            left: vec![anchor.len()],
            right: vec![positive.len(), negative.len()],
        });
    }
    if !(margin > S::zero()) {
        return Err(NnError::Invalid(format!("triplet margin must be positive, got {margin}")));
    }
    let dim = anchor.len();
    let (d_ap, diff_ap) = l2_dist(anchor, positive);
    let (d_an, diff_an) = l2_dist(anchor, negative);
    let loss = (d_ap - d_an + margin).max(S::zero());
    let mut grads = TripletGrads {
        anchor: vec![S::zero(); dim],
        positive: vec![S::zero(); dim],
        negative: vec![S::zero(); dim],
    };
    if loss > S::zero() {
        if d_ap > S::zero() {
            for j in 0..dim {
                let g = diff_ap[j] / d_ap;
                grads.anchor[j] = grads.anchor[j] + g;
                grads.positive[j] = -g;
            }
        }
        if d_an > S::zero() {
            for j in 0..dim {
                let g = diff_an[j] / d_an;
                grads.anchor[j] = grads.anchor[j] - g;
                grads.negative[j] = g;
            }
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_and_bias() {
        let w = t(&[3, 3], &[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let zero = Tensor::zeros(&[3]);
        assert_eq!(dense(&[1.5, -2.0, 3.25], &w, &zero).unwrap(), vec![1.5, -2.0, 3.25]);
        let b = t(&[3], &[0.1, 0.2, 0.3]);
        assert_eq!(dense(&[0.0, 0.0, 0.0], &w, &b).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let w = Tensor::<f64>::zeros(&[3, 2]);
        let b = Tensor::zeros(&[2]);
        let err = dense(&[1.0, 2.0], &w, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2]") && msg.contains("[3, 2]"), "{msg}");
        let bad_b = Tensor::zeros(&[3]);
        assert!(dense(&[1.0, 2.0, 3.0], &w, &bad_b).is_err());
    }

    #[test]
    fn sparse_agrees_with_dense() {
        let w = t(&[4, 2], &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5, 3.0, -2.0]);
        let b = t(&[2], &[0.1, -0.1]);
        let x = [0.0, 2.0, 0.0, -1.0];
        let sx = SparseVec::new(4, vec![1, 3], vec![2.0, -1.0]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap(), sparse_dense(&sx, &w, &b).unwrap());

        let dy = [0.3, -0.7];
        let (mut gw1, mut gb1) = (Tensor::zeros(&[4, 2]), Tensor::zeros(&[2]));
        let (mut gw2, mut gb2) = (Tensor::zeros(&[4, 2]), Tensor::zeros(&[2]));
        let dx = dense_backward(&x, &w, &dy, &mut gw1, &mut gb1).unwrap();
        let dsx = sparse_dense_backward(&sx, &w, &dy, &mut gw2, &mut gb2, true)
            .unwrap()
            .unwrap();
        assert_eq!(gw1, gw2);
        assert_eq!(gb1, gb2);
        assert_eq!(dsx, vec![dx[1], dx[3]]);
    }

    #[test]
    fn uniform_logits_give_ln6() {
        let (loss, grad) = softmax_xent(&[0.3f64; 6], 2).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        assert!((grad.iter().sum::<f64>()).abs() < 1e-12);
        let p = softmax(&[0.3f64; 6]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_logit_loss_vanishes() {
        let mut logits = [0.0f64; 6];
        logits[4] = 50.0;
        let (loss, _) = softmax_xent(&logits, 4).unwrap();
        assert!(loss.abs() < 1e-9);
        assert!(softmax_xent(&logits, 6).is_err());
    }

    #[test]
    fn triplet_cases() {
        let a = [1.0, 2.0];
        let far = [1.0, 5.0];
        let (l, g) = triplet_margin(&a, &a, &far, 1.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.anchor.iter().all(|&x| x == 0.0));
        let (l, _) = triplet_margin(&a, &a, &a, 1.0).unwrap();
        assert_eq!(l, 1.0);
        assert!(triplet_margin(&a, &a, &[1.0], 1.0).is_err());
        assert!(triplet_margin(&a, &a, &a, 0.0).is_err());
    }
}
