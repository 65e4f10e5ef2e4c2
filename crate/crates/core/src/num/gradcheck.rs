//! Central-difference validation of analytic gradients.

use super::scalar::Scalar;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Compares the analytic gradient of a deterministic loss against central
/// finite differences and returns the worst relative error
/// `|g_analytic - g_fd| / max(1, |g_fd|)` over all parameter entries.
///
/// `f` evaluates the loss at the given parameter values and returns it
/// together with the analytic gradients (one tensor per parameter, same
/// shapes). Dropout and any other stochastic pieces must be disabled so the
/// loss is a pure function of the parameters.
pub fn finite_difference_check<T, F>(params: &[Tensor2<T>], h: T, mut f: F) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[Tensor2<T>]) -> Result<(T, Vec<Tensor2<T>>)>,
{
    let (base_loss, analytic) = f(params)?;
    if !base_loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss {base_loss} at the base point"
        )));
    }
    if analytic.len() != params.len() {
        return Err(Error::Config(format!(
            "loss returned {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    for (i, (g, p)) in analytic.iter().zip(params).enumerate() {
        if g.shape() != p.shape() {
            return Err(Error::Config(format!(
                "gradient {i} shape {:?} does not match parameter shape {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }

    let mut work: Vec<Tensor2<T>> = params.to_vec();
    let mut worst = T::zero();
    let two = T::from_f64_lossy(2.0);

    for pi in 0..params.len() {
        for e in 0..params[pi].len() {
            let orig = work[pi].values()[e];

            work[pi].values_mut()[e] = orig + h;
            let (loss_plus, _) = f(&work)?;
            work[pi].values_mut()[e] = orig - h;
            let (loss_minus, _) = f(&work)?;
            work[pi].values_mut()[e] = orig;

            if !loss_plus.is_finite() || !loss_minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing parameter {pi} entry {e}"
                )));
            }

            let fd = (loss_plus - loss_minus) / (two * h);
            let g = analytic[pi].values()[e];
            let rel = (g - fd).abs() / T::one().max(fd.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
