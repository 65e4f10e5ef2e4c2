//! Inverted dropout.

use super::scalar::Scalar;
use super::tensor::Tensor2;
use super::RngStream;
use crate::error::{Error, Result};

/// Mask of 0 / 1/(1-ratio) entries. Multiplying by it realizes inverted
/// dropout: surviving entries are scaled at train time so inference needs
/// no rescale.
pub fn dropout_mask<T: Scalar>(
    rows: usize,
    cols: usize,
    ratio: f64,
    rng: &mut RngStream,
) -> Result<Tensor2<T>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("dropout ratio {ratio} not in [0, 1)")));
    }
    if ratio == 0.0 {
        return Ok(Tensor2::filled(rows, cols, T::one()));
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - ratio));
    let mut mask = Tensor2::zeros(rows, cols);
    for v in mask.values_mut() {
        if rng.unit() >= ratio {
            *v = keep;
        }
    }
    Ok(mask)
}

/// Applies dropout to a tensor. Identity when not training or ratio is 0.
pub fn apply_dropout<T: Scalar>(
    t: &Tensor2<T>,
    ratio: f64,
    rng: &mut RngStream,
    training: bool,
) -> Result<Tensor2<T>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("dropout ratio {ratio} not in [0, 1)")));
    }
    if !training || ratio == 0.0 {
        return Ok(t.clone());
    }
    let mask = dropout_mask(t.rows(), t.cols(), ratio, rng)?;
    Ok(t.hadamard(&mask))
}
