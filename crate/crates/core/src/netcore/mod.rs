//! Minimal differentiable tensor core for the encoder-decoder.

mod adam;
mod conv;
mod loss;
mod real;
mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON, DEFAULT_LEARNING_RATE};
pub use conv::{conv2d_forward, deconv2d_forward, transpose_roles, ConvGrads, ConvLayerParams, ConvMode, KERNEL};
pub use loss::{custom_loss, mae, mse, smoothed_mse, LossKind, SMOOTHED_WEIGHT, SMOOTHING_WIDTHS};
pub use real::Real;
pub use tensor::Tensor4;

use crate::error::Result;

pub fn relu<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of [`relu`] given its output: passes `dy` where the output is positive.
pub fn relu_backward<T: Real>(out: &Tensor4<T>, dy: &mut Tensor4<T>) {
    for (g, &o) in dy.as_mut_slice().iter_mut().zip(out.as_slice()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Element-wise sum of a skip branch into the main path.
pub fn skip_add<T: Real>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
    let mut out = a.clone();
    skip_add_assign(&mut out, b)?;
    Ok(out)
}

pub fn skip_add_assign<T: Real>(a: &mut Tensor4<T>, b: &Tensor4<T>) -> Result<()> {
    a.ensure_same_dims(b, "skip connection")?;
    for (x, &y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x = *x + y;
    }
    Ok(())
}
