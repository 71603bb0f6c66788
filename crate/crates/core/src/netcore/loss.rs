//! Regression losses on `(batch, channels, h, w)` predictions.
//!
//! Every loss is the element mean over each sample, averaged over the batch,
//! which for equally-shaped samples is the mean over all elements.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::window::{box_mean, box_mean_adjoint};

use super::{Real, Tensor4};

/// Smoothing widths of the composite loss.
pub const SMOOTHING_WIDTHS: [usize; 3] = [10, 5, 3];
/// Weight of the smoothed terms in the composite loss.
pub const SMOOTHED_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// `MSE + 1000 (MSE_10 + MSE_5 + MSE_3)`.
    Custom,
    PlainMse,
}

impl LossKind {
    pub fn value<T: Real>(self, pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<f64> {
        match self {
            LossKind::Custom => custom_loss(pred, target),
            LossKind::PlainMse => mse(pred, target),
        }
    }

    /// Loss value and its gradient with respect to `pred`.
    pub fn value_and_grad<T: Real>(self, pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
        pred.ensure_same_dims(target, "loss operands")?;
        let m = pred.len() as f64;
        let diff: Vec<f64> = pred
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| p.as_f64() - t.as_f64())
            .collect();
        let mut value = diff.iter().map(|d| d * d).sum::<f64>() / m;
        let mut grad: Vec<f64> = diff.iter().map(|d| 2.0 * d / m).collect();
        if self == LossKind::Custom {
            let [_, _, h, w] = pred.dims();
            let hw = h * w;
            for width in SMOOTHING_WIDTHS {
                let mut sq = 0.0;
                for (plane, g) in diff.chunks(hw).zip(grad.chunks_mut(hw)) {
                    let s = box_mean(plane, h, w, width);
                    sq += s.iter().map(|d| d * d).sum::<f64>();
                    let scaled: Vec<f64> = s.iter().map(|d| SMOOTHED_WEIGHT * 2.0 * d / m).collect();
                    for (gi, a) in g.iter_mut().zip(box_mean_adjoint(&scaled, h, w, width)) {
                        *gi += a;
                    }
                }
                value += SMOOTHED_WEIGHT * sq / m;
            }
        }
        let grad = Tensor4::from_vec(pred.dims(), grad.into_iter().map(T::from_f64).collect())?;
        Ok((value, grad))
    }
}

pub fn mse<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<f64> {
    pred.ensure_same_dims(target, "mse operands")?;
    Ok(mean_of(pred, target, |d| d * d))
}

pub fn mae<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<f64> {
    pred.ensure_same_dims(target, "mae operands")?;
    Ok(mean_of(pred, target, f64::abs))
}

/// MSE after smoothing both grids with a `width x width` sliding mean
/// (zero padding, divisor `width^2`, even widths use offsets `-w/2..w/2-1`).
pub fn smoothed_mse<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>, width: usize) -> Result<f64> {
    pred.ensure_same_dims(target, "smoothed mse operands")?;
    let [n, c, h, w] = pred.dims();
    let mut sq = 0.0;
    for b in 0..n {
        for ch in 0..c {
            let p: Vec<f64> = pred.plane(b, ch).iter().map(|v| v.as_f64()).collect();
            let t: Vec<f64> = target.plane(b, ch).iter().map(|v| v.as_f64()).collect();
            let sp = box_mean(&p, h, w, width);
            let st = box_mean(&t, h, w, width);
            sq += sp.iter().zip(&st).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(sq / pred.len() as f64)
}

pub fn custom_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<f64> {
    let mut smoothed = 0.0;
    for width in SMOOTHING_WIDTHS {
        smoothed += smoothed_mse(pred, target, width)?;
    }
    Ok(mse(pred, target)? + SMOOTHED_WEIGHT * smoothed)
}

fn mean_of<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>, f: impl Fn(f64) -> f64) -> f64 {
    let n = pred.batch();
    let per = pred.sample_len() as f64;
    let mut total = 0.0;
    for b in 0..n {
        let s: f64 = pred
            .sample(b)
            .iter()
            .zip(target.sample(b))
            .map(|(p, t)| f(p.as_f64() - t.as_f64()))
            .sum();
        total += s / per;
    }
    total / n as f64
}
