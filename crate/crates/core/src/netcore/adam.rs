use crate::error::{Error, Result};

use super::Real;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moments for a list of parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step_count: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    /// Zeroed moments with the default hyperparameters for groups of the given sizes.
    pub fn new(group_sizes: &[usize]) -> Self {
        Self::with_learning_rate(group_sizes, DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate(group_sizes: &[usize], learning_rate: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// One bias-corrected Adam update of every group.
pub fn adam_step<T: Real>(params: &mut [&mut [T]], grads: &[&[T]], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Shape(format!(
            "{} parameter groups, {} gradient groups, {} moment groups",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[i].len() {
            return Err(Error::Shape(format!(
                "group {i}: {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                state.first_moment[i].len()
            )));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for k in 0..p.len() {
            let gk = g[k].as_f64();
            let mk = b1 * m[k].as_f64() + (1.0 - b1) * gk;
            let vk = b2 * v[k].as_f64() + (1.0 - b2) * gk * gk;
            m[k] = T::from_f64(mk);
            v[k] = T::from_f64(vk);
            let step = state.learning_rate * (mk / c1) / ((vk / c2).sqrt() + state.epsilon);
            p[k] = T::from_f64(p[k].as_f64() - step);
        }
    }
    Ok(())
}
