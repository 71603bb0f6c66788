//! Intelligent Driver Model car-following law.

use crate::error::{Error, Result};

use super::DriverParams;

/// IDM acceleration of a follower at speed `v` behind a leader at `v_lead`
/// with bumper-to-bumper `gap`:
/// `a [1 - (v/v0)^delta - (s*/gap)^2]` with
/// `s* = s0 + max(0, v T + v (v - v_lead) / (2 sqrt(a b)))`.
pub fn idm_acceleration(v: f64, v_lead: f64, gap: f64, p: &DriverParams) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("non-positive gap {gap} ft")));
    }
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("negative speed {v} ft/s")));
    }
    let s_star = desired_gap(v, v_lead, p);
    Ok(free_road_acceleration(v, p) - p.max_accel * (s_star / gap).powi(2))
}

/// IDM acceleration without a leader: `a [1 - (v/v0)^delta]`.
pub fn free_road_acceleration(v: f64, p: &DriverParams) -> f64 {
    p.max_accel * (1.0 - (v / p.desired_speed).powf(p.accel_exponent))
}

/// Dynamic desired gap `s*`.
pub fn desired_gap(v: f64, v_lead: f64, p: &DriverParams) -> f64 {
    let dynamic = v * p.time_headway + v * (v - v_lead) / (2.0 * (p.max_accel * p.comfortable_decel).sqrt());
    p.min_gap + dynamic.max(0.0)
}

/// Steady-state gap at speed `v` behind a leader at the same speed
/// (`None` when `v` is not below the desired speed).
pub fn equilibrium_gap(v: f64, p: &DriverParams) -> Option<f64> {
    let free = 1.0 - (v / p.desired_speed).powf(p.accel_exponent);
    (free > 0.0).then(|| desired_gap(v, v, p) / free.sqrt())
}
