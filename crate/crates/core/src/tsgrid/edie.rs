//! Direct Edie density of a time-space block from raw trajectory samples.

use crate::microsim::TrajectorySample;

use super::matrix::{time_tick, FEET_PER_MILE, TIME_BIN_S};

/// Rectangle `[space_start, space_end) x [time_start, time_end)` in one lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdieBlock {
    pub lane: u8,
    pub space_start: f64,
    pub space_end: f64,
    pub time_start: f64,
    pub time_end: f64,
}

impl EdieBlock {
    /// Block area in mile-seconds.
    pub fn area(&self) -> f64 {
        (self.space_end - self.space_start) / FEET_PER_MILE * (self.time_end - self.time_start)
    }
}

/// `k(A) = t(A) / |A|` in vehicles per mile, where `t(A)` is the total time
/// spent in the block: one 0.1 s observation interval per sample inside it.
pub fn edie_density_oracle(samples: &[TrajectorySample], block: &EdieBlock) -> f64 {
    let (t0, t1) = (time_tick(block.time_start), time_tick(block.time_end));
    let occupied = samples
        .iter()
        .filter(|s| s.lane == block.lane)
        .filter(|s| s.position_ft >= block.space_start && s.position_ft < block.space_end)
        .filter(|s| {
            let t = time_tick(s.time_s);
            t >= t0 && t < t1
        })
        .count();
    let time_spent = TIME_BIN_S * occupied as f64;
    time_spent / block.area()
}
