//! MOBIL lane-change decision.

use serde::{Deserialize, Serialize};

use super::idm::{free_road_acceleration, idm_acceleration};
use super::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaneChange {
    Stay,
    ChangeLeft,
    ChangeRight,
}

/// Nearest vehicles ahead of and behind a longitudinal position in one lane.
#[derive(Debug, Clone, Copy, Default)]
pub struct LaneNeighbors<'a> {
    pub leader: Option<&'a VehicleState>,
    pub follower: Option<&'a VehicleState>,
}

/// Acceleration of `follower` if `leader` (possibly none) were directly ahead.
/// `None` when the pair would overlap.
fn accel_behind(follower: &VehicleState, leader: Option<&VehicleState>) -> Option<f64> {
    match leader {
        None => Some(free_road_acceleration(follower.speed, &follower.params)),
        Some(l) => {
            let gap = l.position - l.params.length - follower.position;
            idm_acceleration(follower.speed, l.speed, gap, &follower.params).ok()
        }
    }
}

/// Incentive of moving `subject` into `target`, or `None` if unsafe.
fn incentive(subject: &VehicleState, current: &LaneNeighbors, target: &LaneNeighbors) -> Option<f64> {
    let p = &subject.params;
    let a_c = accel_behind(subject, current.leader)?;
    let a_c_new = accel_behind(subject, target.leader)?;
    if a_c_new < -p.safe_decel_limit {
        return None;
    }

    let (mut new_follower_gain, mut old_follower_gain) = (0.0, 0.0);
    if let Some(n) = target.follower {
        let a_n = accel_behind(n, target.leader)?;
        let a_n_new = accel_behind(n, Some(subject))?;
        if a_n_new < -n.params.safe_decel_limit {
            return None;
        }
        new_follower_gain = a_n_new - a_n;
    }
    if let Some(o) = current.follower {
        let a_o = accel_behind(o, Some(subject))?;
        let a_o_new = accel_behind(o, current.leader)?;
        old_follower_gain = a_o_new - a_o;
    }
    Some(a_c_new - a_c + p.politeness * (new_follower_gain + old_follower_gain))
}

/// Decides whether `subject` changes lanes. A move needs the new follower
/// (and the subject itself) to brake no harder than `safe_decel_limit`, and
/// an incentive above `lane_change_threshold`. Left wins ties.
pub fn mobil_decide(
    subject: &VehicleState,
    current: &LaneNeighbors,
    left: Option<&LaneNeighbors>,
    right: Option<&LaneNeighbors>,
) -> LaneChange {
    let threshold = subject.params.lane_change_threshold;
    let gain = |t: Option<&LaneNeighbors>| {
        t.and_then(|t| incentive(subject, current, t))
            .filter(|&g| g > threshold)
    };
    match (gain(left), gain(right)) {
        (Some(l), Some(r)) if r > l => LaneChange::ChangeRight,
        (Some(_), _) => LaneChange::ChangeLeft,
        (None, Some(_)) => LaneChange::ChangeRight,
        (None, None) => LaneChange::Stay,
    }
}
