use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::SPEED_LIMITS_MPH;

/// Width of a disturbance window; starts fall inside `(20 i, 20 i + 20)` for even `i`.
pub const DISTURBANCE_WINDOW_S: f64 = 20.0;
/// Largest window index a disturbance may start in.
pub const MAX_DISTURBANCE_WINDOW: usize = 44;
pub const SPEED_DROP_DURATION_S: f64 = 15.0;
pub const SPEED_DROP_FACTOR: f64 = 0.3;
pub const SLOW_VEHICLE_DURATION_S: f64 = 300.0;
pub const SLOW_VEHICLE_SPEED_FTPS: (f64, f64) = (8.0, 22.0);
/// Per-lane demand range when a run does not fix its inflow.
pub const INFLOW_RANGE_VPHPL: (f64, f64) = (1200.0, 2200.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbanceKind {
    SpeedDrop,
    SlowVehicle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub kind: DisturbanceKind,
    pub start_time: f64,
    pub duration: f64,
    /// Forced speed in ft/s. `None` for a speed drop means 30% of the
    /// target's speed at onset.
    #[serde(default)]
    pub target_speed: Option<f64>,
}

impl DisturbanceEvent {
    /// Index `i` of the `(20 i, 20 i + 20)` window containing the start.
    pub fn window_index(&self) -> usize {
        (self.start_time / DISTURBANCE_WINDOW_S).floor() as usize
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        let i = self.window_index();
        let lo = i as f64 * DISTURBANCE_WINDOW_S;
        let inside = self.start_time > lo && self.start_time < lo + DISTURBANCE_WINDOW_S;
        if !(self.start_time >= 0.0) || !inside || i % 2 != 0 || i > MAX_DISTURBANCE_WINDOW {
            return Err(Error::Config(format!(
                "disturbance start {} s is not strictly inside an even 20 s window",
                self.start_time
            )));
        }
        if self.start_time >= duration {
            return Err(Error::Config(format!("disturbance starts after the run ends ({} s)", self.start_time)));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Config(format!("disturbance duration {} must be positive", self.duration)));
        }
        if let Some(v) = self.target_speed {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("disturbance target speed {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// One simulation run. Unset optional fields are drawn from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub speed_limit_mph: Option<f64>,
    pub duration: f64,
    pub road_length: f64,
    pub lanes: usize,
    pub dt: f64,
    /// Entry demand per lane (veh/h/lane).
    pub inflow: Option<f64>,
    pub disturbances: Option<Vec<DisturbanceEvent>>,
    /// Fill the road with traffic at t = 0 instead of starting empty.
    pub prepopulate: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            speed_limit_mph: None,
            duration: 900.0,
            road_length: 40_000.0,
            lanes: 3,
            dt: 0.1,
            inflow: None,
            disturbances: None,
            prepopulate: true,
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Number of ticks (`duration / dt`).
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        let ratio = self.duration / self.dt;
        if !(self.duration > 0.0) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "duration {} is not a whole number of {} s ticks",
                self.duration, self.dt
            )));
        }
        if !(self.road_length > 0.0) || self.lanes == 0 {
            return Err(Error::Config("road needs positive length and at least one lane".into()));
        }
        if let Some(limit) = self.speed_limit_mph {
            if !SPEED_LIMITS_MPH.contains(&limit) {
                return Err(Error::Config(format!("speed limit {limit} mph not in {SPEED_LIMITS_MPH:?}")));
            }
        }
        if let Some(q) = self.inflow {
            if !(q >= 0.0) {
                return Err(Error::Config(format!("inflow {q} must be non-negative")));
            }
        }
        for d in self.disturbances.iter().flatten() {
            d.validate(self.duration)?;
        }
        Ok(())
    }
}

/// Draws the disturbances of one run: one to four speed drops and up to two
/// slow vehicles, each in its own even window, starting on a tick strictly
/// inside the window.
pub fn schedule_disturbances<R: Rng + ?Sized>(rng: &mut R, duration: f64) -> Vec<DisturbanceEvent> {
    let windows: Vec<usize> = (0..=MAX_DISTURBANCE_WINDOW)
        .step_by(2)
        .filter(|&i| (i as f64 + 1.0) * DISTURBANCE_WINDOW_S <= duration)
        .collect();
    let n_drop = rng.gen_range(1..=4usize);
    let n_slow = rng.gen_range(0..=2usize);
    let total = (n_drop + n_slow).min(windows.len());
    let chosen = sample(rng, windows.len(), total);
    let mut events: Vec<DisturbanceEvent> = chosen
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let i = windows[w];
            // tick offset 1..=199 keeps the start strictly inside the window
            let offset = rng.gen_range(1..=199u32) as f64 / 10.0;
            let start_time = i as f64 * DISTURBANCE_WINDOW_S + offset;
            if k < n_drop {
                DisturbanceEvent {
                    kind: DisturbanceKind::SpeedDrop,
                    start_time,
                    duration: SPEED_DROP_DURATION_S,
                    target_speed: None,
                }
            } else {
                DisturbanceEvent {
                    kind: DisturbanceKind::SlowVehicle,
                    start_time,
                    duration: SLOW_VEHICLE_DURATION_S,
                    target_speed: Some(rng.gen_range(SLOW_VEHICLE_SPEED_FTPS.0..=SLOW_VEHICLE_SPEED_FTPS.1)),
                }
            }
        })
        .collect();
    events.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    events
}
