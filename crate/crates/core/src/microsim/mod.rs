//! Multi-lane microscopic traffic simulator: IDM car following, MOBIL lane
//! changing, seeded driver heterogeneity and scheduled disturbances.

mod config;
mod idm;
mod mobil;
mod params;
mod trajectory;
mod world;

pub use config::{
    schedule_disturbances, DisturbanceEvent, DisturbanceKind, SimConfig, DISTURBANCE_WINDOW_S, INFLOW_RANGE_VPHPL,
    MAX_DISTURBANCE_WINDOW, SLOW_VEHICLE_DURATION_S, SLOW_VEHICLE_SPEED_FTPS, SPEED_DROP_DURATION_S,
    SPEED_DROP_FACTOR,
};
pub use idm::{desired_gap, equilibrium_gap, free_road_acceleration, idm_acceleration};
pub use mobil::{mobil_decide, LaneChange, LaneNeighbors};
pub use params::{ftps_to_mph, mph_to_ftps, ranges, sample_driver_params, DriverParams, FTPS_PER_MPH, SPEED_LIMITS_MPH};
pub use trajectory::{load_csv, save_csv, write_csv, TrajectorySample, CSV_HEADER};
pub use world::{
    step, AppliedDisturbance, VehicleState, World, LANE_CHANGE_COOLDOWN_S, MAX_ACCEL, MAX_DECEL, MIN_ENTRY_HEADWAY_S,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Trajectory log and bookkeeping of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOutput {
    pub run_id: u64,
    pub speed_limit_mph: f64,
    pub inflow: f64,
    pub duration: f64,
    pub dt: f64,
    pub road_length: f64,
    pub lanes: usize,
    pub vehicles: u64,
    pub disturbances: Vec<AppliedDisturbance>,
    /// Sorted by time, then vehicle id.
    pub samples: Vec<TrajectorySample>,
}

/// Runs one simulation, emitting a sample for every vehicle on the road at
/// every tick `0, dt, ..., duration - dt`. The run id is the seed.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutput> {
    let mut world = World::new(config)?;
    let mut samples = Vec::new();
    for _ in 0..config.steps() {
        samples.extend(world.samples(config.seed));
        world.step()?;
    }
    Ok(SimOutput {
        run_id: config.seed,
        speed_limit_mph: world.speed_limit_mph(),
        inflow: world.inflow(),
        duration: config.duration,
        dt: config.dt,
        road_length: config.road_length,
        lanes: config.lanes,
        vehicles: world.vehicles_created(),
        disturbances: world.applied_disturbances().to_vec(),
        samples,
    })
}
