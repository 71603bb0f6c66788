//! Multi-lane road state and the per-tick update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{schedule_disturbances, DisturbanceEvent, DisturbanceKind, SimConfig, INFLOW_RANGE_VPHPL, SPEED_DROP_FACTOR};
use super::idm::{free_road_acceleration, idm_acceleration};
use super::mobil::{mobil_decide, LaneChange, LaneNeighbors};
use super::params::{mph_to_ftps, sample_driver_params, DriverParams, SPEED_LIMITS_MPH};
use super::trajectory::TrajectorySample;

/// Acceleration bounds applied after the driver model (ft/s^2).
pub const MAX_DECEL: f64 = -26.0;
pub const MAX_ACCEL: f64 = 13.0;
/// Minimum time between two lane changes of one vehicle.
pub const LANE_CHANGE_COOLDOWN_S: f64 = 4.0;
/// Minimum entry headway of the shifted-exponential arrival process.
pub const MIN_ENTRY_HEADWAY_S: f64 = 1.0;
/// Relaxation time used to steer a disturbed vehicle to its forced speed.
const CONTROL_RELAXATION_S: f64 = 1.0;

const STREAM_SETUP: u64 = 1;
const STREAM_DRIVERS: u64 = 2;
const STREAM_ARRIVALS: u64 = 3;
const STREAM_TARGETS: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: u64,
    pub lane: usize,
    /// Front-bumper position along the road (ft).
    pub position: f64,
    pub speed: f64,
    pub params: DriverParams,
    last_lane_change: Option<f64>,
}

impl VehicleState {
    pub fn new(id: u64, lane: usize, position: f64, speed: f64, params: DriverParams) -> Self {
        Self {
            id,
            lane,
            position,
            speed,
            params,
            last_lane_change: None,
        }
    }

    pub fn rear(&self) -> f64 {
        self.position - self.params.length
    }
}

/// A disturbance as it was applied during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedDisturbance {
    pub event: DisturbanceEvent,
    /// `None` when no vehicle was eligible at onset.
    pub vehicle_id: Option<u64>,
    pub lane: Option<usize>,
    pub position: Option<f64>,
    pub target_speed: f64,
}

#[derive(Debug, Clone)]
struct SpeedControl {
    vehicle_id: u64,
    target_speed: f64,
    until_tick: u64,
}

#[derive(Debug, Clone)]
struct Pending {
    event: DisturbanceEvent,
    start_tick: u64,
}

pub struct World {
    seed: u64,
    dt: f64,
    road_length: f64,
    speed_limit_mph: f64,
    inflow: f64,
    /// Vehicles of each lane ordered by descending position (leader first).
    lanes: Vec<Vec<VehicleState>>,
    tick: u64,
    next_id: u64,
    drivers: ChaCha8Rng,
    arrivals: ChaCha8Rng,
    targets: ChaCha8Rng,
    next_entry: Vec<f64>,
    waiting: Vec<Option<DriverParams>>,
    pending: Vec<Pending>,
    controls: Vec<SpeedControl>,
    applied: Vec<AppliedDisturbance>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl World {
    /// Builds the initial state of a run, drawing every unset option from the seed.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut setup = stream(config.seed, STREAM_SETUP);
        let speed_limit_mph = config
            .speed_limit_mph
            .unwrap_or_else(|| SPEED_LIMITS_MPH[setup.gen_range(0..SPEED_LIMITS_MPH.len())]);
        let inflow = config
            .inflow
            .unwrap_or_else(|| setup.gen_range(INFLOW_RANGE_VPHPL.0..=INFLOW_RANGE_VPHPL.1));
        let events = match &config.disturbances {
            Some(d) => d.clone(),
            None => schedule_disturbances(&mut setup, config.duration),
        };
        let dt = config.dt;
        let pending = events
            .into_iter()
            .map(|event| Pending {
                start_tick: (event.start_time / dt - 1e-9).ceil() as u64,
                event,
            })
            .collect();
        let mut world = Self {
            seed: config.seed,
            dt,
            road_length: config.road_length,
            speed_limit_mph,
            inflow,
            lanes: vec![Vec::new(); config.lanes],
            tick: 0,
            next_id: 0,
            drivers: stream(config.seed, STREAM_DRIVERS),
            arrivals: stream(config.seed, STREAM_ARRIVALS),
            targets: stream(config.seed, STREAM_TARGETS),
            next_entry: vec![f64::INFINITY; config.lanes],
            waiting: vec![None; config.lanes],
            pending,
            controls: Vec::new(),
            applied: Vec::new(),
        };
        for lane in 0..config.lanes {
            world.next_entry[lane] = world.entry_headway();
        }
        if config.prepopulate {
            world.prepopulate(&mut setup);
        }
        Ok(world)
    }

    fn prepopulate(&mut self, rng: &mut ChaCha8Rng) {
        if self.inflow <= 0.0 {
            return;
        }
        let spacing = mph_to_ftps(self.speed_limit_mph) * 3600.0 / self.inflow;
        for lane in 0..self.lanes.len() {
            let mut pos = self.road_length - rng.gen_range(0.0..spacing);
            while pos > 0.0 {
                let params = sample_driver_params(&mut self.drivers, self.speed_limit_mph);
                let speed = match self.lanes[lane].last() {
                    None => Some(params.desired_speed),
                    Some(l) => {
                        let gap = l.rear() - pos;
                        (gap > params.min_gap)
                            .then(|| params.desired_speed.min(l.speed).min((gap - params.min_gap) / params.time_headway))
                    }
                };
                if let Some(speed) = speed {
                    let id = self.fresh_id();
                    self.lanes[lane].push(VehicleState::new(id, lane, pos, speed, params));
                }
                pos -= spacing * rng.gen_range(0.8..1.2);
            }
        }
    }

    /// Empty road with no arrivals, for hand-built scenes.
    pub fn empty(config: &SimConfig) -> Result<Self> {
        let config = SimConfig {
            inflow: Some(0.0),
            prepopulate: false,
            disturbances: Some(config.disturbances.clone().unwrap_or_default()),
            ..config.clone()
        };
        Self::new(&config)
    }

    /// Places a vehicle; fails if it overlaps a neighbour in its lane.
    pub fn insert_vehicle(&mut self, lane: usize, position: f64, speed: f64, params: DriverParams) -> Result<u64> {
        params.validate()?;
        if lane >= self.lanes.len() || !(0.0..=self.road_length).contains(&position) || !(speed >= 0.0) {
            return Err(Error::Invalid(format!("cannot place vehicle at lane {lane}, {position} ft")));
        }
        let id = self.fresh_id();
        let v = VehicleState::new(id, lane, position, speed, params);
        let vehicles = &self.lanes[lane];
        let idx = vehicles.partition_point(|o| o.position >= position);
        let clear_ahead = idx == 0 || vehicles[idx - 1].rear() > position;
        let clear_behind = idx == vehicles.len() || v.rear() > vehicles[idx].position;
        if !(clear_ahead && clear_behind) {
            return Err(Error::Invalid(format!("vehicle at lane {lane}, {position} ft overlaps a neighbour")));
        }
        self.lanes[lane].insert(idx, v);
        Ok(id)
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn speed_limit_mph(&self) -> f64 {
        self.speed_limit_mph
    }

    pub fn inflow(&self) -> f64 {
        self.inflow
    }

    pub fn lanes(&self) -> &[Vec<VehicleState>] {
        &self.lanes
    }

    pub fn vehicle(&self, id: u64) -> Option<&VehicleState> {
        self.lanes.iter().flatten().find(|v| v.id == id)
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn vehicles_created(&self) -> u64 {
        self.next_id
    }

    pub fn applied_disturbances(&self) -> &[AppliedDisturbance] {
        &self.applied
    }

    /// One observation per vehicle at the current time, ordered by vehicle id.
    pub fn samples(&self, run_id: u64) -> Vec<TrajectorySample> {
        let time_s = (self.time() * 10.0).round() / 10.0;
        let mut out: Vec<TrajectorySample> = self
            .lanes
            .iter()
            .flatten()
            .map(|v| TrajectorySample {
                run_id,
                time_s,
                vehicle_id: v.id,
                lane: v.lane as u8,
                position_ft: v.position,
                speed_ftps: v.speed,
            })
            .collect();
        out.sort_by_key(|s| s.vehicle_id);
        out
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn entry_headway(&mut self) -> f64 {
        if self.inflow <= 0.0 {
            return f64::INFINITY;
        }
        let mean = 3600.0 / self.inflow;
        if mean <= MIN_ENTRY_HEADWAY_S {
            return mean;
        }
        let u: f64 = self.arrivals.gen();
        MIN_ENTRY_HEADWAY_S - (mean - MIN_ENTRY_HEADWAY_S) * (1.0 - u).ln()
    }

    /// Advances the road by one tick: disturbance onsets, lane changes,
    /// accelerations, the ballistic update, exits, collision check and entries.
    pub fn step(&mut self) -> Result<()> {
        self.update_disturbances();
        self.change_lanes();
        let accels = self.accelerations()?;
        self.integrate(&accels);
        for lane in &mut self.lanes {
            let gone = lane.partition_point(|v| v.position > self.road_length);
            lane.drain(..gone);
        }
        self.check_collisions()?;
        self.tick += 1;
        self.spawn();
        Ok(())
    }

    fn update_disturbances(&mut self) {
        let tick = self.tick;
        self.controls.retain(|c| c.until_tick > tick);
        let (due, later): (Vec<Pending>, Vec<Pending>) = self.pending.drain(..).partition(|p| p.start_tick <= tick);
        self.pending = later;
        for p in due {
            let lo = self.road_length * 0.25;
            let hi = self.road_length * 0.75;
            let mut eligible: Vec<&VehicleState> = self
                .lanes
                .iter()
                .flatten()
                .filter(|v| v.position >= lo && v.position <= hi)
                .filter(|v| !self.controls.iter().any(|c| c.vehicle_id == v.id))
                .collect();
            eligible.sort_by_key(|v| v.id);
            let chosen = (!eligible.is_empty()).then(|| eligible[self.targets.gen_range(0..eligible.len())].clone());
            let target_speed = match (p.event.kind, p.event.target_speed, &chosen) {
                (_, Some(s), _) => s,
                (DisturbanceKind::SpeedDrop, None, Some(v)) => SPEED_DROP_FACTOR * v.speed,
                _ => 0.0,
            };
            if let Some(v) = &chosen {
                let ticks = (p.event.duration / self.dt).round() as u64;
                self.controls.push(SpeedControl {
                    vehicle_id: v.id,
                    target_speed,
                    until_tick: p.start_tick + ticks,
                });
            }
            self.applied.push(AppliedDisturbance {
                event: p.event,
                vehicle_id: chosen.as_ref().map(|v| v.id),
                lane: chosen.as_ref().map(|v| v.lane),
                position: chosen.as_ref().map(|v| v.position),
                target_speed,
            });
        }
    }

    fn controlled(&self, id: u64) -> Option<f64> {
        self.controls.iter().find(|c| c.vehicle_id == id).map(|c| c.target_speed)
    }

    fn neighbors_at(&self, lane: usize, position: f64) -> LaneNeighbors<'_> {
        let vehicles = &self.lanes[lane];
        let idx = vehicles.partition_point(|o| o.position >= position);
        LaneNeighbors {
            leader: idx.checked_sub(1).map(|k| &vehicles[k]),
            follower: vehicles.get(idx),
        }
    }

    fn decide(&self, lane: usize, idx: usize) -> LaneChange {
        let vehicles = &self.lanes[lane];
        let subject = &vehicles[idx];
        let current = LaneNeighbors {
            leader: idx.checked_sub(1).map(|k| &vehicles[k]),
            follower: vehicles.get(idx + 1),
        };
        let left = (lane + 1 < self.lanes.len()).then(|| self.neighbors_at(lane + 1, subject.position));
        let right = lane.checked_sub(1).map(|l| self.neighbors_at(l, subject.position));
        mobil_decide(subject, &current, left.as_ref(), right.as_ref())
    }

    fn may_change(&self, v: &VehicleState) -> bool {
        let now = self.time();
        let rested = v
            .last_lane_change
            .map_or(true, |t| now - t >= LANE_CHANGE_COOLDOWN_S - 1e-9);
        rested && self.controlled(v.id).is_none()
    }

    fn change_lanes(&mut self) {
        if self.lanes.len() < 2 {
            return;
        }
        // Decide on the frozen state, then re-check each mover against the
        // state left by earlier moves before applying it.
        let mut proposals: Vec<(f64, u64, usize)> = Vec::new();
        for (lane, vehicles) in self.lanes.iter().enumerate() {
            for (idx, v) in vehicles.iter().enumerate() {
                if self.may_change(v) && self.decide(lane, idx) != LaneChange::Stay {
                    proposals.push((v.position, v.id, lane));
                }
            }
        }
        proposals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let now = self.time();
        for (_, id, lane) in proposals {
            let Some(idx) = self.lanes[lane].iter().position(|v| v.id == id) else {
                continue;
            };
            let target = match self.decide(lane, idx) {
                LaneChange::Stay => continue,
                LaneChange::ChangeLeft => lane + 1,
                LaneChange::ChangeRight => lane - 1,
            };
            let mut v = self.lanes[lane].remove(idx);
            v.lane = target;
            v.last_lane_change = Some(now);
            let at = self.lanes[target].partition_point(|o| o.position >= v.position);
            self.lanes[target].insert(at, v);
        }
    }

    fn accelerations(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.lanes.len());
        for vehicles in &self.lanes {
            let mut lane_acc = Vec::with_capacity(vehicles.len());
            for (idx, v) in vehicles.iter().enumerate() {
                let mut a = match idx.checked_sub(1).map(|k| &vehicles[k]) {
                    None => free_road_acceleration(v.speed, &v.params),
                    Some(l) => idm_acceleration(v.speed, l.speed, l.rear() - v.position, &v.params)
                        .map_err(|e| self.collision(format!("vehicle {} behind {}: {e}", v.id, l.id)))?,
                };
                if let Some(target) = self.controlled(v.id) {
                    let steer = ((target - v.speed) / CONTROL_RELAXATION_S).max(-v.params.comfortable_decel);
                    a = a.min(steer);
                }
                lane_acc.push(a.clamp(MAX_DECEL, MAX_ACCEL));
            }
            out.push(lane_acc);
        }
        Ok(out)
    }

    fn integrate(&mut self, accels: &[Vec<f64>]) {
        let dt = self.dt;
        for (vehicles, acc) in self.lanes.iter_mut().zip(accels) {
            for (v, &a) in vehicles.iter_mut().zip(acc) {
                let new_speed = v.speed + a * dt;
                if new_speed < 0.0 {
                    // stops within the tick
                    v.position -= v.speed * v.speed / (2.0 * a);
                    v.speed = 0.0;
                } else {
                    v.position += v.speed * dt + 0.5 * a * dt * dt;
                    v.speed = new_speed;
                }
            }
        }
    }

    fn check_collisions(&self) -> Result<()> {
        for (lane, vehicles) in self.lanes.iter().enumerate() {
            for pair in vehicles.windows(2) {
                let gap = pair[0].rear() - pair[1].position;
                if !(gap > 0.0) {
                    return Err(self.collision(format!(
                        "lane {lane}: vehicle {} at {:.3} ft runs into {} (gap {gap:.3} ft)",
                        pair[1].id, pair[1].position, pair[0].id
                    )));
                }
            }
        }
        Ok(())
    }

    fn collision(&self, detail: String) -> Error {
        Error::Collision {
            seed: self.seed,
            time: self.time(),
            detail,
        }
    }

    fn spawn(&mut self) {
        let now = self.time();
        for lane in 0..self.lanes.len() {
            if self.next_entry[lane] > now + 1e-9 {
                continue;
            }
            let params = match self.waiting[lane] {
                Some(p) => p,
                None => sample_driver_params(&mut self.drivers, self.speed_limit_mph),
            };
            let leader = self.lanes[lane].last();
            let speed = leader.map_or(params.desired_speed, |l| params.desired_speed.min(l.speed));
            let clear = leader.map_or(true, |l| l.rear() > params.min_gap + speed * params.time_headway);
            if clear {
                let id = self.fresh_id();
                self.lanes[lane].push(VehicleState::new(id, lane, 0.0, speed, params));
                self.waiting[lane] = None;
                let h = self.entry_headway();
                self.next_entry[lane] += h;
            } else {
                self.waiting[lane] = Some(params);
            }
        }
    }
}

/// Advances `world` by one tick.
pub fn step(world: &mut World) -> Result<()> {
    world.step()
}
