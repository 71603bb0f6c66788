use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feet per second in one mile per hour.
pub const FTPS_PER_MPH: f64 = 5280.0 / 3600.0;

/// Speed limits a run may draw from, in mph.
pub const SPEED_LIMITS_MPH: [f64; 7] = [30.0, 45.0, 50.0, 55.0, 65.0, 70.0, 75.0];

pub fn mph_to_ftps(mph: f64) -> f64 {
    mph * FTPS_PER_MPH
}

pub fn ftps_to_mph(ftps: f64) -> f64 {
    ftps / FTPS_PER_MPH
}

/// Per-driver IDM and MOBIL parameters (feet, seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub accel_exponent: f64,
    pub politeness: f64,
    pub lane_change_threshold: f64,
    pub safe_decel_limit: f64,
    pub length: f64,
}

/// Uniform ranges used by [`sample_driver_params`].
pub mod ranges {
    pub const TIME_HEADWAY: (f64, f64) = (1.0, 2.0);
    pub const MAX_ACCEL: (f64, f64) = (2.6, 4.9);
    pub const COMFORTABLE_DECEL: (f64, f64) = (3.3, 6.6);
    pub const MIN_GAP: (f64, f64) = (3.3, 9.8);
    pub const LENGTH: (f64, f64) = (14.0, 16.0);
    pub const DESIRED_SPEED_FACTOR: (f64, f64) = (0.9, 1.1);
    pub const POLITENESS: (f64, f64) = (0.2, 0.5);
    pub const ACCEL_EXPONENT: f64 = 4.0;
    pub const LANE_CHANGE_THRESHOLD: f64 = 0.33;
    pub const SAFE_DECEL_LIMIT: f64 = 13.1;
}

impl DriverParams {
    /// Mid-range driver with the given desired speed.
    pub fn typical(desired_speed: f64) -> Self {
        Self {
            desired_speed,
            time_headway: 1.5,
            max_accel: 3.3,
            comfortable_decel: 5.0,
            min_gap: 6.5,
            accel_exponent: ranges::ACCEL_EXPONENT,
            politeness: 0.3,
            lane_change_threshold: ranges::LANE_CHANGE_THRESHOLD,
            safe_decel_limit: ranges::SAFE_DECEL_LIMIT,
            length: 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("time_headway", self.time_headway),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("min_gap", self.min_gap),
            ("length", self.length),
            ("safe_decel_limit", self.safe_decel_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.politeness) {
            return Err(Error::Config(format!("politeness {} outside [0, 1]", self.politeness)));
        }
        Ok(())
    }
}

/// Draws a random driver whose desired speed is centred on the speed limit.
pub fn sample_driver_params<R: Rng + ?Sized>(rng: &mut R, speed_limit_mph: f64) -> DriverParams {
    let mut u = |(lo, hi): (f64, f64)| rng.gen_range(lo..=hi);
    let factor = u(ranges::DESIRED_SPEED_FACTOR);
    DriverParams {
        desired_speed: mph_to_ftps(speed_limit_mph) * factor,
        time_headway: u(ranges::TIME_HEADWAY),
        max_accel: u(ranges::MAX_ACCEL),
        comfortable_decel: u(ranges::COMFORTABLE_DECEL),
        min_gap: u(ranges::MIN_GAP),
        accel_exponent: ranges::ACCEL_EXPONENT,
        politeness: u(ranges::POLITENESS),
        lane_change_threshold: ranges::LANE_CHANGE_THRESHOLD,
        safe_decel_limit: ranges::SAFE_DECEL_LIMIT,
        length: u(ranges::LENGTH),
    }
}
