use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microsim::TrajectorySample;
use crate::window::box_mean;

/// Rows (space bins) per matrix.
pub const ROWS: usize = 200;
/// Columns (time bins) per matrix.
pub const COLS: usize = 200;
/// Space bin height (ft).
pub const SPACE_BIN_FT: f64 = 10.0;
/// Time bin width (s).
pub const TIME_BIN_S: f64 = 0.1;
/// Averaging window (bins per side): 100 ft by 1 s.
pub const AVERAGING_WINDOW: usize = 10;
/// Density of a fully occupied averaged cell: `100 * 0.1 s / (100 ft / 5280 * 1 s)`.
pub const DENSITY_SCALE_VPM: f64 = 528.0;
pub const FEET_PER_MILE: f64 = 5280.0;

/// Placement of a matrix on the road and in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOrigin {
    pub lane: u8,
    pub segment_origin: f64,
    pub window_start: f64,
}

/// Binary occupancy grid: `cells[r * COLS + c]` is 1 when a front bumper lies
/// in space bin `r` at the sample time of column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpaceMatrix {
    pub origin: GridOrigin,
    pub cells: Vec<u8>,
}

/// 10x10 sliding mean of a [`TimeSpaceMatrix`], cells in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTimeSpaceMatrix {
    pub origin: GridOrigin,
    pub cells: Vec<f64>,
}

/// Edie density field in vehicles per mile.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub origin: GridOrigin,
    pub cells: Vec<f64>,
}

impl TimeSpaceMatrix {
    pub fn empty(origin: GridOrigin) -> Self {
        Self {
            origin,
            cells: vec![0; ROWS * COLS],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * COLS + col]
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// Occupied cells in column `col`, i.e. vehicles on the segment at that instant.
    pub fn column_mass(&self, col: usize) -> usize {
        (0..ROWS).filter(|&r| self.get(r, col) == 1).count()
    }
}

impl AveragedTimeSpaceMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * COLS + col]
    }
}

impl DensityMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * COLS + col]
    }
}

/// Tick index of a sample time on the 0.1 s grid.
pub(crate) fn time_tick(time_s: f64) -> i64 {
    (time_s / TIME_BIN_S).round() as i64
}

/// Bins the samples of one lane into the 2000 ft x 20 s block starting at
/// `segment_origin` and `window_start`.
pub fn build_time_space_matrix(
    samples: &[TrajectorySample],
    lane: u8,
    segment_origin: f64,
    window_start: f64,
) -> Result<TimeSpaceMatrix> {
    let origin = GridOrigin {
        lane,
        segment_origin,
        window_start,
    };
    let mut m = TimeSpaceMatrix::empty(origin);
    let first_tick = time_tick(window_start);
    for s in samples.iter().filter(|s| s.lane == lane) {
        let col = time_tick(s.time_s) - first_tick;
        let rel = s.position_ft - segment_origin;
        if !(0..COLS as i64).contains(&col) || !(0.0..ROWS as f64 * SPACE_BIN_FT).contains(&rel) {
            continue;
        }
        let row = (rel / SPACE_BIN_FT).floor() as usize;
        let cell = &mut m.cells[row * COLS + col as usize];
        if *cell != 0 {
            return Err(Error::DataIntegrity(format!(
                "two vehicles in lane {lane} share space bin {row} at t={:.1} s (vehicle {})",
                s.time_s, s.vehicle_id
            )));
        }
        *cell = 1;
    }
    Ok(m)
}

/// Replaces each cell by the mean of the 10x10 block at offsets `-5..=4` in
/// both directions. Cells outside the matrix count as zero and the divisor is
/// always 100.
pub fn average_matrix(m: &TimeSpaceMatrix) -> AveragedTimeSpaceMatrix {
    let src: Vec<f64> = m.cells.iter().map(|&c| c as f64).collect();
    AveragedTimeSpaceMatrix {
        origin: m.origin,
        cells: box_mean(&src, ROWS, COLS, AVERAGING_WINDOW),
    }
}

/// `K = 528 * TS` element-wise.
pub fn to_density(a: &AveragedTimeSpaceMatrix) -> DensityMatrix {
    DensityMatrix {
        origin: a.origin,
        cells: a.cells.iter().map(|&v| DENSITY_SCALE_VPM * v).collect(),
    }
}
