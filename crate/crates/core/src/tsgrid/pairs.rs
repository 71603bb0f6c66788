//! Cutting a run into 2000 ft x 20 s matrices and pairing consecutive windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microsim::TrajectorySample;

use super::matrix::{average_matrix, time_tick, AveragedTimeSpaceMatrix, GridOrigin, TimeSpaceMatrix, COLS, ROWS, SPACE_BIN_FT, TIME_BIN_S};

pub const SEGMENT_FT: f64 = ROWS as f64 * SPACE_BIN_FT;
pub const WINDOW_S: f64 = COLS as f64 * TIME_BIN_S;

/// Extent of a run's trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLayout {
    pub road_length: f64,
    pub duration: f64,
    pub lanes: usize,
}

impl Default for RunLayout {
    fn default() -> Self {
        Self {
            road_length: 40_000.0,
            duration: 900.0,
            lanes: 3,
        }
    }
}

impl RunLayout {
    pub fn segments(&self) -> usize {
        (self.road_length / SEGMENT_FT).floor() as usize
    }

    pub fn windows(&self) -> usize {
        (self.duration / WINDOW_S + 1e-9).floor() as usize
    }

    /// Disjoint (even, odd) window pairs per segment; a trailing odd window is dropped.
    pub fn pairs_per_segment(&self) -> usize {
        self.windows() / 2
    }

    pub fn pairs_per_lane(&self) -> usize {
        self.segments() * self.pairs_per_segment()
    }
}

/// Averaged input over `(t - 20, t)` and target over `(t, t + 20)` for one
/// segment and lane.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub run_id: u64,
    pub input: AveragedTimeSpaceMatrix,
    pub target: AveragedTimeSpaceMatrix,
}

/// All binary matrices of one lane, segment-major: index `segment * windows + window`.
pub fn lane_matrices(samples: &[TrajectorySample], layout: &RunLayout, lane: u8) -> Result<Vec<TimeSpaceMatrix>> {
    check_complete(samples, layout)?;
    let (segments, windows) = (layout.segments(), layout.windows());
    let mut tiles: Vec<TimeSpaceMatrix> = (0..segments * windows)
        .map(|k| {
            TimeSpaceMatrix::empty(GridOrigin {
                lane,
                segment_origin: (k / windows) as f64 * SEGMENT_FT,
                window_start: (k % windows) as f64 * WINDOW_S,
            })
        })
        .collect();
    for s in samples.iter().filter(|s| s.lane == lane) {
        let tick = time_tick(s.time_s);
        if tick < 0 || s.position_ft < 0.0 {
            continue;
        }
        let (window, col) = ((tick as usize) / COLS, (tick as usize) % COLS);
        let bin = (s.position_ft / SPACE_BIN_FT).floor() as usize;
        let (segment, row) = (bin / ROWS, bin % ROWS);
        if window >= windows || segment >= segments {
            continue;
        }
        let cell = &mut tiles[segment * windows + window].cells[row * COLS + col];
        if *cell != 0 {
            return Err(Error::DataIntegrity(format!(
                "two vehicles in lane {lane} share a bin at {:.1} ft, t={:.1} s (vehicle {})",
                s.position_ft, s.time_s, s.vehicle_id
            )));
        }
        *cell = 1;
    }
    Ok(tiles)
}

/// Visits every sample pair of a run, lane by lane and segment by segment.
/// Returns the number of pairs visited.
pub fn for_each_sample_pair(
    samples: &[TrajectorySample],
    layout: &RunLayout,
    mut visit: impl FnMut(SamplePair) -> Result<()>,
) -> Result<usize> {
    let run_id = samples.first().map_or(0, |s| s.run_id);
    let windows = layout.windows();
    let mut count = 0;
    for lane in 0..layout.lanes {
        let tiles = lane_matrices(samples, layout, lane as u8)?;
        for segment in 0..layout.segments() {
            for k in 0..layout.pairs_per_segment() {
                let base = segment * windows;
                visit(SamplePair {
                    run_id,
                    input: average_matrix(&tiles[base + 2 * k]),
                    target: average_matrix(&tiles[base + 2 * k + 1]),
                })?;
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn extract_sample_pairs(samples: &[TrajectorySample], layout: &RunLayout) -> Result<Vec<SamplePair>> {
    let mut out = Vec::with_capacity(layout.lanes * layout.pairs_per_lane());
    for_each_sample_pair(samples, layout, |p| {
        out.push(p);
        Ok(())
    })?;
    Ok(out)
}

fn check_complete(samples: &[TrajectorySample], layout: &RunLayout) -> Result<()> {
    let last_needed = (layout.windows() * COLS) as i64 - 1;
    let last_seen = samples.iter().map(|s| time_tick(s.time_s)).max().unwrap_or(-1);
    if last_seen < last_needed {
        let first_missing = ((last_seen + 1) as usize) / COLS;
        return Err(Error::Truncated(format!(
            "log ends at {:.1} s; windows {first_missing}..={} ({:.0} s to {:.0} s) are incomplete",
            last_seen.max(0) as f64 * TIME_BIN_S,
            layout.windows() - 1,
            first_missing as f64 * WINDOW_S,
            layout.windows() as f64 * WINDOW_S
        )));
    }
    Ok(())
}
