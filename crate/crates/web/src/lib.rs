//! Browser demo: simulate a short scenario, browse its time-space matrices,
//! and plot the IDM fundamental diagram.

use shockwave::microsim::{
    equilibrium_gap, mph_to_ftps, run_simulation, DisturbanceEvent, DisturbanceKind, DriverParams, SimConfig,
    TrajectorySample,
};
use shockwave::tsgrid::{
    average_matrix, build_time_space_matrix, heatmap_rgb, RunLayout, COLS, DENSITY_SCALE_VPM, FEET_PER_MILE, ROWS,
    SEGMENT_FT, WINDOW_S,
};
use wasm_bindgen::prelude::*;

pub const DEMO_DURATION_S: f64 = 120.0;
pub const DEMO_ROAD_FT: f64 = 6000.0;
pub const DEMO_LANES: usize = 3;
const SLOW_VEHICLE_START_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Occupancy,
    Averaged,
    Density,
}

impl View {
    pub fn from_index(i: u32) -> Option<Self> {
        [View::Occupancy, View::Averaged, View::Density].get(i as usize).copied()
    }
}

/// One simulated scenario held in memory.
#[wasm_bindgen]
pub struct Scenario {
    samples: Vec<TrajectorySample>,
    layout: RunLayout,
    summary: String,
}

impl Scenario {
    /// `slow_vehicle_ftps <= 0` disables the slow vehicle.
    pub fn simulate(seed: u64, speed_limit_mph: f64, inflow: f64, slow_vehicle_ftps: f64) -> shockwave::Result<Self> {
        let disturbances = if slow_vehicle_ftps > 0.0 {
            vec![DisturbanceEvent {
                kind: DisturbanceKind::SlowVehicle,
                start_time: SLOW_VEHICLE_START_S,
                duration: DEMO_DURATION_S,
                target_speed: Some(slow_vehicle_ftps),
            }]
        } else {
            vec![]
        };
        let config = SimConfig {
            seed,
            speed_limit_mph: Some(speed_limit_mph),
            duration: DEMO_DURATION_S,
            road_length: DEMO_ROAD_FT,
            lanes: DEMO_LANES,
            inflow: Some(inflow),
            disturbances: Some(disturbances),
            ..SimConfig::default()
        };
        let out = run_simulation(&config)?;
        let summary = format!(
            "{} vehicles, {} samples, slow vehicle {}",
            out.vehicles,
            out.samples.len(),
            match out.disturbances.first() {
                Some(d) => match (d.lane, d.position) {
                    (Some(l), Some(p)) => format!("in lane {l} at {p:.0} ft"),
                    _ => "found no target".to_string(),
                },
                None => "off".to_string(),
            }
        );
        Ok(Self {
            samples: out.samples,
            layout: RunLayout {
                road_length: DEMO_ROAD_FT,
                duration: DEMO_DURATION_S,
                lanes: DEMO_LANES,
            },
            summary,
        })
    }

    /// Cell values of one matrix in the chosen view.
    pub fn cells(&self, lane: u32, segment: u32, window: u32, view: View) -> shockwave::Result<Vec<f64>> {
        if lane as usize >= self.layout.lanes
            || segment as usize >= self.layout.segments()
            || window as usize >= self.layout.windows()
        {
            return Err(shockwave::Error::Invalid(format!(
                "lane {lane}, segment {segment}, window {window} out of range"
            )));
        }
        let m = build_time_space_matrix(
            &self.samples,
            lane as u8,
            segment as f64 * SEGMENT_FT,
            window as f64 * WINDOW_S,
        )?;
        Ok(match view {
            View::Occupancy => m.cells.iter().map(|&c| c as f64).collect(),
            View::Averaged => average_matrix(&m).cells,
            View::Density => average_matrix(&m).cells.iter().map(|v| DENSITY_SCALE_VPM * v).collect(),
        })
    }

    /// RGBA pixels of one matrix, space axis pointing up. `max` is the value
    /// drawn in full red.
    pub fn rgba(&self, lane: u32, segment: u32, window: u32, view: View, max: f64) -> shockwave::Result<Vec<u8>> {
        let cells = self.cells(lane, segment, window, view)?;
        let rgb = heatmap_rgb(&cells, ROWS, COLS, max)?;
        Ok(rgb.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect())
    }
}

#[wasm_bindgen]
impl Scenario {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, speed_limit_mph: f64, inflow: f64, slow_vehicle_ftps: f64) -> Result<Scenario, JsError> {
        Self::simulate(seed as u64, speed_limit_mph, inflow, slow_vehicle_ftps).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    pub fn lanes(&self) -> u32 {
        self.layout.lanes as u32
    }

    pub fn segments(&self) -> u32 {
        self.layout.segments() as u32
    }

    pub fn windows(&self) -> u32 {
        self.layout.windows() as u32
    }

    /// `view`: 0 occupancy, 1 averaged, 2 density (vpm).
    pub fn render(&self, lane: u32, segment: u32, window: u32, view: u32, max: f64) -> Result<Vec<u8>, JsError> {
        let view = View::from_index(view).ok_or_else(|| JsError::new("view must be 0, 1 or 2"))?;
        self.rgba(lane, segment, window, view, max).map_err(|e| JsError::new(&e.to_string()))
    }
}

/// Equilibrium `[density vpm, flow veh/h]` points of a single-lane IDM
/// stream, `points` speeds from standstill to just below the desired speed.
pub fn fundamental_diagram(desired_mph: f64, time_headway: f64, min_gap: f64, points: usize) -> Vec<[f64; 2]> {
    let params = DriverParams {
        time_headway,
        min_gap,
        ..DriverParams::typical(mph_to_ftps(desired_mph))
    };
    (0..points)
        .filter_map(|k| {
            let v = params.desired_speed * k as f64 / points as f64;
            let spacing = equilibrium_gap(v, &params)? + params.length;
            let density = FEET_PER_MILE / spacing;
            Some([density, density * v * 3600.0 / FEET_PER_MILE])
        })
        .collect()
}

/// Flattened `density, flow` pairs for plotting.
#[wasm_bindgen(js_name = fundamentalDiagram)]
pub fn fundamental_diagram_js(desired_mph: f64, time_headway: f64, min_gap: f64, points: u32) -> Vec<f64> {
    fundamental_diagram(desired_mph, time_headway, min_gap, points as usize)
        .into_iter()
        .flatten()
        .collect()
}
