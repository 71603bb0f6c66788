//! Time-space matrices: binning trajectories, sliding-mean averaging, Edie
//! density, supervised pairs, dataset files and heatmaps.

mod dataset;
mod edie;
mod heatmap;
mod matrix;
mod pairs;

pub use dataset::{
    sidecar_path, write_index, DatasetIndex, InMemoryDataset, PairMeta, PairSource, SplitAssignment, TsdsReader,
    TsdsWriter, TSDS_MAGIC, TSDS_VERSION,
};
pub use edie::{edie_density_oracle, EdieBlock};
pub use heatmap::{colormap, heatmap_rgb, parse_ppm, ppm_bytes, render_heatmap, Heatmap, HIGH_COLOR, LOW_COLOR};
pub use matrix::{
    average_matrix, build_time_space_matrix, to_density, AveragedTimeSpaceMatrix, DensityMatrix, GridOrigin,
    TimeSpaceMatrix, AVERAGING_WINDOW, COLS, DENSITY_SCALE_VPM, FEET_PER_MILE, ROWS, SPACE_BIN_FT, TIME_BIN_S,
};
pub use pairs::{extract_sample_pairs, for_each_sample_pair, lane_matrices, RunLayout, SamplePair, SEGMENT_FT, WINDOW_S};
