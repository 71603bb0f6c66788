use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderDecoder;
use crate::netcore::Tensor4;
use crate::tsgrid::{PairSource, DENSITY_SCALE_VPM};

/// Errors in averaged-matrix units and their density equivalents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub mse: f64,
    pub mae: f64,
    pub density_mse: f64,
    pub density_mae: f64,
    pub density_rmse: f64,
}

impl Metrics {
    pub fn from_matrix(mse: f64, mae: f64, samples: usize) -> Self {
        Self {
            samples,
            mse,
            mae,
            density_mse: DENSITY_SCALE_VPM * DENSITY_SCALE_VPM * mse,
            density_mae: DENSITY_SCALE_VPM * mae,
            density_rmse: DENSITY_SCALE_VPM * mse.sqrt(),
        }
    }
}

fn accumulate(
    indices: &[usize],
    dataset: &dyn PairSource,
    mut predict: impl FnMut(Vec<f32>) -> Result<Vec<f32>>,
) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(Error::Invalid("no samples to evaluate".into()));
    }
    let (mut se, mut ae, mut cells) = (0.0, 0.0, 0usize);
    for &i in indices {
        let (input, target) = dataset.read_pair(i)?;
        let pred = predict(input)?;
        for (p, t) in pred.iter().zip(&target) {
            let d = *p as f64 - *t as f64;
            se += d * d;
            ae += d.abs();
        }
        cells += target.len();
    }
    Ok(Metrics::from_matrix(se / cells as f64, ae / cells as f64, indices.len()))
}

/// Scores clamped model predictions against the targets.
pub fn evaluate(model: &EncoderDecoder<f32>, indices: &[usize], dataset: &dyn PairSource) -> Result<Metrics> {
    let dims = [1, 1, dataset.height(), dataset.width()];
    accumulate(indices, dataset, |input| {
        Ok(model.predict(&Tensor4::from_vec(dims, input)?)?.into_vec())
    })
}

/// Scores the prediction "target equals input".
pub fn baseline_persistence(indices: &[usize], dataset: &dyn PairSource) -> Result<Metrics> {
    accumulate(indices, dataset, Ok)
}

/// Fixed-order metrics table, one row per labelled record.
pub struct MetricsTable<'a>(pub Vec<(&'a str, Metrics)>);

impl fmt::Display for MetricsTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>8} {:>10} {:>10} {:>12} {:>12} {:>12}",
            "Model", "Samples", "MSE", "MAE", "MSE (vpm^2)", "MAE (vpm)", "RMSE (vpm)"
        )?;
        for (label, m) in &self.0 {
            writeln!(
                f,
                "{:<22} {:>8} {:>10.6} {:>10.6} {:>12.4} {:>12.4} {:>12.4}",
                label, m.samples, m.mse, m.mae, m.density_mse, m.density_mae, m.density_rmse
            )?;
        }
        Ok(())
    }
}
