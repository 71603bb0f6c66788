use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use shockwave::microsim::SimConfig;
use shockwave::netcore::LossKind;
use shockwave::trainer::TrainOptions;

/// Pipeline settings, read from `--config` and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub trajectory_dir: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    pub render_dir: PathBuf,
    /// First run seed (run `k` uses `seed + k`); also seeds the split,
    /// the model initialisation and batch shuffling.
    pub seed: u64,
    pub runs: usize,
    pub phases: Phases,
    /// Train on at most this many randomly chosen pairs per run.
    pub pairs_per_run: Option<usize>,
    pub sim: SimConfig,
    pub training: TrainOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            trajectory_dir: "data/trajectories".into(),
            dataset: "data/dataset.tsds".into(),
            checkpoint: "data/model.tsck".into(),
            report: "data/report.json".into(),
            render_dir: "data/render".into(),
            seed: 0,
            runs: 1,
            phases: Phases::Both,
            pairs_per_run: None,
            sim: SimConfig::default(),
            training: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Phases {
    /// Custom loss, then plain MSE.
    Both,
    Custom,
    Mse,
}

impl Phases {
    pub fn losses(self) -> &'static [LossKind] {
        match self {
            Phases::Both => &[LossKind::Custom, LossKind::PlainMse],
            Phases::Custom => &[LossKind::Custom],
            Phases::Mse => &[LossKind::PlainMse],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("run count must be at least 1");
        }
        self.sim.validate()?;
        self.training.validate()?;
        Ok(())
    }
}

/// Creates the parent directory of `path` if needed.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}
