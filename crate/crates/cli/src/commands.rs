use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use shockwave::microsim::{load_csv, run_simulation, save_csv, SimConfig};
use shockwave::model::{build_model, load_checkpoint, save_checkpoint, ModelCheckpoint, TrainingMetadata};
use shockwave::netcore::Tensor4;
use shockwave::trainer::{
    apply_assignment, baseline_persistence, evaluate as score, split_dataset, split_runs, subsample_per_run,
    train_phases, DatasetSplit, MetricsTable,
};
use shockwave::tsgrid::{for_each_sample_pair, render_heatmap, sidecar_path, PairSource, RunLayout, TsdsReader, TsdsWriter};

use crate::config::{ensure_parent, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Validation,
    Test,
    All,
}

pub fn run_csv_name(seed: u64) -> String {
    format!("run_{seed}.csv")
}

/// Writes through a temporary sibling so a failed command leaves no partial file.
fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    match write(&tmp) {
        Ok(()) => fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display())),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn simulate(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.trajectory_dir).with_context(|| format!("creating {}", cfg.trajectory_dir.display()))?;
    let mut failed = Vec::new();
    for k in 0..cfg.runs as u64 {
        let seed = cfg.seed + k;
        let sim = SimConfig {
            seed,
            ..cfg.sim.clone()
        };
        let out = match run_simulation(&sim) {
            Ok(out) => out,
            Err(e) => {
                log::error!("run {seed}: {e}");
                failed.push(seed);
                continue;
            }
        };
        let path = cfg.trajectory_dir.join(run_csv_name(seed));
        write_atomically(&path, |p| Ok(save_csv(&out.samples, p)?))?;
        log::info!(
            "run {seed}: {} mph limit, {:.0} veh/h/lane, {} vehicles, {} disturbances, {} samples -> {}",
            out.speed_limit_mph,
            out.inflow,
            out.vehicles,
            out.disturbances.len(),
            out.samples.len(),
            path.display()
        );
    }
    if !failed.is_empty() {
        bail!("{} of {} runs failed: {failed:?}", failed.len(), cfg.runs);
    }
    Ok(())
}

/// `run_<seed>.csv` files of `dir`, ordered by seed.
pub fn trajectory_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(seed) = name.strip_prefix("run_").and_then(|n| n.strip_suffix(".csv")) {
            if let Ok(seed) = seed.parse::<u64>() {
                files.push((seed, path));
            }
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no run_<seed>.csv files in {}", dir.display());
    }
    Ok(files)
}

pub fn build_dataset(cfg: &PipelineConfig) -> Result<()> {
    let files = trajectory_files(&cfg.trajectory_dir)?;
    let layout = RunLayout {
        road_length: cfg.sim.road_length,
        duration: cfg.sim.duration,
        lanes: cfg.sim.lanes,
    };
    ensure_parent(&cfg.dataset)?;
    let result = (|| -> Result<usize> {
        let mut writer = TsdsWriter::create(&cfg.dataset)?;
        let mut run_ids = Vec::new();
        for (_, path) in &files {
            let samples = load_csv(path)?;
            let n = for_each_sample_pair(&samples, &layout, |pair| writer.write_pair(&pair))
                .with_context(|| format!("pairing {}", path.display()))?;
            run_ids.extend(samples.first().map(|s| s.run_id));
            log::info!("{}: {n} pairs", path.display());
        }
        let split = if run_ids.len() >= 3 {
            Some(split_runs(&run_ids, cfg.seed)?)
        } else {
            log::warn!("{} run(s): too few for a train/validation/test split", run_ids.len());
            None
        };
        Ok(writer.finish(split)?.pairs.len())
    })();
    match result {
        Ok(n) => {
            log::info!("{n} pairs -> {}", cfg.dataset.display());
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&cfg.dataset);
            let _ = fs::remove_file(sidecar_path(&cfg.dataset));
            Err(e)
        }
    }
}

fn dataset_split(reader: &TsdsReader, seed: u64) -> Result<DatasetSplit> {
    Ok(match &reader.index().split {
        Some(runs) => apply_assignment(reader, runs)?,
        None => split_dataset(reader, seed)?,
    })
}

pub fn train(cfg: &PipelineConfig) -> Result<()> {
    let reader = TsdsReader::open(&cfg.dataset).with_context(|| format!("opening {}", cfg.dataset.display()))?;
    let mut split = dataset_split(&reader, cfg.seed)?;
    if let Some(n) = cfg.pairs_per_run {
        split = subsample_per_run(&split, &reader, n, cfg.seed);
    }
    log::info!(
        "{} train, {} validation, {} test pairs",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let mut model = build_model(cfg.seed)?;
    let report = train_phases(&mut model, &reader, &split, cfg.phases.losses(), &cfg.training)?;
    let last = report.phases.last().expect("at least one phase");
    let checkpoint = ModelCheckpoint {
        model,
        optimizer: None,
        metadata: Some(TrainingMetadata {
            epoch: last.best_epoch,
            phase: last.phase,
            validation_loss: last.best_validation_loss,
        }),
    };
    ensure_parent(&cfg.checkpoint)?;
    write_atomically(&cfg.checkpoint, |p| Ok(save_checkpoint(&checkpoint, p)?))?;
    ensure_parent(&cfg.report)?;
    write_atomically(&cfg.report, |p| Ok(fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?))?;
    if let (Some(test), Some(baseline)) = (report.test, report.baseline) {
        print!("{}", MetricsTable(vec![("Trained Model", test), ("Persistence Baseline", baseline)]));
    }
    log::info!("checkpoint -> {}, report -> {}", cfg.checkpoint.display(), cfg.report.display());
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig, which: SplitName) -> Result<()> {
    let reader = TsdsReader::open(&cfg.dataset).with_context(|| format!("opening {}", cfg.dataset.display()))?;
    let checkpoint =
        load_checkpoint(&cfg.checkpoint).with_context(|| format!("loading {}", cfg.checkpoint.display()))?;
    let indices = match which {
        SplitName::All => (0..reader.len()).collect(),
        _ => {
            let split = dataset_split(&reader, cfg.seed)?;
            match which {
                SplitName::Train => split.train,
                SplitName::Validation => split.validation,
                _ => split.test,
            }
        }
    };
    let model = score(&checkpoint.model, &indices, &reader)?;
    let baseline = baseline_persistence(&indices, &reader)?;
    print!("{}", MetricsTable(vec![("Trained Model", model), ("Persistence Baseline", baseline)]));
    Ok(())
}

pub fn predict(cfg: &PipelineConfig, index: usize) -> Result<()> {
    let reader = TsdsReader::open(&cfg.dataset).with_context(|| format!("opening {}", cfg.dataset.display()))?;
    if index >= reader.len() {
        bail!("pair index {index} out of range; dataset has {} pairs", reader.len());
    }
    let checkpoint =
        load_checkpoint(&cfg.checkpoint).with_context(|| format!("loading {}", cfg.checkpoint.display()))?;
    let (h, w) = (reader.height(), reader.width());
    let (input, target) = reader.read_pair(index)?;
    let prediction = checkpoint.model.predict(&Tensor4::from_vec([1, 1, h, w], input.clone())?)?;
    fs::create_dir_all(&cfg.render_dir).with_context(|| format!("creating {}", cfg.render_dir.display()))?;
    for (name, grid) in [("input", input), ("target", target), ("prediction", prediction.into_vec())] {
        let cells: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
        let path = cfg.render_dir.join(format!("pair_{index}_{name}.ppm"));
        render_heatmap(&cells, h, w, 1.0, &path)?;
        log::info!("{name} -> {}", path.display());
    }
    Ok(())
}
