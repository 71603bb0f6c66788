use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderDecoder;
use crate::netcore::{adam_step, mse, AdamState, LossKind, Tensor4, DEFAULT_LEARNING_RATE};
use crate::tsgrid::PairSource;

use super::metrics::{baseline_persistence, evaluate, Metrics};
use super::split::DatasetSplit;

pub const DEFAULT_BATCH_SIZE: usize = 60;
pub const DEFAULT_PATIENCE: usize = 5;
pub const MAX_EPOCHS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            patience: DEFAULT_PATIENCE,
            max_epochs: MAX_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size, patience and epoch cap must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Tracks the validation minimum. Epoch 0 is the untrained starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize, initial_loss: f64) -> Self {
        Self {
            patience,
            best_epoch: 0,
            best_loss: initial_loss,
        }
    }

    /// Records an epoch's validation loss; true on a new strict minimum.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        let improved = loss < self.best_loss;
        if improved {
            self.best_epoch = epoch;
            self.best_loss = loss;
        }
        improved
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch >= self.best_epoch + self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: LossKind,
    pub initial_validation_loss: f64,
    pub initial_validation_mse: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub best_validation_loss: f64,
    /// Plain validation MSE of the restored weights.
    pub best_validation_mse: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub options: TrainOptions,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub test_samples: usize,
    pub phases: Vec<PhaseReport>,
    pub test: Option<Metrics>,
    pub baseline: Option<Metrics>,
}

fn sample_tensor(dataset: &dyn PairSource, grid: Vec<f32>) -> Result<Tensor4<f32>> {
    Tensor4::from_vec([1, 1, dataset.height(), dataset.width()], grid)
}

/// One optimizer step on the mean loss of `batch`. Returns that mean.
pub fn train_step(
    model: &mut EncoderDecoder<f32>,
    optimizer: &mut AdamState<f32>,
    dataset: &dyn PairSource,
    batch: &[usize],
    loss: LossKind,
    position: (usize, usize),
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let (epoch, batch_index) = position;
    model.zero_grad();
    let mut total = 0.0;
    for &i in batch {
        let (input, target) = dataset.read_pair(i)?;
        let pred = model.forward_train(&sample_tensor(dataset, input)?)?;
        let (value, grad) = loss.value_and_grad(&pred, &sample_tensor(dataset, target)?)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: batch_index,
                value,
            });
        }
        model.backward(&grad)?;
        total += value;
    }
    model.scale_grads(1.0 / batch.len() as f64);
    let (mut params, grads) = model.param_groups_mut();
    adam_step(&mut params, &grads, optimizer)?;
    if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite {
            epoch,
            batch: batch_index,
            value: f64::NAN,
        });
    }
    Ok(total / batch.len() as f64)
}

/// Mean phase loss and mean plain MSE of raw outputs over `indices`.
pub fn validation_losses(
    model: &EncoderDecoder<f32>,
    dataset: &dyn PairSource,
    indices: &[usize],
    loss: LossKind,
) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::Invalid("empty validation set".into()));
    }
    let (mut phase, mut plain) = (0.0, 0.0);
    for &i in indices {
        let (input, target) = dataset.read_pair(i)?;
        let pred = model.forward(&sample_tensor(dataset, input)?)?;
        let target = sample_tensor(dataset, target)?;
        let m = mse(&pred, &target)?;
        phase += match loss {
            LossKind::PlainMse => m,
            LossKind::Custom => loss.value(&pred, &target)?,
        };
        plain += m;
    }
    let n = indices.len() as f64;
    Ok((phase / n, plain / n))
}

fn phase_tag(loss: LossKind) -> u64 {
    match loss {
        LossKind::Custom => 1,
        LossKind::PlainMse => 2,
    }
}

/// Trains with early stopping on `split.validation` and restores the best weights.
pub fn train_phase(
    model: &mut EncoderDecoder<f32>,
    dataset: &dyn PairSource,
    split: &DatasetSplit,
    loss: LossKind,
    options: &TrainOptions,
) -> Result<PhaseReport> {
    options.validate()?;
    if split.train.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let mut optimizer = AdamState::with_learning_rate(&model.group_sizes(), options.learning_rate);
    let (initial_loss, initial_mse) = validation_losses(model, dataset, &split.validation, loss)?;
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite {
            epoch: 0,
            batch: 0,
            value: initial_loss,
        });
    }
    log::info!("{loss:?}: initial validation loss {initial_loss:.6}");
    let mut stopper = EarlyStopping::new(options.patience, initial_loss);
    let mut best_params = model.flat_params();
    let mut best_mse = initial_mse;
    let mut epochs = Vec::new();
    let mut order = split.train.clone();
    let mut stop_epoch = 0;
    for epoch in 1..=options.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream((phase_tag(loss) << 32) | epoch as u64);
        order.copy_from_slice(&split.train);
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, batch) in order.chunks(options.batch_size).enumerate() {
            weighted += train_step(model, &mut optimizer, dataset, batch, loss, (epoch, b))? * batch.len() as f64;
        }
        let train_loss = weighted / order.len() as f64;
        let (validation_loss, validation_mse) = validation_losses(model, dataset, &split.validation, loss)?;
        if !validation_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                value: validation_loss,
            });
        }
        log::info!("{loss:?} epoch {epoch}: train {train_loss:.6}, validation {validation_loss:.6}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
            validation_mse,
        });
        if stopper.observe(epoch, validation_loss) {
            best_params = model.flat_params();
            best_mse = validation_mse;
        }
        stop_epoch = epoch;
        if stopper.should_stop(epoch) {
            break;
        }
    }
    model.set_flat_params(&best_params)?;
    log::info!(
        "{loss:?}: stopped at epoch {stop_epoch}, restored epoch {} ({:.6})",
        stopper.best_epoch,
        stopper.best_loss
    );
    Ok(PhaseReport {
        phase: loss,
        initial_validation_loss: initial_loss,
        initial_validation_mse: initial_mse,
        epochs,
        best_epoch: stopper.best_epoch,
        stop_epoch,
        best_validation_loss: stopper.best_loss,
        best_validation_mse: best_mse,
        steps: optimizer.step_count,
    })
}

/// Runs `phases` in order, each from the previous phase's restored weights
/// with fresh optimizer state, then scores the test split if it is nonempty.
pub fn train_phases(
    model: &mut EncoderDecoder<f32>,
    dataset: &dyn PairSource,
    split: &DatasetSplit,
    phases: &[LossKind],
    options: &TrainOptions,
) -> Result<TrainingReport> {
    let mut reports = Vec::with_capacity(phases.len());
    for &loss in phases {
        reports.push(train_phase(model, dataset, split, loss, options)?);
    }
    let (test, baseline) = if split.test.is_empty() {
        (None, None)
    } else {
        (
            Some(evaluate(model, &split.test, dataset)?),
            Some(baseline_persistence(&split.test, dataset)?),
        )
    };
    Ok(TrainingReport {
        options: *options,
        train_samples: split.train.len(),
        validation_samples: split.validation.len(),
        test_samples: split.test.len(),
        phases: reports,
        test,
        baseline,
    })
}

/// Custom-loss phase followed by a plain-MSE phase.
pub fn train_two_phase(
    model: &mut EncoderDecoder<f32>,
    dataset: &dyn PairSource,
    split: &DatasetSplit,
    options: &TrainOptions,
) -> Result<TrainingReport> {
    train_phases(model, dataset, split, &[LossKind::Custom, LossKind::PlainMse], options)
}
