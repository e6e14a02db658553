use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_mae, Adam, MlpModel};
use crate::error::{Error, Result};
use crate::features::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 1000,
            patience: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Output-layer retraining: learning rate 1e-4, patience 1.
    pub fn fine_tune_default() -> Self {
        Self {
            learning_rate: 0.0001,
            patience: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size, patience and max_epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch losses in transformed units. Epochs are numbered from 1;
/// epoch 0 stands for the weights the run started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_val_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainTrace {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss
            .iter()
            .copied()
            .fold(self.initial_val_loss, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Stops once the monitored loss has gone `patience` consecutive epochs
/// without a strict improvement on the best value seen.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Starts with `loss` recorded as epoch 0.
    pub fn with_baseline(patience: usize, loss: f64) -> Self {
        Self {
            best: loss,
            ..Self::new(patience)
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::NoImprovement
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Mini-batch Adam on MAE with per-epoch reshuffling and early stopping on
/// validation MAE. Returns the best-validation weights.
pub fn train(
    model: &MlpModel,
    train_set: &SampleSet,
    val_set: &SampleSet,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainTrace)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    for set in [train_set, val_set] {
        if set.input_dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                got: set.input_dim(),
            });
        }
        if set.targets.ncols() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.output_dim(),
                got: set.targets.ncols(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut work = model.clone();
    let mut adam = Adam::new(
        &work,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let val_loss = |m: &MlpModel| batch_mae(m, val_set.inputs.view(), val_set.targets.view());

    let initial = val_loss(&work)?;
    let mut stopper = EarlyStopping::with_baseline(config.patience, initial);
    let mut best = work.clone();
    let mut trace = TrainTrace {
        initial_val_loss: initial,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = train_set.inputs.select(Axis(0), batch);
            let y = train_set.targets.select(Axis(0), batch);
            let (loss, grads) = work.loss_and_gradients(x.view(), y.view())?;
            adam.step(&mut work, &grads);
            epoch_loss += loss * batch.len() as f64;
        }
        trace.train_loss.push(epoch_loss / train_set.len() as f64);
        let v = val_loss(&work)?;
        trace.val_loss.push(v);
        trace.stopped_epoch = epoch;
        match stopper.observe(epoch, v) {
            StopDecision::Improved => best = work.clone(),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => break,
        }
    }
    trace.best_epoch = stopper.best_epoch();
    Ok((best, trace))
}

/// Retrains only the output layer; hidden layers stay bit-identical.
pub fn fine_tune(
    model: &MlpModel,
    target_train: &SampleSet,
    target_val: &SampleSet,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainTrace)> {
    let mut frozen = model.clone();
    frozen.freeze_hidden();
    train(&frozen, target_train, target_val, config)
}
