use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::policy::{PolicyConfig, TangoModel, TrainSequence};
use crate::{derive_seed, rng_from_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
    pub policy: PolicyConfig,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self { epochs: 200, patience: 20, lr: 5e-4, seed: 0, policy: PolicyConfig::default() }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.epochs > 200 {
            return Err(Error::Config("epochs must lie in 1..=200".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        self.policy.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub curve: Vec<EpochLog>,
}

/// Encodes every demonstration of `corpus` for training.
pub fn sequences(corpus: &Corpus, table: &EmbeddingTable) -> Result<Vec<TrainSequence>> {
    corpus.demos.iter().map(|d| TrainSequence::build(&d.states(), &d.actions(), &d.goal, table)).collect()
}

/// Teacher-forced action accuracy and mean loss of `model` on encoded
/// demonstrations.
fn score(model: &TangoModel, corpus: &Corpus, seqs: &[TrainSequence]) -> Result<(f64, f64)> {
    let (mut hits, mut total, mut loss) = (0usize, 0usize, 0.0);
    for (d, seq) in corpus.demos.iter().zip(seqs) {
        let predicted = model.teacher_forced(seq)?;
        hits += predicted.iter().zip(&d.steps).filter(|(p, s)| **p == s.action).count();
        total += d.steps.len();
        loss += model.sequence_loss_value(seq)?;
    }
    if total == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((hits as f64 / total as f64, loss / seqs.len() as f64))
}

/// Imitation training, one demonstration per Adam step, with early stopping
/// on validation action accuracy (ties broken by validation loss). An empty
/// validation corpus falls back to the training corpus. Returns the best
/// model seen.
pub fn train(
    spec: &TrainSpec,
    train_set: &Corpus,
    val: &Corpus,
    table: &EmbeddingTable,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(TangoModel, TrainReport)> {
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training corpus".into()));
    }
    let mut model = TangoModel::new(spec.policy.clone(), derive_seed(spec.seed, 0))?;
    let seqs = sequences(train_set, table)?;
    let (val_corpus, val_seqs) = if val.is_empty() { (train_set, seqs.clone()) } else { (val, sequences(val, table)?) };
    let mut adam = AdamState::new(&model.params);
    adam.lr = spec.lr;
    let mut best = model.params.clone();
    let (mut best_acc, mut best_loss, mut best_epoch) = (f64::NEG_INFINITY, f64::INFINITY, 0);
    let mut curve = Vec::new();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut since = 0;
    for epoch in 1..=spec.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(derive_seed(spec.seed, epoch as u64)));
        let mut total = 0.0;
        for (step, &i) in order.iter().enumerate() {
            let (loss, grads) = match model.loss_and_grad(&seqs[i]) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch, step }),
                Err(e) => return Err(e),
            };
            if !grads.is_finite() {
                return Err(Error::Divergence { epoch, step });
            }
            total += loss;
            model.params.zero_grad();
            model.params.accumulate(&grads);
            adam.update(&mut model.params);
        }
        let (val_accuracy, val_loss) = score(&model, val_corpus, &val_seqs)?;
        let log = EpochLog { epoch, train_loss: total / seqs.len() as f64, val_loss, val_accuracy };
        on_epoch(&log);
        curve.push(log);
        let better = val_accuracy > best_acc || (val_accuracy == best_acc && val_loss < best_loss);
        if better {
            best_acc = val_accuracy;
            best_loss = val_loss;
            best_epoch = epoch;
            best = model.params.clone();
            since = 0;
        } else {
            since += 1;
            if since >= spec.patience {
                break;
            }
        }
    }
    model.params = best;
    let report = TrainReport { epochs_run: curve.len(), best_epoch, best_val_accuracy: best_acc, curve };
    Ok((model, report))
}
