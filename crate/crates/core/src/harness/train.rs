//! Adam training with a seeded validation split and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, TimeSeries};
use crate::error::{Error, Result};
use crate::harness::eval::{evaluate_logits, Evaluation, EVAL_BATCH};
use crate::model::{extract_features, FeatureSet, PhaserModel};
use crate::nn::{Adam, Mode, Tape};

pub const DEFAULT_SEEDS: [u64; 3] = [2711, 2712, 2713];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 150,
            batch_size: 32,
            validation_fraction: 0.2,
            patience: 15,
            seed: DEFAULT_SEEDS[0],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(1e-5..=1e-3).contains(&self.learning_rate) {
            return bad(format!("learning_rate {} outside [1e-5, 1e-3]", self.learning_rate));
        }
        if self.max_epochs > 150 {
            return bad(format!("max_epochs {} exceeds 150", self.max_epochs));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction {} outside (0, 1)", self.validation_fraction));
        }
        if self.patience == 0 {
            return bad("patience must be positive".into());
        }
        Ok(())
    }
}

/// Samples and labels only: the trainer has no access to domain ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<TimeSeries>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn as_dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::new("train", self.samples.clone(), self.labels.clone(), None, self.num_classes)
    }
}

impl From<&LabeledDataset> for TrainingSet {
    fn from(ds: &LabeledDataset) -> Self {
        Self {
            samples: ds.samples().to_vec(),
            labels: ds.labels().to_vec(),
            num_classes: ds.num_classes(),
        }
    }
}

/// Seeded unstratified partition into `(train, validation)` index lists.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64 * fraction).round() as usize).clamp(usize::from(n >= 2), n.saturating_sub(1));
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the lowest validation loss.
    pub model: PhaserModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Validation metrics of the checkpoint; `None` when no epoch ran.
    pub validation: Option<Evaluation>,
}

fn eval_features(model: &mut PhaserModel, feats: &FeatureSet, idx: &[usize], labels: &[usize]) -> Result<Evaluation> {
    let mut logits = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        let (m, p) = feats.batch(chunk);
        let l = model.logits(&m, &p, Mode::Eval)?;
        let k = l.shape()[1];
        logits.extend(l.data().chunks(k).map(<[f64]>::to_vec));
    }
    let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    evaluate_logits(&logits, &ys, model.cfg.num_classes)
}

fn divergence_dump(model: &PhaserModel, loss: f64) -> String {
    let worst = model
        .params
        .iter()
        .map(|(_, p)| {
            let norm = p.value.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            (p.name.clone(), norm)
        })
        .fold((String::new(), 0.0f64), |a, b| if !(b.1 <= a.1) { b } else { a });
    format!("loss={loss}, largest parameter norm {}={}", worst.0, worst.1)
}

pub fn train(mut model: PhaserModel, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.num_classes > model.cfg.num_classes {
        return Err(Error::InvalidArgument(format!(
            "data has {} classes, model predicts {}",
            data.num_classes, model.cfg.num_classes
        )));
    }
    if data.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 samples to train, got {}", data.len())));
    }
    if cfg.max_epochs == 0 {
        return Ok(TrainOutcome {
            model,
            history: Vec::new(),
            best_epoch: None,
            validation: None,
        });
    }
    let feats = extract_features(&model.cfg, &data.as_dataset()?)?;
    let (train_idx, val_idx) = validation_split(data.len(), cfg.validation_fraction, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order = train_idx.clone();
    let mut best: Option<(f64, usize, PhaserModel, Evaluation)> = None;
    let mut since_best = 0usize;
    let mut history = Vec::new();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let (m, p) = feats.batch(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &m, &p, Mode::Train)?;
            let loss = tape.cross_entropy(out.logits, &labels)?;
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    dump: divergence_dump(&model, lv),
                });
            }
            model.params.zero_grad();
            tape.backward(loss, &mut model.params)?;
            opt.step(&mut model.params);
            total += lv * chunk.len() as f64;
            seen += chunk.len();
        }
        let val = eval_features(&mut model, &feats, &val_idx, &data.labels)?;
        if !val.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: usize::MAX,
                dump: divergence_dump(&model, val.loss),
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: total / seen.max(1) as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
        });
        if best.as_ref().is_none_or(|b| val.loss < b.0) {
            best = Some((val.loss, epoch, model.clone(), val));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, model, validation) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: Some(best_epoch),
        validation: Some(validation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let (tr, va) = validation_split(50, 0.2, 3);
        assert_eq!(va.len(), 10);
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn config_bounds() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            max_epochs: 151,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            learning_rate: 1e-2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
