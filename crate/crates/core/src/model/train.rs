use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, cross_entropy, ClassifierGrads, Dataset, KFormClassifier, OptimizerKind, Split, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{Adam, Optimizer, Sgd};

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

impl MetricRecord {
    pub fn write_jsonl(records: &[MetricRecord], path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Mean loss, accuracy and confusion matrix over `indices`.
pub fn evaluate(model: &KFormClassifier, data: &Dataset, indices: &[usize]) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty split".into()));
    }
    let outcomes: Vec<(f64, usize, usize)> = indices
        .par_iter()
        .map(|&i| {
            let item = &data.items[i];
            let logits = model.logits(item)?;
            Ok((cross_entropy(&logits, item.label), item.label, argmax(&logits)))
        })
        .collect::<Result<_>>()?;
    let c = model.num_classes();
    let mut confusion = vec![vec![0; c]; c];
    let mut loss = 0.0;
    for &(l, truth, pred) in &outcomes {
        loss += l;
        confusion[truth][pred] += 1;
    }
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    let n = indices.len() as f64;
    Ok(Evaluation { accuracy: correct as f64 / n, loss: loss / n, confusion })
}

/// Readout vectors of every item followed by its label, one CSV row per
/// item under the header `r1,...,rl,label`.
pub fn write_representations_csv(model: &KFormClassifier, data: &Dataset, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = data.items.par_iter().map(|item| model.represent(item)).collect::<Result<_>>()?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let header: Vec<String> = (1..=model.form.num_forms()).map(|j| format!("r{j}")).chain(["label".into()]).collect();
    let mut text = header.join(",") + "\n";
    for (row, item) in rows.iter().zip(&data.items) {
        for v in row {
            text.push_str(&v.to_string());
            text.push(',');
        }
        text.push_str(&item.label.to_string());
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Multiplies the learning rate by `factor` once the monitored loss has not
/// improved by a relative `threshold` for more than `patience` epochs.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub min_lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauScheduler { factor, patience, threshold: 1e-4, min_lr, best: f64::INFINITY, bad_epochs: 0 }
    }

    /// Returns the learning rate to use next.
    pub fn step(&mut self, metric: f64, lr: f64) -> f64 {
        if metric < self.best * (1.0 - self.threshold) {
            self.best = metric;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.bad_epochs = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: KFormClassifier,
    pub history: Vec<MetricRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Builds a model from `cfg.seed` and trains it on `split.train`.
pub fn train(cfg: &TrainConfig, data: &Dataset, split: &Split) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = KFormClassifier::from_config(cfg, data.ambient_dim(), data.num_classes, &mut rng)?;
    train_model(model, cfg, data, split, &mut rng)
}

/// Minibatch training with early stopping on the validation loss. When the
/// validation split is empty the training loss is monitored instead.
pub fn train_model<R: Rng + ?Sized>(
    mut model: KFormClassifier,
    cfg: &TrainConfig,
    data: &Dataset,
    split: &Split,
    rng: &mut R,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.chain_dim() != model.form.k() {
        return Err(Error::DimensionMismatch(format!("{}-form model on {}-chains", model.form.k(), data.chain_dim())));
    }
    if split.train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let mut optimizer: Box<dyn Optimizer> = match cfg.optimizer {
        OptimizerKind::Adam => Box::new(Adam::new(cfg.lr)),
        OptimizerKind::Sgd => Box::new(Sgd { lr: cfg.lr }),
    };
    let mut scheduler = PlateauScheduler::new(cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    let mut history = Vec::new();
    let record = |history: &mut Vec<MetricRecord>, epoch, split: &str, loss, accuracy, lr| {
        history.push(MetricRecord { epoch, split: split.to_string(), loss, accuracy, lr })
    };

    let initial = evaluate(&model, data, &split.train)?;
    record(&mut history, 0, "train", initial.loss, initial.accuracy, cfg.lr);
    let mut monitored = initial.loss;
    if !split.val.is_empty() {
        let val = evaluate(&model, data, &split.val)?;
        record(&mut history, 0, "val", val.loss, val.accuracy, cfg.lr);
        monitored = val.loss;
    }
    let mut best = (model.clone(), 0, monitored);
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut stopped_early = false;
    let mut order = split.train.clone();

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        let lr = optimizer.learning_rate();
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, bool, ClassifierGrads)> = batch
                .par_iter()
                .map(|&i| {
                    let item = &data.items[i];
                    let (loss, logits, grads) = model.loss_and_grads(item)?;
                    Ok((loss, argmax(&logits) == item.label, grads))
                })
                .collect::<Result<_>>()?;
            let mut total = ClassifierGrads::zeros_like(&model);
            let mut batch_loss = 0.0;
            for (loss, hit, grads) in &results {
                batch_loss += loss;
                correct += usize::from(*hit);
                total.add_assign(grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, loss: batch_loss });
            }
            loss_sum += batch_loss;
            total.scale(1.0 / batch.len() as f64);
            let mut params = model.params();
            optimizer.step(&mut params, &total.flatten())?;
            model.set_params(&params)?;
        }
        let n = order.len() as f64;
        record(&mut history, epoch, "train", loss_sum / n, correct as f64 / n, lr);
        monitored = loss_sum / n;
        if !split.val.is_empty() {
            let val = evaluate(&model, data, &split.val)?;
            record(&mut history, epoch, "val", val.loss, val.accuracy, lr);
            monitored = val.loss;
        }
        if !monitored.is_finite() {
            return Err(Error::Divergence { epoch, loss: monitored });
        }
        if monitored < best.2 {
            best = (model.clone(), epoch, monitored);
            since_best = 0;
        } else {
            since_best += 1;
        }
        let next = scheduler.step(monitored, lr);
        optimizer.set_learning_rate(next);
        if since_best >= cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }
    let (model, best_epoch, best_val_loss) = best;
    Ok(TrainOutcome { model, history, best_epoch, best_val_loss, epochs_run, stopped_early })
}
