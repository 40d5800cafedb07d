//! Minibatch training with per-epoch learning curves.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{merge_shuffle_split, Dataset, Label};
use crate::error::{Error, Result};
use crate::metrics::Scored;
use crate::nn::{predicted_class, softmax, softmax_cross_entropy, Matrix, MlpModel, Mode, DEFAULT_DIMS, DEFAULT_DROPOUT};
use crate::optim::{Optimizer, OptimizerConfig, OptimizerKind};
use crate::vectorizer::{vectorize_rows, VECTOR_DIM};

/// Rows evaluated per forward pass when scoring a whole set.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_ratio: f64,
    /// Fraction of the merged corpus used for training by [`train_split`].
    pub train_fraction: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Worker threads for vectorization; 0 runs on the calling thread.
    pub threads: usize,
}

impl TrainConfig {
    /// Minibatch 100, 20 epochs, dropout 0.75, 80/20 split, Adam.
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            batch_size: 100,
            epochs: 20,
            dropout_ratio: DEFAULT_DROPOUT,
            train_fraction: 0.8,
            optimizer: OptimizerConfig::default_for(OptimizerKind::Adam),
            seed,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_ratio) {
            return Err(Error::InvalidInput(format!(
                "dropout ratio {} is outside [0, 1)",
                self.dropout_ratio
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "train fraction {} is outside (0, 1)",
                self.train_fraction
            )));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Wall-clock time of the epoch, evaluation included.
    pub seconds: f64,
    /// Optimizer steps taken during the epoch.
    pub steps: usize,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,val_loss,val_acc,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.epoch, self.train_loss, self.train_accuracy, self.val_loss, self.val_accuracy, self.seconds
        )
    }
}

/// Vectors of a dataset, cached once, with class indices.
#[derive(Debug, Clone)]
pub struct VectorSet {
    rows: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl VectorSet {
    pub fn from_dataset(d: &Dataset, threads: usize) -> Result<Self> {
        let rows = vectorize_rows(&d.urls(), threads)?;
        Ok(VectorSet {
            rows,
            labels: d.labels(),
            dim: VECTOR_DIM,
        })
    }

    /// Arbitrary pre-computed feature rows, e.g. for toy-sized models.
    pub fn from_rows(rows: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || rows.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                context: "vector set rows",
                expected: labels.len() * dim,
                found: rows.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad as i64));
        }
        Ok(VectorSet { rows, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let batch = Matrix::from_vec(indices.len(), self.dim, data).expect("gathered rows match dim");
        (batch, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Eval-mode logits for every row of the set, in order.
pub fn logits_for(model: &MlpModel, set: &VectorSet) -> Result<Matrix> {
    let mut out = Vec::with_capacity(set.len() * 2);
    let mut cols = 0;
    for start in (0..set.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(set.len());
        let batch = Matrix::from_vec(
            end - start,
            set.dim,
            set.rows[start * set.dim..end * set.dim].to_vec(),
        )?;
        let logits = model.logits(&batch)?;
        cols = logits.cols();
        out.extend(logits.into_vec());
    }
    Matrix::from_vec(set.len(), cols, out)
}

/// Mean cross-entropy and accuracy of the model on a vector set (eval mode).
/// A sample counts as correct when [`predicted_class`] equals its label, so
/// equal logits count as benign.
pub fn evaluate_vectors(model: &MlpModel, set: &VectorSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on an empty set"));
    }
    let logits = logits_for(model, set)?;
    let (loss, _) = softmax_cross_entropy(&logits, &set.labels)?;
    let correct = (0..set.len())
        .filter(|&r| predicted_class(logits.row(r)) == set.labels[r])
        .count();
    Ok((loss, correct as f64 / set.len() as f64))
}

/// `(p_malicious, label)` for every row of the set, eval mode.
pub fn score(model: &MlpModel, set: &VectorSet) -> Result<Vec<Scored>> {
    let logits = logits_for(model, set)?;
    (0..set.len())
        .map(|r| {
            let p = softmax(logits.row(r));
            Ok((p[1], Label::from_index(set.labels[r] as i64)?))
        })
        .collect()
}

pub fn evaluate_on(model: &MlpModel, d: &Dataset) -> Result<(f64, f64)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on an empty dataset"));
    }
    evaluate_vectors(model, &VectorSet::from_dataset(d, 0)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
}

pub fn train(config: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainOutcome> {
    train_observed(config, train_set, val_set, |_| {})
}

/// Like [`train`], calling `on_epoch` after each epoch's record is complete.
pub fn train_observed(
    config: &TrainConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set is empty"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty"));
    }
    let train_vecs = VectorSet::from_dataset(train_set, config.threads)?;
    let val_vecs = VectorSet::from_dataset(val_set, config.threads)?;
    let model = MlpModel::init_with_dims(DEFAULT_DIMS, config.seed);
    train_vectors(config, model, &train_vecs, &val_vecs, on_epoch)
}

/// Merges the two class datasets, splits them by `config.train_fraction`
/// and trains.
pub fn train_split(config: &TrainConfig, black: &Dataset, white: &Dataset) -> Result<(TrainOutcome, Dataset, Dataset)> {
    let (train_set, val_set) = merge_shuffle_split(black, white, config.train_fraction, config.seed)?;
    let outcome = train(config, &train_set, &val_set)?;
    Ok((outcome, train_set, val_set))
}

/// The training loop over pre-computed vectors, starting from `model`.
///
/// Each epoch reshuffles the training rows, runs every minibatch (the last
/// one may be short) through a train-mode forward pass, the loss, the
/// backward pass and one optimizer step, then scores both sets in eval mode.
pub fn train_vectors(
    config: &TrainConfig,
    model: MlpModel,
    train_vecs: &VectorSet,
    val_vecs: &VectorSet,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_vecs.is_empty() {
        return Err(Error::EmptyDataset("training set is empty"));
    }
    if val_vecs.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty"));
    }
    let mut model = model.with_dropout(config.dropout_ratio)?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..train_vecs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut steps = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (batch, labels) = train_vecs.gather(chunk);
            let trace = model.forward(&batch, Mode::Train(&mut rng))?;
            let (loss, dlogits) = softmax_cross_entropy(&trace.logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b + 1 });
            }
            let grads = model.backward(&trace, &dlogits)?;
            optimizer
                .step(&mut model.parameters_mut(), &grads.slices())
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Divergence { epoch, batch: b + 1 },
                    other => other,
                })?;
            steps += 1;
        }

        let (train_loss, train_accuracy) = evaluate_vectors(&model, train_vecs)?;
        let (val_loss, val_accuracy) = evaluate_vectors(&model, val_vecs)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: steps });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            seconds: started.elapsed().as_secs_f64(),
            steps,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome { model, history })
}
