use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooc::{batch_extract_with, CoOccConfig, ExtractReport};
use crate::error::{Error, Result};
use crate::harness::{derive_seed, DatasetManifest, EpochRecord, Label, Metrics, Prediction, Record, Split};
use crate::imaging::PixelImage;
use crate::net::{
    adam_step, batch_gradient, init_params, predict_many, AdamConfig, ModelParams, NetworkSpec, OptimizerState, Tensor,
};
use crate::parallel::WorkerPool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub cooc: CoOccConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 40,
            seed: 0,
            optimizer: AdamConfig::default(),
            cooc: CoOccConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be at least 1".into()));
        }
        self.optimizer.validate()?;
        self.cooc.validate()
    }
}

/// A featurized example ready for the network.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Tensor<f32>,
    pub label: Label,
    pub category: String,
}

/// Best-validation model and its metrics. `metrics.history` holds every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub best_epoch: usize,
    pub metrics: Metrics,
    pub extract_report: ExtractReport,
}

/// Loads and featurizes records, optionally transforming each decoded image.
pub fn extract_samples<F>(
    records: &[Record],
    cooc: &CoOccConfig,
    pool: &WorkerPool,
    transform: F,
) -> Result<(Vec<Sample>, ExtractReport)>
where
    F: Fn(PixelImage) -> Result<PixelImage> + Sync,
{
    let (extracted, report) = batch_extract_with(records, cooc, pool, transform)?;
    let samples = extracted
        .into_iter()
        .map(|e| Sample {
            input: e.tensor.to_input(),
            label: e.label,
            category: records[e.index].category.clone(),
        })
        .collect();
    Ok((samples, report))
}

/// Scores `samples` with threshold 0.5.
pub fn evaluate_samples(
    params: &ModelParams<f32>,
    spec: &NetworkSpec,
    samples: &[Sample],
    pool: &WorkerPool,
) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("evaluation".into()));
    }
    let inputs: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.input).collect();
    let probs = predict_many(params, spec, &inputs, pool)?;
    let preds: Vec<Prediction<'_>> = samples
        .iter()
        .zip(&probs)
        .map(|(s, &p)| Prediction {
            probability: p as f64,
            label: s.label,
            category: &s.category,
        })
        .collect();
    Ok(Metrics::from_predictions(&preds))
}

/// Mini-batch training with per-epoch reshuffling. After every epoch the
/// model is scored on `val` (or on `train` when `val` is empty) and the
/// best-scoring parameters are kept.
pub fn train_samples(
    train: &[Sample],
    val: &[Sample],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    pool: &WorkerPool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate_classifier()?;
    spec.ensure_bins(cfg.cooc.bins)?;
    if train.is_empty() {
        return Err(Error::EmptySplit(Split::Train.to_string()));
    }
    let selection = if val.is_empty() {
        log::warn!("no validation records; selecting the checkpoint on training accuracy");
        train
    } else {
        val
    };
    let mut params = init_params::<f32>(spec, cfg.seed)?;
    let mut state = OptimizerState::new(&params, cfg.optimizer);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, ModelParams<f32>, Metrics)> = None;

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Tensor<f32>, f64)> = chunk
                .iter()
                .map(|&i| (&train[i].input, train[i].label.target()))
                .collect();
            let bg = batch_gradient(&params, spec, &batch, pool)?;
            adam_step(&mut params, &bg.grads, &mut state)?;
            loss_sum += bg.losses.iter().sum::<f64>();
            correct += chunk
                .iter()
                .zip(&bg.predictions)
                .filter(|(&i, &p)| Label::from_probability(p as f64) == train[i].label)
                .count();
        }
        let val_metrics = evaluate_samples(&params, spec, selection, pool)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_loss: val_metrics.mean_loss,
            val_acc: val_metrics.accuracy,
        };
        log::info!(
            "epoch {}/{}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
            epoch + 1,
            cfg.epochs,
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        history.push(record);
        if best.as_ref().is_none_or(|(_, _, m)| val_metrics.accuracy > m.accuracy) {
            best = Some((epoch, params.clone(), val_metrics));
        }
    }
    let (best_epoch, params, mut metrics) = best.expect("at least one epoch");
    metrics.history = history;
    Ok(TrainOutcome {
        params,
        best_epoch,
        metrics,
        extract_report: ExtractReport::default(),
    })
}

/// Trains on the manifest's train split, selecting on its val split.
pub fn train(
    manifest: &DatasetManifest,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    pool: &WorkerPool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_recs = manifest.in_split(Split::Train);
    let val_recs = manifest.in_split(Split::Val);
    if train_recs.is_empty() {
        return Err(Error::EmptySplit(Split::Train.to_string()));
    }
    let (train_set, mut report) = extract_samples(&train_recs, &cfg.cooc, pool, Ok)?;
    let (val_set, val_report) = extract_samples(&val_recs, &cfg.cooc, pool, Ok)?;
    report.failures.extend(val_report.failures);
    if !report.is_clean() {
        log::warn!(
            "{} images could not be featurized and were skipped",
            report.failures.len()
        );
    }
    let mut outcome = train_samples(&train_set, &val_set, spec, cfg, pool)?;
    outcome.extract_report = report;
    Ok(outcome)
}

/// Scores a checkpoint on one split of a manifest.
pub fn evaluate(
    params: &ModelParams<f32>,
    spec: &NetworkSpec,
    manifest: &DatasetManifest,
    split: Split,
    cooc: &CoOccConfig,
    pool: &WorkerPool,
) -> Result<Metrics> {
    spec.ensure_bins(cooc.bins)?;
    let recs = manifest.in_split(split);
    if recs.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    let (samples, _) = extract_samples(&recs, cooc, pool, Ok)?;
    evaluate_samples(params, spec, &samples, pool)
}
