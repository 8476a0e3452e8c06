//! Experiment protocols: cross-dataset transfer, leave-one-category-out and
//! the JPEG robustness sweep.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    derive_seed, evaluate_samples, extract_samples, split_dataset, train_samples, DatasetManifest, Label, Metrics,
    Record, Sample, Split, SplitRatios, TrainConfig, TrainOutcome,
};
use crate::imaging::jpeg_recompress;
use crate::net::NetworkSpec;
use crate::parallel::WorkerPool;

/// Validation share carved out of the training records of a LOCO fold.
pub const LOCO_VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct CrossDatasetResult {
    pub training: TrainOutcome,
    pub metrics: Metrics,
}

/// Trains on every record of `train_manifest` (checkpoint chosen on training
/// accuracy) and evaluates on every record of `test_manifest`.
pub fn cross_dataset(
    train_manifest: &DatasetManifest,
    test_manifest: &DatasetManifest,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    pool: &WorkerPool,
) -> Result<CrossDatasetResult> {
    if train_manifest.is_empty() || test_manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let (train_set, report) = extract_samples(&train_manifest.records, &cfg.cooc, pool, Ok)?;
    let (test_set, _) = extract_samples(&test_manifest.records, &cfg.cooc, pool, Ok)?;
    let mut training = train_samples(&train_set, &[], spec, cfg, pool)?;
    training.extract_report = report;
    let metrics = evaluate_samples(&training.params, spec, &test_set, pool)?;
    Ok(CrossDatasetResult { training, metrics })
}

/// Record indices of one leave-one-category-out fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocoFold {
    pub category: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Holds out every GAN record of `category` plus an equally sized seeded
/// sample of real records (capped at half of all real records); everything
/// else trains.
pub fn loco_fold(manifest: &DatasetManifest, category: &str, seed: u64) -> LocoFold {
    let test_gan: Vec<usize> = (0..manifest.len())
        .filter(|&i| manifest.records[i].label == Label::Gan && manifest.records[i].category == category)
        .collect();
    let mut reals: Vec<usize> = (0..manifest.len())
        .filter(|&i| manifest.records[i].label == Label::Real)
        .collect();
    reals.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = test_gan.len().min(reals.len() / 2);
    let mut test: Vec<usize> = test_gan.into_iter().chain(reals[..take].iter().copied()).collect();
    test.sort_unstable();
    let train = (0..manifest.len()).filter(|i| test.binary_search(i).is_err()).collect();
    LocoFold {
        category: category.to_string(),
        train,
        test,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocoRow {
    pub category: String,
    pub accuracy: f64,
    pub test_gan: usize,
    pub test_real: usize,
    pub train_size: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocoTable {
    pub rows: Vec<LocoRow>,
    pub average: f64,
}

impl LocoTable {
    /// Two-line, tab-separated table: category names, then accuracies in percent.
    pub fn to_tsv(&self) -> String {
        let mut head = vec!["Method".to_string()];
        let mut vals = vec!["Proposed".to_string()];
        for r in &self.rows {
            head.push(r.category.clone());
            vals.push(format!("{:.2}", r.accuracy * 100.0));
        }
        head.push("Average".into());
        vals.push(format!("{:.2}", self.average * 100.0));
        format!("{}\n{}\n", head.join("\t"), vals.join("\t"))
    }
}

/// Leave-one-category-out over the GAN categories of `manifest`.
pub fn leave_one_category_out(
    manifest: &DatasetManifest,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    pool: &WorkerPool,
) -> Result<LocoTable> {
    let categories = manifest.categories(Label::Gan);
    if categories.len() < 2 {
        return Err(Error::SingleCategory);
    }
    let (all, report) = extract_samples(&manifest.records, &cfg.cooc, pool, Ok)?;
    // extraction keeps order and drops failures, so survivors line up with
    // the record indices missing from the report
    let failed: std::collections::HashSet<usize> = report.failures.iter().map(|f| f.index).collect();
    let mut by_record: Vec<Option<&Sample>> = vec![None; manifest.len()];
    for (i, s) in (0..manifest.len()).filter(|i| !failed.contains(i)).zip(&all) {
        by_record[i] = Some(s);
    }
    let mut rows = Vec::with_capacity(categories.len());
    for (k, category) in categories.iter().enumerate() {
        let fold = loco_fold(manifest, category, derive_seed(cfg.seed, 1000 + k as u64));
        let train_manifest = DatasetManifest {
            records: fold.train.iter().map(|&i| manifest.records[i].clone()).collect(),
        };
        let ratios = SplitRatios {
            train: 1.0 - LOCO_VAL_FRACTION,
            val: LOCO_VAL_FRACTION,
            test: 0.0,
        };
        let inner = split_dataset(&train_manifest, ratios, derive_seed(cfg.seed, 2000 + k as u64))?;
        // the floored split can leave a remainder in the (empty-ratio) test share; it trains
        let pick = |val: bool| -> Vec<Sample> {
            fold.train
                .iter()
                .zip(&inner.records)
                .filter(|(_, r)| (r.split == Split::Val) == val)
                .filter_map(|(&i, _)| by_record[i].cloned())
                .collect()
        };
        let (train_set, val_set) = (pick(false), pick(true));
        let test_set: Vec<Sample> = fold.test.iter().filter_map(|&i| by_record[i].cloned()).collect();
        log::info!(
            "held-out category {category}: {} train, {} val, {} test",
            train_set.len(),
            val_set.len(),
            test_set.len()
        );
        let outcome = train_samples(&train_set, &val_set, spec, cfg, pool)?;
        let metrics = evaluate_samples(&outcome.params, spec, &test_set, pool)?;
        rows.push(LocoRow {
            category: category.clone(),
            accuracy: metrics.accuracy,
            test_gan: test_set.iter().filter(|s| s.label == Label::Gan).count(),
            test_real: test_set.iter().filter(|s| s.label == Label::Real).count(),
            train_size: train_set.len() + val_set.len(),
            metrics,
        });
    }
    let average = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    Ok(LocoTable { rows, average })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JpegRobustness {
    /// Trained on original images, tested on recompressed test images.
    pub scenario_a: BTreeMap<u8, f64>,
    /// Trained and tested on images recompressed at the same quality.
    pub scenario_b: BTreeMap<u8, f64>,
    pub original_test_accuracy: f64,
}

/// Both JPEG scenarios over a split manifest.
pub fn jpeg_robustness(
    manifest: &DatasetManifest,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    qualities: &[u8],
    pool: &WorkerPool,
) -> Result<JpegRobustness> {
    if let Some(&q) = qualities.iter().find(|q| !(1..=100).contains(*q)) {
        return Err(Error::InvalidQuality(q));
    }
    let recs = |s: Split| -> Result<Vec<Record>> {
        let r = manifest.in_split(s);
        if r.is_empty() {
            return Err(Error::EmptySplit(s.to_string()));
        }
        Ok(r)
    };
    let (train_recs, val_recs, test_recs) = (recs(Split::Train)?, manifest.in_split(Split::Val), recs(Split::Test)?);

    let (train_orig, _) = extract_samples(&train_recs, &cfg.cooc, pool, Ok)?;
    let (val_orig, _) = extract_samples(&val_recs, &cfg.cooc, pool, Ok)?;
    let (test_orig, _) = extract_samples(&test_recs, &cfg.cooc, pool, Ok)?;
    let baseline = train_samples(&train_orig, &val_orig, spec, cfg, pool)?;
    let original_test_accuracy = evaluate_samples(&baseline.params, spec, &test_orig, pool)?.accuracy;

    let mut scenario_a = BTreeMap::new();
    let mut scenario_b = BTreeMap::new();
    for &q in qualities {
        let recompress = move |img| jpeg_recompress(&img, q);
        let (test_q, _) = extract_samples(&test_recs, &cfg.cooc, pool, recompress)?;
        let acc_a = evaluate_samples(&baseline.params, spec, &test_q, pool)?.accuracy;
        let (train_q, _) = extract_samples(&train_recs, &cfg.cooc, pool, recompress)?;
        let (val_q, _) = extract_samples(&val_recs, &cfg.cooc, pool, recompress)?;
        let retrained = train_samples(&train_q, &val_q, spec, cfg, pool)?;
        let acc_b = evaluate_samples(&retrained.params, spec, &test_q, pool)?.accuracy;
        log::info!("quality {q}: trained on originals {acc_a:.4}, trained on recompressed {acc_b:.4}");
        scenario_a.insert(q, acc_a);
        scenario_b.insert(q, acc_b);
    }
    Ok(JpegRobustness {
        scenario_a,
        scenario_b,
        original_test_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> DatasetManifest {
        let mut records = Vec::new();
        for (label, cat, n) in [(Label::Real, "r", 10usize), (Label::Gan, "a", 3), (Label::Gan, "b", 4)] {
            for i in 0..n {
                records.push(Record {
                    path: format!("{label}/{cat}/{i}.png").into(),
                    label,
                    category: cat.into(),
                    split: Split::Unassigned,
                });
            }
        }
        DatasetManifest::new(records).unwrap()
    }

    #[test]
    fn fold_partitions_records() {
        let m = manifest();
        for cat in ["a", "b"] {
            let fold = loco_fold(&m, cat, 5);
            let mut all: Vec<usize> = fold.train.iter().chain(&fold.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..m.len()).collect::<Vec<_>>());
            assert!(fold.train.iter().all(|i| !fold.test.contains(i)));
            assert!(fold.train.iter().all(|&i| m.records[i].category != cat));
            let test_gan = fold.test.iter().filter(|&&i| m.records[i].label == Label::Gan).count();
            let test_real = fold.test.len() - test_gan;
            assert_eq!(test_gan, m.records.iter().filter(|r| r.category == cat).count());
            assert_eq!(test_real, test_gan);
        }
    }

    #[test]
    fn single_category_is_rejected() {
        let mut m = manifest();
        m.records.retain(|r| r.category != "b");
        let spec = NetworkSpec::standard(8);
        let cfg = TrainConfig {
            cooc: crate::cooc::CoOccConfig::with_bins(8),
            ..TrainConfig::default()
        };
        assert!(matches!(
            leave_one_category_out(&m, &spec, &cfg, &WorkerPool::sequential()),
            Err(Error::SingleCategory)
        ));
    }

    #[test]
    fn tsv_average_is_row_mean() {
        let row = |c: &str, a: f64| LocoRow {
            category: c.into(),
            accuracy: a,
            test_gan: 1,
            test_real: 1,
            train_size: 1,
            metrics: Metrics::from_predictions(&[]),
        };
        let rows = vec![row("x", 0.9), row("y", 0.7)];
        let table = LocoTable {
            average: rows.iter().map(|r| r.accuracy).sum::<f64>() / 2.0,
            rows,
        };
        assert!((table.average - 0.8).abs() < 1e-12);
        assert_eq!(table.to_tsv(), "Method\tx\ty\tAverage\nProposed\t90.00\t70.00\t80.00\n");
    }
}
