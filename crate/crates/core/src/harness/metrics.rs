use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::Label;

/// Confusion counts with GAN as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Gan, Label::Gan) => self.tp += 1,
            (Label::Real, Label::Real) => self.tn += 1,
            (Label::Real, Label::Gan) => self.fp += 1,
            (Label::Gan, Label::Real) => self.fn_ += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub total: u64,
    pub confusion: Confusion,
    pub mean_loss: f64,
    pub per_category: BTreeMap<String, f64>,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
}

/// One scored example.
#[derive(Debug, Clone)]
pub struct Prediction<'a> {
    pub probability: f64,
    pub label: Label,
    pub category: &'a str,
}

impl Metrics {
    /// Thresholded metrics; `p >= 0.5` is classified as GAN.
    pub fn from_predictions(preds: &[Prediction<'_>]) -> Self {
        let mut confusion = Confusion::default();
        let mut loss = 0.0;
        let mut cats: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for p in preds {
            let predicted = Label::from_probability(p.probability);
            confusion.record(p.label, predicted);
            loss += crate::net::bce_loss(p.probability, p.label.target());
            let e = cats.entry(p.category.to_string()).or_default();
            e.0 += (predicted == p.label) as u64;
            e.1 += 1;
        }
        let total = confusion.total();
        Self {
            accuracy: if total == 0 {
                0.0
            } else {
                confusion.correct() as f64 / total as f64
            },
            total,
            confusion,
            mean_loss: if total == 0 { 0.0 } else { loss / total as f64 },
            per_category: cats.into_iter().map(|(k, (ok, n))| (k, ok as f64 / n as f64)).collect(),
            history: Vec::new(),
        }
    }

    /// Epoch history as CSV with a header row.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for h in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                h.epoch, h.train_loss, h.train_acc, h.val_loss, h.val_acc
            ));
        }
        out
    }
}
