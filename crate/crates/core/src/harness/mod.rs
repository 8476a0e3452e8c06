//! Dataset handling, training and the evaluation protocols.

mod manifest;
mod metrics;
mod protocols;
mod report;
mod split;
mod train;

pub use manifest::{build_manifest, DatasetManifest, Label, LabelingRule, Record, Split, UNCATEGORIZED};
pub use metrics::{Confusion, EpochRecord, Metrics, Prediction};
pub use protocols::{
    cross_dataset, jpeg_robustness, leave_one_category_out, loco_fold, CrossDatasetResult, JpegRobustness, LocoFold,
    LocoRow, LocoTable, LOCO_VAL_FRACTION,
};
pub use report::{write_report, Report, RunMetadata};
pub use split::{split_dataset, SplitRatios};
pub use train::{evaluate, evaluate_samples, extract_samples, train, train_samples, Sample, TrainConfig, TrainOutcome};

/// Mixes a base seed with a tag (splitmix64 finalizer) for independent streams.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
