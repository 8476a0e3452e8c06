use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{DatasetManifest, Label, Split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.25,
            test: 0.25,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split ratios must be in [0,1] and sum to 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Split sizes for `n` records: train and val are floored, test takes the
    /// remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

/// Number of real records to place in a split of `size`, keeping the real
/// fraction as close to the global one as the remaining pools allow.
fn real_share(size: usize, n_real: usize, n: usize, real_left: usize, gan_left: usize) -> usize {
    let ideal = size as f64 * n_real as f64 / n as f64;
    let lo = size.saturating_sub(gan_left);
    let hi = real_left.min(size);
    ((ideal + 0.5).floor() as usize).clamp(lo, hi)
}

/// Seeded, label-stratified assignment of every record to train/val/test.
pub fn split_dataset(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    ratios.validate()?;
    let n = manifest.len();
    if n == 0 {
        return Err(Error::EmptyManifest);
    }
    let (n_train, n_val, _) = ratios.sizes(n);
    let mut real: Vec<usize> = (0..n).filter(|&i| manifest.records[i].label == Label::Real).collect();
    let mut gan: Vec<usize> = (0..n).filter(|&i| manifest.records[i].label == Label::Gan).collect();
    let (n_real, n_gan) = (real.len(), gan.len());

    let real_train = real_share(n_train, n_real, n, n_real, n_gan);
    let gan_train = n_train - real_train;
    let real_val = real_share(n_val, n_real, n, n_real - real_train, n_gan - gan_train);
    let gan_val = n_val - real_val;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    real.shuffle(&mut rng);
    gan.shuffle(&mut rng);

    let mut out = manifest.clone();
    for (pool, n_tr, n_va) in [(&real, real_train, real_val), (&gan, gan_train, gan_val)] {
        for (pos, &i) in pool.iter().enumerate() {
            out.records[i].split = if pos < n_tr {
                Split::Train
            } else if pos < n_tr + n_va {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Record;
    use proptest::prelude::*;

    fn manifest(n_real: usize, n_gan: usize) -> DatasetManifest {
        let records = (0..n_real + n_gan)
            .map(|i| Record {
                path: format!("img{i:05}.png").into(),
                label: if i < n_real { Label::Real } else { Label::Gan },
                category: "c".into(),
                split: Split::Unassigned,
            })
            .collect();
        DatasetManifest::new(records).unwrap()
    }

    fn counts(m: &DatasetManifest, split: Split) -> (usize, usize) {
        let recs = m.in_split(split);
        let real = recs.iter().filter(|r| r.label == Label::Real).count();
        (recs.len(), real)
    }

    #[test]
    fn hundred_balanced() {
        let m = split_dataset(&manifest(50, 50), SplitRatios::default(), 7).unwrap();
        let (tr, tr_real) = counts(&m, Split::Train);
        let (va, va_real) = counts(&m, Split::Val);
        let (te, te_real) = counts(&m, Split::Test);
        assert_eq!((tr, va, te), (50, 25, 25));
        assert_eq!(tr_real, 25);
        assert!(va_real.abs_diff(12) <= 1 || va_real.abs_diff(13) <= 1);
        assert!(te_real.abs_diff(12) <= 1 || te_real.abs_diff(13) <= 1);
    }

    #[test]
    fn same_seed_same_assignment() {
        let base = manifest(40, 61);
        let a = split_dataset(&base, SplitRatios::default(), 3).unwrap();
        let b = split_dataset(&base, SplitRatios::default(), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, split_dataset(&base, SplitRatios::default(), 4).unwrap());
    }

    #[test]
    fn rounding_rule_at_full_scale() {
        assert_eq!(SplitRatios::default().sizes(36_302), (18_151, 9_075, 9_076));
        assert_eq!(SplitRatios::default().sizes(100), (50, 25, 25));
        assert_eq!(SplitRatios::default().sizes(1), (0, 0, 1));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            split_dataset(&DatasetManifest::default(), SplitRatios::default(), 0),
            Err(Error::EmptyManifest)
        ));
        let bad = SplitRatios {
            train: 0.6,
            val: 0.3,
            test: 0.3,
        };
        assert!(split_dataset(&manifest(2, 2), bad, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_stratification(n_real in 0usize..120, n_gan in 0usize..120, seed: u64) {
            prop_assume!(n_real + n_gan > 0);
            let base = manifest(n_real, n_gan);
            let m = split_dataset(&base, SplitRatios::default(), seed).unwrap();
            let n = base.len();
            let global = n_real as f64 / n as f64;
            let (a, b, c) = SplitRatios::default().sizes(n);
            for (split, size) in [(Split::Train, a), (Split::Val, b), (Split::Test, c)] {
                let (len, real) = counts(&m, split);
                prop_assert_eq!(len, size);
                if len > 0 {
                    let frac = real as f64 / len as f64;
                    prop_assert!((frac - global).abs() <= 1.0 / len as f64 + 1e-12);
                }
            }
            prop_assert!(m.records.iter().all(|r| r.split != Split::Unassigned));
            prop_assert_eq!(m.records.iter().map(|r| &r.path).collect::<Vec<_>>(),
                            base.records.iter().map(|r| &r.path).collect::<Vec<_>>());
        }
    }
}
