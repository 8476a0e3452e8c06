mod common;

use coocnet::cooc::{cooccur_raw, cooccur_tensor, CoOccConfig, Offset};
use coocnet::imaging::PixelImage;
use proptest::prelude::*;

fn cfg(dy: i32, dx: i32, symmetric: bool, bins: usize) -> CoOccConfig {
    CoOccConfig {
        offset: Offset::new(dy, dx),
        symmetric,
        ..CoOccConfig::with_bins(bins)
    }
}

#[test]
fn matches_naive_oracle_for_all_small_offsets() {
    let mut rng = common::rng(1);
    for _ in 0..40 {
        let img = common::random_image(&mut rng, 16, 16);
        for dy in -2..=2 {
            for dx in -2..=2 {
                if dy == 0 && dx == 0 {
                    continue;
                }
                for symmetric in [false, true] {
                    let raw = cooccur_raw(&img, &cfg(dy, dx, symmetric, 256)).unwrap();
                    for c in 0..3 {
                        assert_eq!(
                            raw.channel(c),
                            common::naive_cooccurrence(&img, c, dy, dx, symmetric, 256)
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn channel_sum_for_32x32() {
    let mut rng = common::rng(2);
    let img = common::random_image(&mut rng, 32, 32);
    let raw = cooccur_raw(&img, &CoOccConfig::default()).unwrap();
    for c in 0..3 {
        assert_eq!(raw.channel(c).iter().sum::<u64>(), 32 * 31);
    }
}

#[test]
fn symmetric_is_asymmetric_plus_transpose() {
    let mut rng = common::rng(3);
    let img = common::random_image(&mut rng, 24, 19);
    for bins in [16, 64, 256] {
        let a = cooccur_raw(&img, &cfg(1, -1, false, bins)).unwrap();
        let s = cooccur_raw(&img, &cfg(1, -1, true, bins)).unwrap();
        for c in 0..3 {
            let (a, s) = (a.channel(c), s.channel(c));
            for i in 0..bins {
                for j in 0..bins {
                    assert_eq!(s[i * bins + j], a[i * bins + j] + a[j * bins + i]);
                }
            }
        }
    }
}

#[test]
fn dx_offset_is_invariant_under_row_permutation() {
    let mut rng = common::rng(4);
    let img = common::random_image(&mut rng, 20, 12);
    let row = 20 * 3;
    let mut data = Vec::with_capacity(img.data().len());
    for y in (0..12).rev() {
        data.extend_from_slice(&img.data()[y * row..(y + 1) * row]);
    }
    let flipped = PixelImage::new(20, 12, data).unwrap();
    let c = cfg(0, 2, false, 64);
    assert_eq!(cooccur_raw(&img, &c).unwrap(), cooccur_raw(&flipped, &c).unwrap());
}

#[test]
fn normalization_keeps_argmax_and_peaks_at_one() {
    let mut rng = common::rng(5);
    let img = common::random_image(&mut rng, 40, 40);
    let c = CoOccConfig::with_bins(8);
    let raw = cooccur_raw(&img, &c).unwrap();
    let t = cooccur_tensor(&img, &c).unwrap();
    let n = 64;
    for ch in 0..3 {
        let counts = raw.channel(ch);
        let vals = &t.data()[ch * n..(ch + 1) * n];
        let max = *counts.iter().max().unwrap();
        assert_eq!(vals.iter().cloned().fold(f32::MIN, f32::max), 1.0);
        for (k, &v) in counts.iter().enumerate() {
            assert_eq!(vals[k] == 1.0, v == max);
            assert!((vals[k] as f64 - v as f64 / max as f64).abs() <= 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coarse_bins_aggregate_fine_bins(seed: u64, w in 3usize..20, h in 3usize..20, sym: bool, shift in 1u32..5) {
        let mut rng = common::rng(seed);
        let img = common::random_image(&mut rng, w, h);
        let coarse_bins = 256 >> shift;
        let f = 1usize << shift;
        let fine = cooccur_raw(&img, &cfg(1, 1, sym, 256)).unwrap();
        let coarse = cooccur_raw(&img, &cfg(1, 1, sym, coarse_bins)).unwrap();
        for c in 0..3 {
            let (fine, coarse) = (fine.channel(c), coarse.channel(c));
            for i in 0..coarse_bins {
                for j in 0..coarse_bins {
                    let mut s = 0;
                    for a in i * f..(i + 1) * f {
                        for b in j * f..(j + 1) * f {
                            s += fine[a * 256 + b];
                        }
                    }
                    prop_assert_eq!(coarse[i * coarse_bins + j], s);
                }
            }
        }
    }

    #[test]
    fn counts_sum_to_pair_count(seed: u64, w in 3usize..30, h in 3usize..30, dy in -2i32..=2, dx in -2i32..=2, sym: bool) {
        prop_assume!(dy != 0 || dx != 0);
        let mut rng = common::rng(seed);
        let img = common::random_image(&mut rng, w, h);
        let raw = cooccur_raw(&img, &cfg(dy, dx, sym, 32)).unwrap();
        let expected = (h - dy.unsigned_abs() as usize) * (w - dx.unsigned_abs() as usize) * if sym { 2 } else { 1 };
        for c in 0..3 {
            prop_assert_eq!(raw.channel(c).iter().sum::<u64>(), expected as u64);
        }
    }
}
