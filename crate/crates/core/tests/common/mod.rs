#![allow(dead_code)]

use std::path::Path;

use coocnet::cooc::{cooccur_tensor, CoOccConfig};
use coocnet::harness::{derive_seed, DatasetManifest, Label, Record, Sample, Split};
use coocnet::imaging::{save_png, synth_sample, PixelImage, SynthClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> PixelImage {
    let data = (0..width * height * 3).map(|_| rng.random::<u8>()).collect();
    PixelImage::new(width, height, data).unwrap()
}

/// Brute-force co-occurrence of one channel: visits every pixel, checks its
/// neighbour by hand and bins by integer division.
pub fn naive_cooccurrence(
    img: &PixelImage,
    channel: usize,
    dy: i32,
    dx: i32,
    symmetric: bool,
    bins: usize,
) -> Vec<u64> {
    let width = 256 / bins;
    let mut m = vec![0u64; bins * bins];
    for y in 0..img.height() as i32 {
        for x in 0..img.width() as i32 {
            let (ny, nx) = (y + dy, x + dx);
            if ny < 0 || nx < 0 || ny >= img.height() as i32 || nx >= img.width() as i32 {
                continue;
            }
            let a = img.pixel(y as usize, x as usize)[channel] as usize / width;
            let b = img.pixel(ny as usize, nx as usize)[channel] as usize / width;
            m[a * bins + b] += 1;
            if symmetric {
                m[b * bins + a] += 1;
            }
        }
    }
    m
}

/// Class for index `i`: even indices are smooth (GAN), odd are noisy (real).
pub fn synth_class(i: usize) -> (SynthClass, Label) {
    if i.is_multiple_of(2) {
        (SynthClass::Smooth, Label::Gan)
    } else {
        (SynthClass::Noisy, Label::Real)
    }
}

pub fn synth_samples(n: usize, size: usize, bins: usize, seed: u64) -> Vec<Sample> {
    let cfg = CoOccConfig::with_bins(bins);
    (0..n)
        .map(|i| {
            let (class, label) = synth_class(i);
            let img = synth_sample(class, derive_seed(seed, i as u64), size, size).unwrap();
            Sample {
                input: cooccur_tensor(&img, &cfg).unwrap().to_input(),
                label,
                category: format!("{class:?}").to_lowercase(),
            }
        })
        .collect()
}

/// Writes `n` synthetic PNGs (alternating classes) under `dir` and returns an
/// unassigned manifest. `categories` names the GAN categories, assigned round-robin.
pub fn synth_tree(dir: &Path, n: usize, size: usize, seed: u64, categories: &[&str]) -> DatasetManifest {
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let (class, label) = synth_class(i);
        let category = match label {
            Label::Gan => categories[(i / 2) % categories.len()].to_string(),
            Label::Real => "noisy".to_string(),
        };
        let path = dir.join(label.as_str()).join(&category).join(format!("{i:05}.png"));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_png(
            &synth_sample(class, derive_seed(seed, i as u64), size, size).unwrap(),
            &path,
        )
        .unwrap();
        records.push(Record {
            path,
            label,
            category,
            split: Split::Unassigned,
        });
    }
    DatasetManifest::new(records).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
