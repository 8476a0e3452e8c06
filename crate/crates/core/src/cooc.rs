//! Per-channel pixel co-occurrence matrices.
//!
//! For an offset `(dy, dx)` the matrix of a channel counts, for every pixel
//! `p` whose neighbour `p + (dy, dx)` lies inside the image, the intensity
//! pair `(bin(p), bin(p + offset))`. Three such matrices (R, G, B) stacked
//! channel-major form the network input.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{load_image, PixelImage};
use crate::net::Tensor;
use crate::parallel::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offset {
    pub dy: i32,
    pub dx: i32,
}

impl Offset {
    pub const fn new(dy: i32, dx: i32) -> Self {
        Self { dy, dx }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each channel matrix divided by its own maximum count.
    #[default]
    MaxOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoOccConfig {
    pub offset: Offset,
    pub symmetric: bool,
    pub bins: usize,
    pub normalization: Normalization,
}

impl Default for CoOccConfig {
    fn default() -> Self {
        Self {
            offset: Offset::new(0, 1),
            symmetric: false,
            bins: 256,
            normalization: Normalization::MaxOne,
        }
    }
}

impl CoOccConfig {
    pub fn with_bins(bins: usize) -> Self {
        Self {
            bins,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset.dy == 0 && self.offset.dx == 0 {
            return Err(Error::InvalidConfig("co-occurrence offset must be non-zero".into()));
        }
        if !(2..=256).contains(&self.bins) || 256 % self.bins != 0 {
            return Err(Error::InvalidConfig(format!(
                "bins must divide 256 and lie in 2..=256, got {}",
                self.bins
            )));
        }
        Ok(())
    }

    fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        let (ady, adx) = (
            self.offset.dy.unsigned_abs() as usize,
            self.offset.dx.unsigned_abs() as usize,
        );
        if ady >= height || adx >= width {
            return Err(Error::OffsetTooLarge {
                dy: self.offset.dy,
                dx: self.offset.dx,
                height,
                width,
            });
        }
        Ok(())
    }

    /// Number of pixel pairs counted per channel for an image of this size.
    pub fn pair_count(&self, height: usize, width: usize) -> u64 {
        let h = height.saturating_sub(self.offset.dy.unsigned_abs() as usize) as u64;
        let w = width.saturating_sub(self.offset.dx.unsigned_abs() as usize) as u64;
        h * w * if self.symmetric { 2 } else { 1 }
    }

    fn bin_table(&self) -> [u16; 256] {
        let mut lut = [0u16; 256];
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (i * self.bins / 256) as u16;
        }
        lut
    }
}

/// Counts co-occurrences in a single channel plane of `height x width`
/// intensities. Returns a row-major `bins x bins` grid of exact counts.
pub fn cooccur_channel(plane: &[u8], height: usize, width: usize, cfg: &CoOccConfig) -> Result<Vec<u64>> {
    cfg.validate()?;
    if plane.len() != height * width {
        return Err(Error::ShapeMismatch {
            expected: vec![height, width],
            found: vec![plane.len()],
        });
    }
    cfg.check_fits(height, width)?;
    let mut counts = vec![0u64; cfg.bins * cfg.bins];
    accumulate(plane, height, width, 1, 0, cfg, &mut counts);
    Ok(counts)
}

/// Core counting loop over a strided (possibly interleaved) plane.
fn accumulate(
    data: &[u8],
    height: usize,
    width: usize,
    stride: usize,
    channel: usize,
    cfg: &CoOccConfig,
    counts: &mut [u64],
) {
    let lut = cfg.bin_table();
    let bins = cfg.bins;
    let Offset { dy, dx } = cfg.offset;
    let y_range = (0i64.max(-(dy as i64)) as usize)..((height as i64).min(height as i64 - dy as i64) as usize);
    let x_lo = 0i64.max(-(dx as i64)) as usize;
    let x_hi = (width as i64).min(width as i64 - dx as i64) as usize;
    let row = width * stride;
    let shift = (dy as isize * width as isize + dx as isize) * stride as isize;
    for y in y_range {
        let base = y * row + channel;
        for x in x_lo..x_hi {
            let i = base + x * stride;
            let j = (i as isize + shift) as usize;
            let a = lut[data[i] as usize] as usize;
            let b = lut[data[j] as usize] as usize;
            counts[a * bins + b] += 1;
        }
    }
    if cfg.symmetric {
        // add the transpose in place
        for a in 0..bins {
            for b in a..bins {
                let s = counts[a * bins + b] + counts[b * bins + a];
                counts[a * bins + b] = s;
                counts[b * bins + a] = s;
            }
        }
    }
}

/// Un-normalized counts for all three channels, channel-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCooccurrence {
    pub bins: usize,
    pub counts: Vec<u64>,
}

impl RawCooccurrence {
    pub fn channel(&self, c: usize) -> &[u64] {
        let n = self.bins * self.bins;
        &self.counts[c * n..(c + 1) * n]
    }

    pub fn normalize(&self) -> CoOccurrenceTensor {
        let n = self.bins * self.bins;
        let mut data = Vec::with_capacity(3 * n);
        for c in 0..3 {
            let ch = self.channel(c);
            let max = ch.iter().copied().max().unwrap_or(0);
            if max == 0 {
                data.extend(std::iter::repeat_n(0.0f32, n));
            } else {
                let scale = max as f64;
                data.extend(ch.iter().map(|&v| (v as f64 / scale) as f32));
            }
        }
        CoOccurrenceTensor { bins: self.bins, data }
    }
}

pub fn cooccur_raw(img: &PixelImage, cfg: &CoOccConfig) -> Result<RawCooccurrence> {
    cfg.validate()?;
    cfg.check_fits(img.height(), img.width())?;
    let n = cfg.bins * cfg.bins;
    let mut counts = vec![0u64; 3 * n];
    for (c, chunk) in counts.chunks_mut(n).enumerate() {
        accumulate(img.data(), img.height(), img.width(), 3, c, cfg, chunk);
    }
    Ok(RawCooccurrence { bins: cfg.bins, counts })
}

/// Normalized `3 x bins x bins` co-occurrence tensor, channel-major (R, G, B).
#[derive(Debug, Clone, PartialEq)]
pub struct CoOccurrenceTensor {
    bins: usize,
    data: Vec<f32>,
}

impl CoOccurrenceTensor {
    pub fn from_parts(bins: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * bins * bins {
            return Err(Error::ShapeMismatch {
                expected: vec![3, bins, bins],
                found: vec![data.len()],
            });
        }
        Ok(Self { bins, data })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn shape(&self) -> [usize; 3] {
        [3, self.bins, self.bins]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f32 {
        self.data[(c * self.bins + i) * self.bins + j]
    }

    pub fn to_input(&self) -> Tensor<f32> {
        Tensor::from_vec(vec![3, self.bins, self.bins], self.data.clone())
    }
}

pub fn cooccur_tensor(img: &PixelImage, cfg: &CoOccConfig) -> Result<CoOccurrenceTensor> {
    Ok(cooccur_raw(img, cfg)?.normalize())
}

/// Anything that names an image on disk and carries a label.
pub trait ImageRecord: Sync {
    type Label: Clone + Send;
    fn path(&self) -> &Path;
    fn label(&self) -> Self::Label;
}

#[derive(Debug, Clone)]
pub struct ExtractFailure {
    pub index: usize,
    pub path: PathBuf,
    pub error: String,
}

/// Per-image failures collected during a batch extraction.
#[derive(Debug, Clone, Default)]
pub struct ExtractReport {
    pub failures: Vec<ExtractFailure>,
}

impl ExtractReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// One extracted example, tagged with its position in the input list.
#[derive(Debug, Clone)]
pub struct Extracted<L> {
    pub index: usize,
    pub tensor: CoOccurrenceTensor,
    pub label: L,
}

/// Decodes and featurizes every record, preserving input order. Records that
/// fail to decode are skipped and listed in the report.
pub fn batch_extract<R: ImageRecord>(
    records: &[R],
    cfg: &CoOccConfig,
    pool: &WorkerPool,
) -> Result<(Vec<Extracted<R::Label>>, ExtractReport)> {
    batch_extract_with(records, cfg, pool, Ok)
}

/// Like [`batch_extract`] but passes each decoded image through `transform`
/// (e.g. JPEG recompression) before counting.
pub fn batch_extract_with<R, F>(
    records: &[R],
    cfg: &CoOccConfig,
    pool: &WorkerPool,
    transform: F,
) -> Result<(Vec<Extracted<R::Label>>, ExtractReport)>
where
    R: ImageRecord,
    F: Fn(PixelImage) -> Result<PixelImage> + Sync,
{
    cfg.validate()?;
    let results = pool.map_ordered(records, |rec| {
        load_image(rec.path())
            .and_then(&transform)
            .and_then(|img| cooccur_tensor(&img, cfg))
    });
    let mut out = Vec::with_capacity(records.len());
    let mut report = ExtractReport::default();
    for (index, (rec, res)) in records.iter().zip(results).enumerate() {
        match res {
            Ok(tensor) => out.push(Extracted {
                index,
                tensor,
                label: rec.label(),
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", rec.path().display());
                report.failures.push(ExtractFailure {
                    index,
                    path: rec.path().to_path_buf(),
                    error: e.to_string(),
                })
            }
        }
    }
    Ok((out, report))
}

const CACHE_MAGIC: &[u8; 4] = b"COOC";
const CACHE_VERSION: u32 = 1;

/// Writes a tensor cache file: `COOC`, version, bins, dy, dx, symmetric,
/// then `3 x bins x bins` little-endian f32 values.
pub fn write_tensor_cache(path: impl AsRef<Path>, tensor: &CoOccurrenceTensor, cfg: &CoOccConfig) -> Result<()> {
    if tensor.bins != cfg.bins {
        return Err(Error::ShapeMismatch {
            expected: vec![3, cfg.bins, cfg.bins],
            found: tensor.shape().to_vec(),
        });
    }
    let mut buf = Vec::with_capacity(21 + tensor.data.len() * 4);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.bins as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.offset.dy.to_le_bytes());
    buf.extend_from_slice(&cfg.offset.dx.to_le_bytes());
    buf.push(cfg.symmetric as u8);
    for v in &tensor.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a tensor cache file, returning the configuration it was built with.
pub fn read_tensor_cache(path: impl AsRef<Path>) -> Result<(CoOccConfig, CoOccurrenceTensor)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 21 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::Malformed("not a co-occurrence cache file".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    let bins = u32_at(8) as usize;
    let cfg = CoOccConfig {
        offset: Offset::new(u32_at(12) as i32, u32_at(16) as i32),
        symmetric: bytes[20] != 0,
        bins,
        normalization: Normalization::MaxOne,
    };
    cfg.validate()?;
    let payload = &bytes[21..];
    if payload.len() != 3 * bins * bins * 4 {
        return Err(Error::Malformed(format!(
            "cache payload has {} bytes, expected {}",
            payload.len(),
            3 * bins * bins * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((cfg, CoOccurrenceTensor { bins, data }))
}
