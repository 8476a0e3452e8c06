//! Image decoding, JPEG recompression and synthetic two-class samples.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};
use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies the JPEG codec pair used for recompression; written into run metadata.
pub const CODEC_IDENTITY: &str =
    "encoder=jpeg-encoder 0.7 (baseline, 4:2:0, Annex K tables, libjpeg quality scaling); decoder=image 0.25 (zune-jpeg)";

/// A decoded 8-bit RGB raster, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl PixelImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSize { width, height });
        }
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width, 3],
                found: vec![data.len()],
            });
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single RGB value.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Copies one channel (0 = R, 1 = G, 2 = B) into a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        assert!(c < 3, "channel index {c} out of range");
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction")
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }
}

fn format_for_path(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "jpg" | "jpeg" => Ok(ImageFormat::Jpeg),
        _ => Err(Error::UnsupportedFormat(path.display().to_string())),
    }
}

/// Decodes a PNG or baseline JPEG file. Grayscale is replicated to three
/// channels and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelImage> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let format = format_for_path(path)?;
    let bytes = std::fs::read(path)?;
    decode_bytes(&bytes, format).map_err(|reason| Error::CorruptImage {
        path: path.to_path_buf(),
        reason,
    })
}

fn decode_bytes(bytes: &[u8], format: ImageFormat) -> std::result::Result<PixelImage, String> {
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| e.to_string())?;
    PixelImage::from_dynamic(img).map_err(|e| e.to_string())
}

/// Writes a lossless PNG.
pub fn save_png(img: &PixelImage, path: impl AsRef<Path>) -> Result<()> {
    img.to_rgb_image()
        .save_with_format(path.as_ref(), ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Encodes `img` as a baseline JPEG with 4:2:0 chroma subsampling.
pub fn encode_jpeg(img: &PixelImage, quality: u8) -> Result<Vec<u8>> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidQuality(quality));
    }
    let (w, h) = (
        u16::try_from(img.width).map_err(|_| Error::EncodeFailure("width exceeds 65535".into()))?,
        u16::try_from(img.height).map_err(|_| Error::EncodeFailure("height exceeds 65535".into()))?,
    );
    let mut out = Vec::new();
    let mut encoder = Encoder::new(&mut out, quality);
    encoder.set_sampling_factor(SamplingFactor::R_4_2_0);
    encoder
        .encode(&img.data, w, h, ColorType::Rgb)
        .map_err(|e| Error::EncodeFailure(e.to_string()))?;
    Ok(out)
}

/// Writes a baseline JPEG file (used to cache recompressed corpora).
pub fn save_jpeg(img: &PixelImage, path: impl AsRef<Path>, quality: u8) -> Result<()> {
    let bytes = encode_jpeg(img, quality)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Decode of a baseline 4:2:0 JPEG encoding of `img` at `quality`.
pub fn jpeg_recompress(img: &PixelImage, quality: u8) -> Result<PixelImage> {
    let bytes = encode_jpeg(img, quality)?;
    let out = decode_bytes(&bytes, ImageFormat::Jpeg).map_err(Error::EncodeFailure)?;
    debug_assert_eq!((out.width, out.height), (img.width, img.height));
    Ok(out)
}

/// The two synthetic classes. `Smooth` stands in for resampled/generated
/// content, `Noisy` for content with weak neighbour correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthClass {
    Smooth,
    Noisy,
}

impl SynthClass {
    fn stream(self) -> u64 {
        match self {
            SynthClass::Smooth => 1,
            SynthClass::Noisy => 2,
        }
    }
}

/// Deterministic synthetic sample.
///
/// `Smooth` draws a uniform random raster at a quarter of the resolution and
/// upsamples it 4x with bilinear interpolation; `Noisy` draws every pixel
/// independently.
pub fn synth_sample(class: SynthClass, seed: u64, width: usize, height: usize) -> Result<PixelImage> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidSize { width, height });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class.stream());
    let data = match class {
        SynthClass::Noisy => {
            let mut data = vec![0u8; width * height * 3];
            rng.fill(&mut data[..]);
            data
        }
        SynthClass::Smooth => {
            let (sw, sh) = (width / 4, height / 4);
            let mut small = vec![0u8; sw * sh * 3];
            rng.fill(&mut small[..]);
            bilinear_resize(&small, sw, sh, width, height)
        }
    };
    PixelImage::new(width, height, data)
}

/// Half-pixel-centred bilinear resampling of an interleaved RGB raster.
fn bilinear_resize(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<u8> {
    let axis = |d: usize, dn: usize, sn: usize| -> (usize, usize, f32) {
        let pos = ((d as f32 + 0.5) * sn as f32 / dn as f32 - 0.5).clamp(0.0, (sn - 1) as f32);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(sn - 1);
        (i0, i1, pos - i0 as f32)
    };
    let cols: Vec<_> = (0..dw).map(|x| axis(x, dw, sw)).collect();
    let mut out = Vec::with_capacity(dw * dh * 3);
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, dh, sh);
        for &(x0, x1, fx) in &cols {
            for c in 0..3 {
                let at = |yy: usize, xx: usize| src[(yy * sw + xx) * 3 + c] as f32;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Mean absolute difference between horizontally adjacent samples.
pub fn horizontal_roughness(img: &PixelImage) -> f64 {
    let mut total = 0u64;
    let mut n = 0u64;
    for y in 0..img.height {
        for x in 1..img.width {
            let a = img.pixel(y, x - 1);
            let b = img.pixel(y, x);
            for c in 0..3 {
                total += a[c].abs_diff(b[c]) as u64;
                n += 1;
            }
        }
    }
    total as f64 / n as f64
}

/// Re-encodes an image through PNG bytes in memory and decodes it again.
pub fn png_roundtrip(img: &PixelImage) -> Result<PixelImage> {
    let mut buf = Cursor::new(Vec::new());
    img.to_rgb_image()
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::EncodeFailure(e.to_string()))?;
    decode_bytes(buf.get_ref(), ImageFormat::Png).map_err(Error::EncodeFailure)
}
