mod common;

use coocnet::imaging::{encode_jpeg, load_image, save_jpeg, synth_sample, PixelImage, SynthClass};

fn max_deviation(a: &[u8], b: &[u8]) -> u8 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap()
}

fn reference_decode(bytes: &[u8]) -> (usize, usize, Vec<u8>) {
    let mut dec = jpeg_decoder::Decoder::new(bytes);
    let pixels = dec.decode().unwrap();
    let info = dec.info().unwrap();
    assert_eq!(info.pixel_format, jpeg_decoder::PixelFormat::RGB24);
    (info.width as usize, info.height as usize, pixels)
}

fn test_images() -> Vec<PixelImage> {
    let mut rng = common::rng(11);
    vec![
        common::random_image(&mut rng, 64, 48),
        synth_sample(SynthClass::Smooth, 3, 96, 80).unwrap(),
        synth_sample(SynthClass::Noisy, 3, 33, 17).unwrap(),
    ]
}

#[test]
fn q95_deviation_matches_reference_decoder() {
    let dir = tempfile::tempdir().unwrap();
    for (k, img) in test_images().into_iter().enumerate() {
        let path = dir.path().join(format!("{k}.jpg"));
        save_jpeg(&img, &path, 95).unwrap();
        let ours = load_image(&path).unwrap();
        let (w, h, reference) = reference_decode(&std::fs::read(&path).unwrap());
        assert_eq!((w, h), (img.width(), img.height()));
        assert_eq!(
            max_deviation(ours.data(), img.data()),
            max_deviation(&reference, img.data()),
            "image {k}"
        );
    }
}

#[test]
fn reference_decoder_raster_agreement() {
    // the decoders differ in chroma upsampling and IDCT rounding, by up to 3 levels here
    for img in test_images() {
        let bytes = encode_jpeg(&img, 95).unwrap();
        let ours = image::load_from_memory_with_format(&bytes, image::ImageFormat::Jpeg)
            .unwrap()
            .into_rgb8()
            .into_raw();
        let (_, _, reference) = reference_decode(&bytes);
        assert!(max_deviation(&ours, &reference) <= 3);
    }
}
