#![allow(dead_code)]

use std::path::PathBuf;

use mlzoom_core::GrayImage;
use rand::Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus")
}

/// Distance from the image center scaled to 0 at the center and 255 at the
/// corners.
pub fn radial_gradient(n: usize) -> GrayImage {
    let c = (n as f64 - 1.0) / 2.0;
    let rmax = 2f64.sqrt() * c;
    GrayImage::from_fn(n, n, |x, y| {
        let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
        (255.0 * r / rmax).round() as u8
    })
    .unwrap()
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> GrayImage {
    let pixels = (0..width * height).map(|_| rng.random()).collect();
    GrayImage::new(width, height, pixels).unwrap()
}
