mod common;

use mlzoom_core::codec::{decode, encode, ImageFormat};
use mlzoom_core::{load_image, save_image, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hundred_random_images_round_trip_in_both_formats() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..70), rng.random_range(1..70));
        let img = common::random_image(&mut rng, w, h);
        for format in [ImageFormat::Pgm, ImageFormat::Png] {
            let bytes = encode(&img, format).unwrap();
            assert_eq!(decode(&bytes).unwrap(), img, "{format:?} {w}x{h}");
        }
    }
}

#[test]
fn large_random_image_round_trips_through_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(256);
    let img = common::random_image(&mut rng, 256, 256);
    let dir = tempfile::tempdir().unwrap();
    for name in ["big.pgm", "big.png"] {
        let path = dir.path().join(name);
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }
}

#[test]
fn pgm_is_written_with_a_minimal_header() {
    let img = GrayImage::new(2, 2, vec![10, 20, 30, 40]).unwrap();
    assert_eq!(encode(&img, ImageFormat::Pgm).unwrap(), b"P5\n2 2\n255\n\x0a\x14\x1e\x28");
}

#[test]
fn bundled_corpus_decodes_as_grayscale() {
    for entry in std::fs::read_dir(common::corpus_dir()).unwrap() {
        let img = load_image(entry.unwrap().path()).unwrap();
        assert!(img.width() >= 192 && img.height() >= 192);
    }
}
