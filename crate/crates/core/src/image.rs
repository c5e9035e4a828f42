//! 8-bit single-channel raster and the pixel-exact operations on it.

use std::fmt;

use crate::error::{Error, Result};

/// Converts a real value to an 8-bit gray level: round half away from zero,
/// then clamp to `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    // f64::round rounds half away from zero; NaN maps to 0 under `as`.
    v.round().clamp(0.0, 255.0) as u8
}

/// An 8-bit grayscale image stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("GrayImage");
        s.field("width", &self.width).field("height", &self.height);
        if self.pixels.len() <= 64 {
            s.field("pixels", &self.pixels);
        }
        s.finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width.checked_mul(height).ok_or_else(|| {
            Error::InvalidImage(format!("{width}x{height} overflows the address space"))
        })?;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; an image holds at least one pixel.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (u8, u8) {
        self.pixels
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    pub fn is_constant(&self) -> bool {
        let (lo, hi) = self.min_max();
        lo == hi
    }

    /// Top-left `width` x `height` region.
    pub fn crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height {
            return Err(Error::InvalidArgument(format!(
                "cannot crop {}x{} image to {width}x{height}",
                self.width, self.height
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            pixels.extend_from_slice(&self.row(y)[..width]);
        }
        Self::new(width, height, pixels)
    }

    /// Drops the last column when the width is odd and the last row when the
    /// height is odd.
    pub fn crop_even(&self) -> Result<Self> {
        let (w, h) = (self.width & !1, self.height & !1);
        if w == 0 || h == 0 {
            return Err(Error::Degenerate(
                self.width,
                self.height,
                "cropping to even dimensions leaves no pixels",
            ));
        }
        self.crop(w, h)
    }

    /// Halves both dimensions by averaging each 2x2 block.
    ///
    /// Output pixel `(x, y)` is the mean of input pixels `(2x, 2y)`,
    /// `(2x+1, 2y)`, `(2x, 2y+1)` and `(2x+1, 2y+1)`, rounded half away
    /// from zero. Both dimensions must be even.
    pub fn block_average(&self) -> Result<Self> {
        if !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return Err(Error::OddDimensions(self.width, self.height));
        }
        let (w, h) = (self.width / 2, self.height / 2);
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            let top = self.row(2 * y);
            let bottom = self.row(2 * y + 1);
            for x in 0..w {
                let sum = top[2 * x] as u32
                    + top[2 * x + 1] as u32
                    + bottom[2 * x] as u32
                    + bottom[2 * x + 1] as u32;
                // sum/4 rounded half away from zero, exact for non-negative sums.
                pixels.push(((sum + 2) / 4) as u8);
            }
        }
        Self::new(w, h, pixels)
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        self.remap(self.width, self.height, |x, y| (self.width - 1 - x, y))
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> Self {
        self.remap(self.width, self.height, |x, y| (x, self.height - 1 - y))
    }

    /// Rotate 90 degrees clockwise.
    pub fn rotate90(&self) -> Self {
        // output (x, y) <- input (y, h - 1 - x); output is h x w
        self.remap(self.height, self.width, |x, y| (y, self.height - 1 - x))
    }

    pub fn rotate180(&self) -> Self {
        self.remap(self.width, self.height, |x, y| {
            (self.width - 1 - x, self.height - 1 - y)
        })
    }

    /// Rotate 270 degrees clockwise (90 counter-clockwise).
    pub fn rotate270(&self) -> Self {
        self.remap(self.height, self.width, |x, y| (self.width - 1 - y, x))
    }

    fn remap(&self, width: usize, height: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = src(x, y);
                pixels.push(self.get(sx, sy));
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, p: &[u8]) -> GrayImage {
        GrayImage::new(w, h, p.to_vec()).unwrap()
    }

    #[test]
    fn quantize_rounds_half_away_and_clamps() {
        assert_eq!(quantize(0.5), 1);
        assert_eq!(quantize(1.49), 1);
        assert_eq!(quantize(63.75), 64);
        assert_eq!(quantize(-0.4), 0);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(255.5), 255);
        assert_eq!(quantize(1e9), 255);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn block_average_examples() {
        assert_eq!(img(2, 2, &[10, 20, 30, 40]).block_average().unwrap(), img(1, 1, &[25]));
        assert_eq!(img(2, 2, &[0, 0, 0, 1]).block_average().unwrap(), img(1, 1, &[0]));
        // 0.5 rounds up
        assert_eq!(img(2, 2, &[0, 0, 1, 1]).block_average().unwrap(), img(1, 1, &[1]));
        assert_eq!(img(2, 2, &[0, 1, 1, 1]).block_average().unwrap(), img(1, 1, &[1]));
        let c = GrayImage::filled(6, 4, 91).unwrap();
        assert_eq!(c.block_average().unwrap(), GrayImage::filled(3, 2, 91).unwrap());
    }

    #[test]
    fn block_average_rejects_odd() {
        let odd = GrayImage::filled(3, 2, 0).unwrap();
        assert!(matches!(odd.block_average(), Err(Error::OddDimensions(3, 2))));
    }

    #[test]
    fn constant_power_of_two_pyramid_is_fixed() {
        let mut level = GrayImage::filled(32, 32, 200).unwrap();
        while level.width() > 1 {
            level = level.block_average().unwrap();
            assert!(level.pixels().iter().all(|&p| p == 200));
        }
    }

    #[test]
    fn crop_even_examples() {
        let five_by_four = GrayImage::from_fn(5, 4, |x, y| (10 * y + x) as u8).unwrap();
        let cropped = five_by_four.crop_even().unwrap();
        assert_eq!(cropped.dims(), (4, 4));
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(cropped.get(x, y), five_by_four.get(x, y));
            }
        }

        let four = GrayImage::from_fn(4, 4, |x, y| (x * y) as u8).unwrap();
        assert_eq!(four.crop_even().unwrap(), four);

        let three = img(3, 3, &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(three.crop_even().unwrap(), img(2, 2, &[1, 2, 4, 5]));
    }

    #[test]
    fn crop_even_rejects_degenerate() {
        assert!(matches!(
            GrayImage::filled(1, 5, 0).unwrap().crop_even(),
            Err(Error::Degenerate(1, 5, _))
        ));
        assert!(GrayImage::filled(7, 1, 0).unwrap().crop_even().is_err());
    }

    #[test]
    fn rotations_move_corners() {
        // 3x2:  a b c
        //       d e f
        let m = img(3, 2, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(m.rotate90(), img(2, 3, &[4, 1, 5, 2, 6, 3]));
        assert_eq!(m.rotate270(), img(2, 3, &[3, 6, 2, 5, 1, 4]));
        assert_eq!(m.rotate180(), img(3, 2, &[6, 5, 4, 3, 2, 1]));
        assert_eq!(m.flip_horizontal(), img(3, 2, &[3, 2, 1, 6, 5, 4]));
        assert_eq!(m.flip_vertical(), img(3, 2, &[4, 5, 6, 1, 2, 3]));
    }

    fn arb_image(max: usize) -> impl Strategy<Value = GrayImage> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |p| GrayImage::new(w, h, p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn block_average_stays_within_range(img in arb_image(12)) {
            prop_assume!(img.width() >= 2 && img.height() >= 2);
            let (lo, hi) = img.min_max();
            let out = img.crop_even().unwrap().block_average().unwrap();
            let (olo, ohi) = out.min_max();
            prop_assert!(olo >= lo && ohi <= hi);
        }

        #[test]
        fn transforms_compose_to_identity(img in arb_image(9)) {
            prop_assert_eq!(img.rotate180().rotate180(), img.clone());
            prop_assert_eq!(img.flip_horizontal().flip_horizontal(), img.clone());
            prop_assert_eq!(img.flip_vertical().flip_vertical(), img.clone());
            prop_assert_eq!(img.rotate90().rotate270(), img.clone());
            prop_assert_eq!(img.rotate90().rotate90(), img.rotate180());
        }
    }
}
