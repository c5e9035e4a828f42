//! Classical resamplers: the interpolation baselines and area-average
//! downsampling.
//!
//! All methods map output pixel centers to source coordinates with the
//! half-pixel convention `src = (dst + 0.5) / scale - 0.5` and clamp samples
//! that fall outside the image to the nearest edge pixel.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Bilinear,
    /// Catmull-Rom cubic (`a = -0.5`).
    Bicubic,
}

impl Interpolation {
    pub const ALL: [Interpolation; 3] = [
        Interpolation::Nearest,
        Interpolation::Bilinear,
        Interpolation::Bicubic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Nearest => "nearest",
            Interpolation::Bilinear => "bilinear",
            Interpolation::Bicubic => "bicubic",
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Interpolation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown interpolation {s:?}")))
    }
}

/// Catmull-Rom cubic convolution weight.
fn catmull_rom(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Source taps contributing to one output coordinate along an axis.
#[derive(Clone, Debug)]
struct Taps {
    index: Vec<usize>,
    weight: Vec<f64>,
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn axis_taps(method: Interpolation, src_len: usize, factor: usize) -> Vec<Taps> {
    let scale = factor as f64;
    (0..src_len * factor)
        .map(|dst| {
            let pos = (dst as f64 + 0.5) / scale - 0.5;
            match method {
                Interpolation::Nearest => Taps {
                    index: vec![dst / factor],
                    weight: vec![1.0],
                },
                Interpolation::Bilinear => {
                    let base = pos.floor();
                    let t = pos - base;
                    let base = base as isize;
                    Taps {
                        index: vec![clamp_index(base, src_len), clamp_index(base + 1, src_len)],
                        weight: vec![1.0 - t, t],
                    }
                }
                Interpolation::Bicubic => {
                    let base = pos.floor();
                    let t = pos - base;
                    let base = base as isize;
                    let index = (-1..=2).map(|d| clamp_index(base + d, src_len)).collect();
                    let weight = (-1..=2).map(|d| catmull_rom(t - d as f64)).collect();
                    Taps { index, weight }
                }
            }
        })
        .collect()
}

impl Taps {
    #[inline]
    fn apply<T: Copy + Into<f64>>(&self, line: impl Fn(usize) -> T) -> f64 {
        self.index
            .iter()
            .zip(&self.weight)
            .map(|(&i, &w)| w * line(i).into())
            .sum()
    }
}

/// Separable resampling: horizontal pass in real arithmetic, then vertical,
/// quantizing only the final result.
fn separable(img: &GrayImage, xs: &[Taps], ys: &[Taps]) -> Result<GrayImage> {
    let (w, h) = img.dims();
    let (ow, oh) = (xs.len(), ys.len());
    let src = img.pixels();
    let mut horizontal = vec![0.0f64; ow * h];
    horizontal
        .par_chunks_mut(ow)
        .enumerate()
        .for_each(|(y, row)| {
            let line = &src[y * w..(y + 1) * w];
            for (out, taps) in row.iter_mut().zip(xs) {
                *out = taps.apply(|i| line[i]);
            }
        });
    let mut pixels = vec![0u8; ow * oh];
    pixels.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        let taps = &ys[y];
        for (x, out) in row.iter_mut().enumerate() {
            *out = quantize(taps.apply(|i| horizontal[i * ow + x]));
        }
    });
    GrayImage::new(ow, oh, pixels)
}

/// Enlarges `img` by an integer `factor` with a classical interpolator.
pub fn resample_baseline(img: &GrayImage, factor: usize, method: Interpolation) -> Result<GrayImage> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "resampling factor must be at least 2, got {factor}"
        )));
    }
    let xs = axis_taps(method, img.width(), factor);
    let ys = axis_taps(method, img.height(), factor);
    separable(img, &xs, &ys)
}

/// Integer box downsampling: each output pixel is the rounded mean of a
/// `factor` x `factor` block. Dimensions must be divisible by `factor`.
pub fn box_downsample(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsampling factor must be positive".into()));
    }
    let (w, h) = img.dims();
    if w % factor != 0 || h % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "{w}x{h} image is not divisible by {factor}"
        )));
    }
    let (ow, oh) = (w / factor, h / factor);
    let area = (factor * factor) as u64;
    let pixels = (0..oh)
        .flat_map(|oy| (0..ow).map(move |ox| (ox, oy)))
        .map(|(ox, oy)| {
            let mut sum = 0u64;
            for y in oy * factor..(oy + 1) * factor {
                sum += img.row(y)[ox * factor..(ox + 1) * factor]
                    .iter()
                    .map(|&p| p as u64)
                    .sum::<u64>();
            }
            ((2 * sum + area) / (2 * area)) as u8
        })
        .collect();
    GrayImage::new(ow, oh, pixels)
}

fn area_taps(src_len: usize, dst_len: usize) -> Vec<Taps> {
    // Exact rational overlaps: source pixel i spans [i*dst, (i+1)*dst) and
    // output pixel o spans [o*src, (o+1)*src) on a common integer grid.
    let (s, d) = (src_len as u64, dst_len as u64);
    (0..d)
        .map(|o| {
            let lo = o * s;
            let hi = (o + 1) * s;
            let mut index = Vec::new();
            let mut weight = Vec::new();
            for i in lo / d..=((hi - 1) / d).min(s - 1) {
                let overlap = hi.min((i + 1) * d) - lo.max(i * d);
                if overlap > 0 {
                    index.push(i as usize);
                    weight.push(overlap as f64 / s as f64);
                }
            }
            Taps { index, weight }
        })
        .collect()
}

/// Area-average resize to arbitrary dimensions no larger than the source.
pub fn area_resize(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 || width > img.width() || height > img.height() {
        return Err(Error::InvalidArgument(format!(
            "area resize of {}x{} to {width}x{height} is not a downsample",
            img.width(),
            img.height()
        )));
    }
    if (width, height) == img.dims() {
        return Ok(img.clone());
    }
    let xs = area_taps(img.width(), width);
    let ys = area_taps(img.height(), height);
    separable(img, &xs, &ys)
}
