//! Normalized square kernels and reflect-padded 2-D convolution.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};

const SUM_TOLERANCE: f64 = 1e-12;

/// An odd-sized square kernel whose weights sum to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("size must be odd, got {size}")));
        }
        if weights.len() != size * size {
            return Err(Error::InvalidKernel(format!(
                "{size}x{size} kernel needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidKernel("weights must be finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidKernel(format!("weights sum to {sum}, not 1")));
        }
        Ok(Kernel { size, weights })
    }

    pub fn identity() -> Self {
        Kernel {
            size: 1,
            weights: vec![1.0],
        }
    }

    /// `(1/16) * [1 2 1; 2 4 2; 1 2 1]`, the 3x3 binomial approximation of a
    /// Gaussian.
    pub fn binomial3() -> Self {
        let taps = [1.0, 2.0, 1.0];
        let weights = taps
            .iter()
            .flat_map(|a| taps.iter().map(move |b| a * b / 16.0))
            .collect();
        Kernel { size: 3, weights }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, dx: usize, dy: usize) -> f64 {
        self.weights[dy * self.size + dx]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Full 2-D convolution of the kernel with itself; a `(2n-1)`-sized kernel.
    pub fn self_convolve(&self) -> Self {
        let n = self.size;
        let m = 2 * n - 1;
        let mut weights = vec![0.0; m * m];
        for ay in 0..n {
            for ax in 0..n {
                let a = self.weight(ax, ay);
                for by in 0..n {
                    for bx in 0..n {
                        weights[(ay + by) * m + ax + bx] += a * self.weight(bx, by);
                    }
                }
            }
        }
        Kernel { size: m, weights }
    }
}

/// Mirror an out-of-range coordinate back into `0..len` without repeating the
/// edge sample (`-1 -> 1`, `len -> len - 2`).
#[inline]
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// One convolution pass in real arithmetic, before quantization.
pub fn convolve_real(img: &GrayImage, kernel: &Kernel) -> Vec<f64> {
    let (w, h) = img.dims();
    let r = kernel.radius() as isize;
    let src = img.pixels();
    // Column lookups are the same for every row.
    let columns: Vec<Vec<usize>> = (0..w as isize)
        .map(|x| (-r..=r).map(|d| reflect_index(x + d, w)).collect())
        .collect();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let rows: Vec<&[u8]> = (-r..=r)
            .map(|d| {
                let sy = reflect_index(y as isize + d, h);
                &src[sy * w..(sy + 1) * w]
            })
            .collect();
        for (x, value) in row.iter_mut().enumerate() {
            let cols = &columns[x];
            let mut acc = 0.0;
            for (ky, line) in rows.iter().enumerate() {
                for (kx, &sx) in cols.iter().enumerate() {
                    acc += kernel.weight(kx, ky) * line[sx] as f64;
                }
            }
            *value = acc;
        }
    });
    out
}

/// Applies `kernel` `passes` times, quantizing after each pass.
pub fn convolve(img: &GrayImage, kernel: &Kernel, passes: usize) -> Result<GrayImage> {
    if passes == 0 {
        return Err(Error::InvalidArgument("convolution passes must be at least 1".into()));
    }
    let mut current = img.clone();
    if kernel.size() == 1 && kernel.weights[0] == 1.0 {
        return Ok(current);
    }
    for _ in 0..passes {
        let real = convolve_real(&current, kernel);
        current = GrayImage::new(
            img.width(),
            img.height(),
            real.into_iter().map(quantize).collect(),
        )?;
    }
    Ok(current)
}
