//! The end-to-end upscaler: learn the parent-to-children mapping from the
//! image itself, split every pixel into a predicted 2x2 block, repeat, and
//! smooth the result.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cart::{fit_and_score, FitReport, RegressionTree};
use crate::error::{Error, Result};
use crate::filter::{convolve, Kernel};
use crate::image::GrayImage;
use crate::pyramid::{training_set, Transform};
use crate::resample::area_resize;

pub const DEFAULT_PIXEL_BUDGET: u64 = 1 << 26;

/// How factors that are not powers of two are reached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoomStrategy {
    /// Enlarge by the next power of two, then area-average down to size.
    #[default]
    Pow2ThenDownsample,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpscaleConfig {
    pub blur_enabled: bool,
    pub blur_passes: usize,
    pub blur_kernel: Kernel,
    pub augment_transforms: BTreeSet<Transform>,
    pub retrain_per_step: bool,
    pub zoom_strategy: ZoomStrategy,
    pub pixel_budget: u64,
}

impl Default for UpscaleConfig {
    fn default() -> Self {
        UpscaleConfig {
            blur_enabled: true,
            blur_passes: 2,
            blur_kernel: Kernel::binomial3(),
            augment_transforms: BTreeSet::new(),
            retrain_per_step: false,
            zoom_strategy: ZoomStrategy::default(),
            pixel_budget: DEFAULT_PIXEL_BUDGET,
        }
    }
}

impl UpscaleConfig {
    pub fn without_blur(&self) -> Self {
        UpscaleConfig {
            blur_enabled: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blur_enabled && self.blur_passes == 0 {
            return Err(Error::InvalidArgument("blur passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub train_s: f64,
    pub predict_s: f64,
    pub resize_s: f64,
    pub blur_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoomResult {
    pub image: GrayImage,
    pub factor: usize,
    pub steps_applied: usize,
    pub fit_report: FitReport,
    pub timing: StageTimings,
}

/// Fits a tree on the pyramid pairs of `img` and its augmented variants.
pub fn train_from_image(img: &GrayImage, cfg: &UpscaleConfig) -> Result<(RegressionTree, FitReport)> {
    let ts = training_set(img, &cfg.augment_transforms)?;
    fit_and_score(&ts)
}

/// Doubles both dimensions: pixel `g` at `(x, y)` becomes the quantized
/// prediction `(tl, tr, bl, br)` at `(2x, 2y)`, `(2x+1, 2y)`, `(2x, 2y+1)`,
/// `(2x+1, 2y+1)`.
pub fn upscale_once(img: &GrayImage, tree: &RegressionTree) -> GrayImage {
    let lut = tree.lookup_table();
    let (w, h) = img.dims();
    let ow = 2 * w;
    let mut out = vec![0u8; ow * 2 * h];
    out.par_chunks_mut(2 * ow).enumerate().for_each(|(y, band)| {
        let (top, bottom) = band.split_at_mut(ow);
        for (x, &g) in img.row(y).iter().enumerate() {
            let [tl, tr, bl, br] = lut[g as usize];
            top[2 * x] = tl;
            top[2 * x + 1] = tr;
            bottom[2 * x] = bl;
            bottom[2 * x + 1] = br;
        }
    });
    GrayImage::new(ow, 2 * h, out).expect("dimensions are consistent")
}

/// Applies the blur post-filter; identity when blur is disabled.
pub fn postfilter(img: &GrayImage, cfg: &UpscaleConfig) -> Result<GrayImage> {
    if !cfg.blur_enabled {
        return Ok(img.clone());
    }
    convolve(img, &cfg.blur_kernel, cfg.blur_passes)
}

fn steps_for(factor: usize) -> usize {
    factor.next_power_of_two().trailing_zeros() as usize
}

fn check_budget(img: &GrayImage, scale: usize, budget: u64) -> Result<()> {
    let pixels = (img.width() as u64)
        .checked_mul(img.height() as u64)
        .and_then(|p| p.checked_mul(scale as u64))
        .and_then(|p| p.checked_mul(scale as u64))
        .unwrap_or(u64::MAX);
    if pixels > budget {
        return Err(Error::PixelBudget { pixels, budget });
    }
    Ok(())
}

/// Trains on `img` and enlarges it by `factor`.
pub fn upscale(img: &GrayImage, factor: usize, cfg: &UpscaleConfig) -> Result<ZoomResult> {
    check_request(img, factor, cfg)?;
    let start = Instant::now();
    let (tree, report) = train_from_image(img, cfg)?;
    let train_s = start.elapsed().as_secs_f64();
    let mut result = upscale_with_model(img, factor, cfg, &tree, report)?;
    result.timing.train_s += train_s;
    result.timing.total_s += train_s;
    Ok(result)
}

fn check_request(img: &GrayImage, factor: usize, cfg: &UpscaleConfig) -> Result<()> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!("zoom factor must be at least 2, got {factor}")));
    }
    cfg.validate()?;
    check_budget(img, factor.next_power_of_two(), cfg.pixel_budget)
}

/// Enlarges `img` by `factor` with an already fitted tree. `report` is
/// carried into the result unchanged.
pub fn upscale_with_model(
    img: &GrayImage,
    factor: usize,
    cfg: &UpscaleConfig,
    tree: &RegressionTree,
    report: FitReport,
) -> Result<ZoomResult> {
    check_request(img, factor, cfg)?;
    let start = Instant::now();
    let mut timing = StageTimings::default();
    let steps = steps_for(factor);

    let mut current = img.clone();
    let mut retrained: Option<RegressionTree> = None;
    for step in 0..steps {
        if cfg.retrain_per_step && step > 0 {
            let t = Instant::now();
            retrained = Some(train_from_image(&current, cfg)?.0);
            timing.train_s += t.elapsed().as_secs_f64();
        }
        let t = Instant::now();
        current = upscale_once(&current, retrained.as_ref().unwrap_or(tree));
        timing.predict_s += t.elapsed().as_secs_f64();
    }

    let (tw, th) = (img.width() * factor, img.height() * factor);
    if current.dims() != (tw, th) {
        let t = Instant::now();
        current = area_resize(&current, tw, th)?;
        timing.resize_s = t.elapsed().as_secs_f64();
    }

    let t = Instant::now();
    current = postfilter(&current, cfg)?;
    timing.blur_s = t.elapsed().as_secs_f64();
    timing.total_s = start.elapsed().as_secs_f64();

    Ok(ZoomResult {
        image: current,
        factor,
        steps_applied: steps,
        fit_report: report,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::{build_pyramid, TrainPair, TrainingSet};
    use crate::cart::FitParams;

    fn gradient(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 255) / (w - 1) / 2 + (y * 255) / (h - 1) / 2) as u8).unwrap()
    }

    #[test]
    fn constant_trains_one_leaf() {
        let img = GrayImage::filled(8, 8, 42).unwrap();
        let (tree, report) = train_from_image(&img, &UpscaleConfig::default()).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict(0.0), [42.0; 4]);
        assert_eq!(report.r2_uniform, 1.0);
    }

    #[test]
    fn sample_counts_with_and_without_augmentation() {
        let img = gradient(256, 256);
        let (tree, _) = train_from_image(&img, &UpscaleConfig::default()).unwrap();
        assert_eq!(tree.n_samples(), 21845);
        let cfg = UpscaleConfig {
            augment_transforms: Transform::ALL.into_iter().collect(),
            ..UpscaleConfig::default()
        };
        let (tree, _) = train_from_image(&img, &cfg).unwrap();
        assert_eq!(tree.n_samples(), 6 * 21845);
    }

    #[test]
    fn single_block_expansion() {
        let img = GrayImage::new(2, 2, vec![10, 20, 30, 40]).unwrap();
        let ts = TrainingSet::from_pairs(vec![TrainPair { feature: 25, labels: [10, 20, 30, 40] }]);
        let tree = RegressionTree::fit(&ts, FitParams::default()).unwrap();
        let out = upscale_once(&img, &tree);
        assert_eq!(out.dims(), (4, 4));
        assert_eq!(
            out.pixels(),
            &[10, 20, 10, 20, 30, 40, 30, 40, 10, 20, 10, 20, 30, 40, 30, 40]
        );
    }

    #[test]
    fn block_means_track_seen_features() {
        let img = gradient(64, 64);
        let ts = build_pyramid(&img).unwrap().extract_pairs();
        let tree = RegressionTree::fit(&ts, FitParams::default()).unwrap();
        let mut seen = [false; 256];
        for p in ts.pairs() {
            seen[p.feature as usize] = true;
        }
        for &g in img.pixels() {
            if seen[g as usize] {
                let m = tree.predict(g as f64).iter().sum::<f64>() / 4.0;
                assert!((m - g as f64).abs() <= 0.5 + 1e-9, "g={g} mean={m}");
            }
        }
    }

    #[test]
    fn dimension_contract() {
        let img = gradient(16, 12);
        let cfg = UpscaleConfig::default();
        for (factor, steps) in [(2, 1), (3, 2), (4, 2), (5, 3), (8, 3)] {
            let r = upscale(&img, factor, &cfg).unwrap();
            assert_eq!(r.image.dims(), (16 * factor, 12 * factor));
            assert_eq!(r.steps_applied, steps);
            assert_eq!(r.factor, factor);
        }
    }

    #[test]
    fn constants_are_end_to_end_fixed_points() {
        let img = GrayImage::filled(10, 6, 133).unwrap();
        for blur in [true, false] {
            let cfg = UpscaleConfig { blur_enabled: blur, ..UpscaleConfig::default() };
            for factor in [2, 3, 4, 7] {
                let out = upscale(&img, factor, &cfg).unwrap().image;
                assert!(out.pixels().iter().all(|&p| p == 133));
            }
        }
    }

    #[test]
    fn retraining_changes_nothing_for_constants_and_keeps_dims() {
        let img = gradient(16, 16);
        let cfg = UpscaleConfig { retrain_per_step: true, ..UpscaleConfig::default() };
        let r = upscale(&img, 4, &cfg).unwrap();
        assert_eq!(r.image.dims(), (64, 64));
        let c = GrayImage::filled(4, 4, 5).unwrap();
        assert!(upscale(&c, 4, &cfg).unwrap().image.pixels().iter().all(|&p| p == 5));
    }

    #[test]
    fn rejects_bad_requests() {
        let img = gradient(8, 8);
        let cfg = UpscaleConfig::default();
        assert!(matches!(upscale(&img, 1, &cfg), Err(Error::InvalidArgument(_))));
        let tight = UpscaleConfig { pixel_budget: 1000, ..UpscaleConfig::default() };
        assert!(matches!(upscale(&img, 4, &tight), Err(Error::PixelBudget { pixels: 1024, budget: 1000 })));
        let zero = UpscaleConfig { blur_passes: 0, ..UpscaleConfig::default() };
        assert!(upscale(&img, 2, &zero).is_err());
        assert!(upscale(&GrayImage::filled(1, 1, 0).unwrap(), 2, &cfg).is_err());
    }

    #[test]
    fn postfilter_modes() {
        let img = gradient(9, 7);
        let off = UpscaleConfig::default().without_blur();
        assert_eq!(postfilter(&img, &off).unwrap(), img);

        let mut px = vec![0u8; 49];
        px[24] = 255;
        let impulse = GrayImage::new(7, 7, px).unwrap();
        let once = UpscaleConfig { blur_passes: 1, ..UpscaleConfig::default() };
        let out = postfilter(&impulse, &once).unwrap();
        let block: Vec<u8> = (2..5).flat_map(|y| (2..5).map(move |x| (x, y))).map(|(x, y)| out.get(x, y)).collect();
        assert_eq!(block, [16, 32, 16, 32, 64, 32, 16, 32, 16]);
    }
}
