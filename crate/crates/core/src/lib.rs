//! Single-image super-resolution by pixel averaging.
//!
//! An image is reduced to a pyramid of 2x2 block averages; every coarse
//! pixel and the four finer pixels it summarizes form one training pair. A
//! fully grown regression tree learns the parent-to-children mapping and is
//! then applied to the original pixels to double the resolution, as many
//! times as needed.

pub mod bench;
pub mod cart;
pub mod cli;
pub mod codec;
pub mod error;
pub mod filter;
pub mod image;
pub mod metrics;
pub mod pyramid;
pub mod resample;
pub mod upscale;

pub use crate::cart::{score_r2, FitParams, FitReport, RegressionTree, TreeNode};
pub use crate::codec::{load_image, save_image};
pub use crate::error::{Error, Result};
pub use crate::filter::{convolve, Kernel};
pub use crate::image::GrayImage;
pub use crate::metrics::{mse, psnr};
pub use crate::pyramid::{
    augment, build_pyramid, dump_pairs, extract_pairs, AveragingPyramid, TrainPair, TrainingSet,
    Transform,
};
pub use crate::resample::{resample_baseline, Interpolation};
pub use crate::upscale::{postfilter, train_from_image, upscale, upscale_once, UpscaleConfig, ZoomResult};
