//! Round-trip benchmark: downsample a reference image, restore it with each
//! method, and score the restoration against the reference.
//!
//! Methods always appear in name order: `bicubic`, `bilinear`, `ml`,
//! `ml_noblur`, `nearest`. Corpus reports are ordered by image file name,
//! then factor, then method.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::codec::load_image;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::metrics::{mse, psnr_from_mse};
use crate::resample::{box_downsample, resample_baseline, Interpolation};
use crate::upscale::{train_from_image, upscale_with_model, UpscaleConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "image_id,method,factor,psnr_db,mse,train_r2,wall_time_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bicubic,
    Bilinear,
    Ml,
    MlNoblur,
    Nearest,
}

impl Method {
    /// In output order.
    pub const ALL: [Method; 5] = [
        Method::Bicubic,
        Method::Bilinear,
        Method::Ml,
        Method::MlNoblur,
        Method::Nearest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bicubic => "bicubic",
            Method::Bilinear => "bilinear",
            Method::Ml => "ml",
            Method::MlNoblur => "ml_noblur",
            Method::Nearest => "nearest",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Non-finite values are written as the strings `"inf"`, `"-inf"`, `"nan"`.
fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format_real(*v))
    }
}

fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub method: Method,
    pub factor: usize,
    #[serde(rename = "psnr_db", serialize_with = "serialize_db")]
    pub psnr: f64,
    pub mse: f64,
    /// Training-set R^2 of the tree, for the `ml` methods only.
    pub train_r2: Option<f64>,
    #[serde(rename = "wall_time_s")]
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    #[serde(serialize_with = "serialize_db")]
    pub mean_psnr_db: f64,
    pub mean_mse: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub image_id: String,
    pub factor: Option<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchConfig {
    pub factors: Vec<usize>,
    pub upscale: UpscaleConfig,
    /// When off, every wall time is reported as 0 so reports are
    /// reproducible byte for byte.
    pub record_timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            factors: vec![2, 4],
            upscale: UpscaleConfig::default(),
            record_timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub config: BenchConfig,
    pub records: Vec<EvalRecord>,
    /// method -> factor -> aggregate
    pub aggregates: BTreeMap<String, BTreeMap<String, Aggregate>>,
    pub skipped: Vec<Skipped>,
}

/// Scores every method on restoring `img` from its `factor`x box-downsampled
/// copy. The ml methods train on the downsampled copy only.
pub fn roundtrip_eval(
    image_id: &str,
    img: &GrayImage,
    factor: usize,
    cfg: &UpscaleConfig,
) -> Result<Vec<EvalRecord>> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!("factor must be at least 2, got {factor}")));
    }
    let low = box_downsample(img, factor)?;

    let record = |method: Method, out: &GrayImage, train_r2: Option<f64>, wall: f64| -> Result<EvalRecord> {
        let m = mse(img, out)?;
        Ok(EvalRecord {
            image_id: image_id.to_string(),
            method,
            factor,
            psnr: psnr_from_mse(m),
            mse: m,
            train_r2,
            wall_time: wall,
        })
    };

    let mut records = Vec::with_capacity(Method::ALL.len());
    let t = Instant::now();
    let (tree, report) = train_from_image(&low, cfg)?;
    let train_s = t.elapsed().as_secs_f64();
    for method in Method::ALL {
        let t = Instant::now();
        let out = match method {
            Method::Ml => upscale_with_model(&low, factor, cfg, &tree, report.clone())?.image,
            Method::MlNoblur => {
                upscale_with_model(&low, factor, &cfg.without_blur(), &tree, report.clone())?.image
            }
            Method::Nearest => resample_baseline(&low, factor, Interpolation::Nearest)?,
            Method::Bilinear => resample_baseline(&low, factor, Interpolation::Bilinear)?,
            Method::Bicubic => resample_baseline(&low, factor, Interpolation::Bicubic)?,
        };
        let mut wall = t.elapsed().as_secs_f64();
        let r2 = match method {
            Method::Ml | Method::MlNoblur => {
                wall += train_s;
                Some(report.r2_uniform)
            }
            _ => None,
        };
        records.push(record(method, &out, r2, wall)?);
    }
    Ok(records)
}

/// Crops to the largest region whose sides are multiples of `factor`.
pub fn crop_to_multiple(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    let (w, h) = (img.width() / factor * factor, img.height() / factor * factor);
    if w == 0 || h == 0 {
        return Err(Error::Degenerate(img.width(), img.height(), "smaller than the zoom factor"));
    }
    img.crop(w, h)
}

fn is_image_path(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
            .unwrap_or(false)
}

/// `.png` and `.pgm` files directly inside `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_image_path(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

enum Outcome {
    Records(Vec<EvalRecord>),
    Skip(Skipped),
}

pub fn run_corpus(dir: impl AsRef<Path>, cfg: &BenchConfig) -> Result<EvalReport> {
    let dir = dir.as_ref();
    cfg.upscale.validate()?;
    let files = corpus_files(dir)?;
    if files.is_empty() {
        return Err(Error::NoImages(dir.to_path_buf()));
    }
    let per_image: Vec<Vec<Outcome>> = files
        .par_iter()
        .map(|path| {
            let id = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let img = match load_image(path) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    return vec![Outcome::Skip(Skipped { image_id: id, factor: None, reason: e.to_string() })];
                }
            };
            cfg.factors
                .iter()
                .map(|&factor| {
                    match crop_to_multiple(&img, factor)
                        .and_then(|c| roundtrip_eval(&id, &c, factor, &cfg.upscale))
                    {
                        Ok(records) => Outcome::Records(records),
                        Err(e) => Outcome::Skip(Skipped {
                            image_id: id.clone(),
                            factor: Some(factor),
                            reason: e.to_string(),
                        }),
                    }
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in per_image.into_iter().flatten() {
        match outcome {
            Outcome::Records(r) => records.extend(r),
            Outcome::Skip(s) => skipped.push(s),
        }
    }
    if records.is_empty() && skipped.iter().all(|s| s.factor.is_none()) {
        return Err(Error::NoImages(dir.to_path_buf()));
    }
    if !cfg.record_timings {
        for r in &mut records {
            r.wall_time = 0.0;
        }
    }
    let aggregates = aggregate(&records);
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg.clone(),
        records,
        aggregates,
        skipped,
    })
}

/// Mean PSNR and MSE per method and factor, summed in record order.
pub fn aggregate(records: &[EvalRecord]) -> BTreeMap<String, BTreeMap<String, Aggregate>> {
    let mut sums: BTreeMap<(Method, usize), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry((r.method, r.factor)).or_default();
        e.0 += r.psnr;
        e.1 += r.mse;
        e.2 += 1;
    }
    let mut out: BTreeMap<String, BTreeMap<String, Aggregate>> = BTreeMap::new();
    for ((method, factor), (psnr, mse, count)) in sums {
        out.entry(method.name().to_string()).or_default().insert(
            factor.to_string(),
            Aggregate {
                mean_psnr_db: psnr / count as f64,
                mean_mse: mse / count as f64,
                count,
            },
        );
    }
    out
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let r2 = r.train_r2.map(format_real).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&r.image_id),
                r.method,
                r.factor,
                format_real(r.psnr),
                format_real(r.mse),
                r2,
                format_real(r.wall_time)
            );
        }
        out
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn aggregate(&self, method: Method, factor: usize) -> Option<&Aggregate> {
        self.aggregates.get(method.name())?.get(&factor.to_string())
    }

    /// Human-readable mean PSNR table, one row per method.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "method");
        for f in &self.config.factors {
            let _ = write!(out, " {:>12}", format!("x{f} PSNR dB"));
        }
        out.push('\n');
        for method in Method::ALL {
            let _ = write!(out, "{:<10}", method.name());
            for &f in &self.config.factors {
                let cell = self
                    .aggregate(method, f)
                    .map(|a| if a.mean_psnr_db.is_finite() { format!("{:.2}", a.mean_psnr_db) } else { format_real(a.mean_psnr_db) })
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {cell:>12}");
            }
            out.push('\n');
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped: {}", self.skipped.len());
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::score_r2;
    use crate::codec::save_image;
    use crate::pyramid::training_set;

    fn smooth(w: usize, h: usize, phase: f64) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let v = 128.0 + 60.0 * ((x as f64 / 9.0 + phase).sin() + (y as f64 / 13.0).cos());
            v.round() as u8
        })
        .unwrap()
    }

    #[test]
    fn constant_image_scores_perfectly() {
        let img = GrayImage::filled(16, 16, 90).unwrap();
        let records = roundtrip_eval("c", &img, 2, &UpscaleConfig::default()).unwrap();
        assert_eq!(records.len(), 5);
        let methods: Vec<_> = records.iter().map(|r| r.method).collect();
        assert_eq!(methods, Method::ALL);
        for r in records {
            assert_eq!(r.mse, 0.0);
            assert_eq!(r.psnr, f64::INFINITY);
        }
    }

    #[test]
    fn nearest_restores_tile_aligned_checkerboard() {
        let img = GrayImage::from_fn(16, 16, |x, y| if (x / 2 + y / 2) % 2 == 0 { 10 } else { 240 }).unwrap();
        let records = roundtrip_eval("cb", &img, 2, &UpscaleConfig::default()).unwrap();
        let nearest = records.iter().find(|r| r.method == Method::Nearest).unwrap();
        assert_eq!(nearest.psnr, f64::INFINITY);
    }

    #[test]
    fn ml_r2_matches_independent_score() {
        let img = smooth(32, 32, 0.3);
        let cfg = UpscaleConfig::default();
        let records = roundtrip_eval("s", &img, 2, &cfg).unwrap();
        let low = box_downsample(&img, 2).unwrap();
        let ts = training_set(&low, &cfg.augment_transforms).unwrap();
        let tree = crate::cart::RegressionTree::fit(&ts, Default::default()).unwrap();
        let expect = score_r2(&tree, &ts).unwrap().r2_uniform;
        for r in records.iter().filter(|r| matches!(r.method, Method::Ml | Method::MlNoblur)) {
            assert!((r.train_r2.unwrap() - expect).abs() <= 1e-12);
        }
        assert!(records.iter().filter(|r| r.train_r2.is_some()).count() == 2);
    }

    #[test]
    fn psnr_and_mse_agree() {
        let img = smooth(24, 24, 1.0);
        for r in roundtrip_eval("s", &img, 2, &UpscaleConfig::default()).unwrap() {
            if r.mse > 0.0 {
                assert!((r.psnr - 10.0 * (65025.0 / r.mse).log10()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indivisible_dims_are_rejected() {
        let img = smooth(10, 9, 0.0);
        assert!(roundtrip_eval("s", &img, 2, &UpscaleConfig::default()).is_err());
        assert_eq!(crop_to_multiple(&img, 2).unwrap().dims(), (10, 8));
        assert_eq!(crop_to_multiple(&img, 4).unwrap().dims(), (8, 8));
    }

    #[test]
    fn corpus_counts_order_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        save_image(&smooth(32, 32, 0.0), dir.path().join("b.png")).unwrap();
        save_image(&smooth(40, 32, 2.0), dir.path().join("a.pgm")).unwrap();
        fs::write(dir.path().join("c.png"), b"not an image").unwrap();
        fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();

        let cfg = BenchConfig::default();
        let report = run_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(report.records.len(), 2 * 2 * 5);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].image_id, "c.png");

        let keys: Vec<_> = report.records.iter().map(|r| (r.image_id.as_str(), r.factor, r.method)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);

        for (method, by_factor) in &report.aggregates {
            for (factor, agg) in by_factor {
                let rs: Vec<_> = report
                    .records
                    .iter()
                    .filter(|r| r.method.name() == method && r.factor.to_string() == *factor)
                    .collect();
                let mean = rs.iter().map(|r| r.psnr).sum::<f64>() / rs.len() as f64;
                assert_eq!(agg.mean_psnr_db, mean);
                assert_eq!(agg.count, rs.len());
            }
        }

        let again = run_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(again.to_csv(), report.to_csv());
        assert_eq!(again.to_json().unwrap(), report.to_json().unwrap());

        let csv = report.to_csv();
        assert!(csv.starts_with(&format!("{CSV_HEADER}\n")));
        assert_eq!(csv.lines().count(), 21);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_corpus(dir.path(), &BenchConfig::default()), Err(Error::NoImages(_))));
        fs::write(dir.path().join("x.png"), b"junk").unwrap();
        assert!(matches!(run_corpus(dir.path(), &BenchConfig::default()), Err(Error::NoImages(_))));
    }

    #[test]
    fn infinite_psnr_is_written_as_inf() {
        let img = GrayImage::filled(8, 8, 1).unwrap();
        let mut records = roundtrip_eval("flat", &img, 2, &UpscaleConfig::default()).unwrap();
        records.iter_mut().for_each(|r| r.wall_time = 0.0);
        let report = EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            config: BenchConfig::default(),
            aggregates: aggregate(&records),
            records,
            skipped: vec![],
        };
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["records"][0]["psnr_db"], "inf");
        assert_eq!(json["aggregates"]["ml"]["2"]["mean_psnr_db"], "inf");
        assert!(report.to_csv().lines().nth(1).unwrap().starts_with("flat,bicubic,2,inf,0,,0"));
    }
}
