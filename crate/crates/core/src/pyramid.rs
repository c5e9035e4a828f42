//! The pixel-averaging pyramid and the parent/children training pairs it
//! yields.
//!
//! Level 0 is the source image. Each following level is the 2x2 block
//! average of the previous level after dropping any odd trailing row or
//! column. Construction stops once a level is one pixel wide or tall. Every
//! coarse pixel, at every level, becomes one training pair: its own gray
//! value as the feature and the 2x2 block it was averaged from as the labels.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AveragingPyramid {
    levels: Vec<GrayImage>,
    source_dims: (usize, usize),
}

impl AveragingPyramid {
    pub fn build(img: &GrayImage) -> Result<Self> {
        if img.width() < 2 || img.height() < 2 {
            return Err(Error::Degenerate(
                img.width(),
                img.height(),
                "a pyramid needs at least 2 pixels in each direction",
            ));
        }
        let mut levels = vec![img.clone()];
        loop {
            let last = levels.last().expect("non-empty");
            if last.width() < 2 || last.height() < 2 {
                break;
            }
            let next = last.crop_even()?.block_average()?;
            levels.push(next);
        }
        Ok(AveragingPyramid {
            levels,
            source_dims: img.dims(),
        })
    }

    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &GrayImage {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    /// Number of pairs `extract_pairs` will emit.
    pub fn pair_count(&self) -> usize {
        self.levels[1..].iter().map(GrayImage::len).sum()
    }

    /// Emits one pair per coarse pixel, finest transition first and in
    /// row-major order within a level.
    pub fn extract_pairs(&self) -> TrainingSet {
        let mut set = TrainingSet::with_capacity(self.pair_count());
        for k in 1..self.levels.len() {
            let coarse = &self.levels[k];
            // The fine level is read through its even-cropped window; the
            // dropped row/column is never addressed.
            let fine = &self.levels[k - 1];
            for y in 0..coarse.height() {
                let top = &fine.row(2 * y)[..2 * coarse.width()];
                let bottom = &fine.row(2 * y + 1)[..2 * coarse.width()];
                for x in 0..coarse.width() {
                    set.push(
                        TrainPair {
                            feature: coarse.get(x, y),
                            labels: [top[2 * x], top[2 * x + 1], bottom[2 * x], bottom[2 * x + 1]],
                        },
                        k as u32,
                    );
                }
            }
        }
        set
    }
}

pub fn build_pyramid(img: &GrayImage) -> Result<AveragingPyramid> {
    AveragingPyramid::build(img)
}

pub fn extract_pairs(pyramid: &AveragingPyramid) -> TrainingSet {
    pyramid.extract_pairs()
}

/// A parent gray value and its four children in TL, TR, BL, BR order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrainPair {
    pub feature: u8,
    pub labels: [u8; 4],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingSet {
    pairs: Vec<TrainPair>,
    levels: Vec<u32>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        TrainingSet {
            pairs: Vec::with_capacity(n),
            levels: Vec::with_capacity(n),
        }
    }

    /// Builds a set from bare pairs, tagging each with level 0.
    pub fn from_pairs(pairs: Vec<TrainPair>) -> Self {
        let levels = vec![0; pairs.len()];
        TrainingSet { pairs, levels }
    }

    pub fn push(&mut self, pair: TrainPair, level: u32) {
        self.pairs.push(pair);
        self.levels.push(level);
    }

    pub fn extend(&mut self, other: TrainingSet) {
        self.pairs.extend(other.pairs);
        self.levels.extend(other.levels);
    }

    pub fn pairs(&self) -> &[TrainPair] {
        &self.pairs
    }

    /// Coarse level index each pair was extracted from.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrainPair, u32)> {
        self.pairs.iter().zip(self.levels.iter().copied())
    }

    /// Writes `feature,tl,tr,bl,br,level`, one row per pair in stored order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for (p, level) in self.iter() {
            let [tl, tr, bl, br] = p.labels;
            w.serialize((p.feature, tl, tr, bl, br, level))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Decode(format!(
                "unexpected pair CSV header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut set = TrainingSet::new();
        for row in r.deserialize() {
            let (feature, tl, tr, bl, br, level): (u8, u8, u8, u8, u8, u32) = row?;
            set.push(TrainPair { feature, labels: [tl, tr, bl, br] }, level);
        }
        Ok(set)
    }
}

const CSV_HEADER: [&str; 6] = ["feature", "tl", "tr", "bl", "br", "level"];

pub fn dump_pairs(ts: &TrainingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    ts.write_csv(BufWriter::new(file))
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<TrainingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    TrainingSet::read_csv(BufReader::new(file))
}

/// Lossless pixel permutations used for augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    FlipH,
    FlipV,
    Rot90,
    Rot180,
    Rot270,
}

impl Transform {
    pub const ALL: [Transform; 5] = [
        Transform::FlipH,
        Transform::FlipV,
        Transform::Rot90,
        Transform::Rot180,
        Transform::Rot270,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::FlipH => "flip_h",
            Transform::FlipV => "flip_v",
            Transform::Rot90 => "rot90",
            Transform::Rot180 => "rot180",
            Transform::Rot270 => "rot270",
        }
    }

    pub fn apply(self, img: &GrayImage) -> GrayImage {
        match self {
            Transform::FlipH => img.flip_horizontal(),
            Transform::FlipV => img.flip_vertical(),
            Transform::Rot90 => img.rotate90(),
            Transform::Rot180 => img.rotate180(),
            Transform::Rot270 => img.rotate270(),
        }
    }

    /// Parses a comma-separated list such as `flip_h,rot90`. An empty string
    /// or `none` is the empty set.
    pub fn parse_list(s: &str) -> Result<BTreeSet<Transform>> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(BTreeSet::new());
        }
        if s == "all" {
            return Ok(Transform::ALL.into_iter().collect());
        }
        s.split(',').map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown transform {s:?}")))
    }
}

/// The input followed by one transformed copy per requested transform, in
/// the set's order.
pub fn augment(img: &GrayImage, transforms: &BTreeSet<Transform>) -> Vec<GrayImage> {
    std::iter::once(img.clone())
        .chain(transforms.iter().map(|t| t.apply(img)))
        .collect()
}

/// Pyramid pairs of `img` and each augmented variant, concatenated in
/// `augment` order.
pub fn training_set(img: &GrayImage, transforms: &BTreeSet<Transform>) -> Result<TrainingSet> {
    let mut set = TrainingSet::new();
    for variant in augment(img, transforms) {
        set.extend(AveragingPyramid::build(&variant)?.extract_pairs());
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, p: &[u8]) -> GrayImage {
        GrayImage::new(w, h, p.to_vec()).unwrap()
    }

    #[test]
    fn constant_four_by_four() {
        let p = build_pyramid(&GrayImage::filled(4, 4, 7).unwrap()).unwrap();
        let dims: Vec<_> = p.levels().iter().map(GrayImage::dims).collect();
        assert_eq!(dims, [(4, 4), (2, 2), (1, 1)]);
        assert!(p.levels().iter().all(|l| l.pixels().iter().all(|&v| v == 7)));
    }

    #[test]
    fn single_block() {
        let p = build_pyramid(&img(2, 2, &[10, 20, 30, 40])).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.level(1).pixels(), &[25]);
        let ts = p.extract_pairs();
        assert_eq!(ts.pairs(), &[TrainPair { feature: 25, labels: [10, 20, 30, 40] }]);
        assert_eq!(ts.levels(), &[1]);
    }

    #[test]
    fn six_by_four_trace() {
        let src = GrayImage::from_fn(6, 4, |x, y| (x * 40 + y * 10) as u8).unwrap();
        let p = build_pyramid(&src).unwrap();
        let dims: Vec<_> = p.levels().iter().map(GrayImage::dims).collect();
        assert_eq!(dims, [(6, 4), (3, 2), (1, 1)]);
        let expected_top = p.level(1).crop(2, 2).unwrap().block_average().unwrap();
        assert_eq!(p.level(2), &expected_top);

        let ts = p.extract_pairs();
        assert_eq!(ts.len(), 7);
        assert_eq!(ts.levels(), &[1, 1, 1, 1, 1, 1, 2]);
        let l1 = p.level(1);
        let last = ts.pairs()[6];
        assert_eq!(last.labels, [l1.get(0, 0), l1.get(1, 0), l1.get(0, 1), l1.get(1, 1)]);
    }

    #[test]
    fn rejects_degenerate_sources() {
        assert!(build_pyramid(&GrayImage::filled(1, 1, 0).unwrap()).is_err());
        assert!(build_pyramid(&GrayImage::filled(1, 8, 0).unwrap()).is_err());
        assert!(build_pyramid(&GrayImage::filled(2, 3, 0).unwrap()).is_ok());
    }

    #[test]
    fn pairs_round_to_their_feature() {
        let src = GrayImage::from_fn(37, 23, |x, y| ((x * x * 7 + y * 13 + x * y) % 256) as u8).unwrap();
        let ts = build_pyramid(&src).unwrap().extract_pairs();
        for p in ts.pairs() {
            let sum: u32 = p.labels.iter().map(|&v| v as u32).sum();
            assert_eq!(((sum + 2) / 4) as u8, p.feature);
        }
    }

    #[test]
    fn csv_dump_format_and_round_trip() {
        let p = build_pyramid(&img(2, 2, &[10, 20, 30, 40])).unwrap();
        let mut buf = Vec::new();
        p.extract_pairs().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,tl,tr,bl,br,level\n25,10,20,30,40,1\n");

        let src = GrayImage::from_fn(16, 12, |x, y| ((x * 31 + y * 17) % 256) as u8).unwrap();
        let ts = build_pyramid(&src).unwrap().extract_pairs();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        dump_pairs(&ts, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), ts.len() + 1);
        assert_eq!(load_pairs(&path).unwrap(), ts);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let err = TrainingSet::read_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }

    #[test]
    fn augment_identity_and_constants() {
        let src = GrayImage::from_fn(4, 3, |x, y| (x + 4 * y) as u8).unwrap();
        assert_eq!(augment(&src, &BTreeSet::new()), vec![src.clone()]);

        let c = GrayImage::filled(5, 5, 3).unwrap();
        let all: BTreeSet<_> = Transform::ALL.into_iter().collect();
        let out = augment(&c, &all);
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|v| v == &c));
    }

    #[test]
    fn augmentation_multiplies_square_pair_count() {
        let src = GrayImage::from_fn(32, 32, |x, y| (x * 5 + y * 3) as u8).unwrap();
        let base = training_set(&src, &BTreeSet::new()).unwrap().len();
        let all = Transform::parse_list("all").unwrap();
        assert_eq!(training_set(&src, &all).unwrap().len(), 6 * base);
    }

    #[test]
    fn transform_list_parsing() {
        let set = Transform::parse_list("rot90, flip_h,rot90").unwrap();
        assert_eq!(set.into_iter().collect::<Vec<_>>(), [Transform::FlipH, Transform::Rot90]);
        assert!(Transform::parse_list("").unwrap().is_empty());
        assert!(Transform::parse_list("none").unwrap().is_empty());
        assert!(Transform::parse_list("scale").is_err());
    }
}
