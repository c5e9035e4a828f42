//! Fully grown CART regression tree over one scalar feature with a
//! four-component output.
//!
//! Samples are routed `x <= threshold` to the left child and `x > threshold`
//! to the right. Candidate thresholds are midpoints between consecutive
//! distinct feature values, and each split minimizes the summed squared error
//! of both children over all four outputs (ties go to the smallest
//! threshold).
//!
//! Features are 8-bit, so fitting first collapses the samples into at most
//! 256 groups of integer label sums. Split selection on these sums is exact
//! integer arithmetic, which keeps tie-breaking reproducible.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::quantize;
use crate::pyramid::TrainingSet;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitParams {
    pub min_samples_split: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { min_samples_split: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        mean: [f64; 4],
        count: u64,
    },
    Internal {
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn count(&self) -> u64 {
        match self {
            TreeNode::Leaf { count, .. } => *count,
            TreeNode::Internal { left, right, .. } => left.count() + right.count(),
        }
    }

    fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A fitted tree. Immutable and `Sync`; predictions need no locking.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    root: TreeNode,
    n_samples: u64,
    n_leaves: usize,
    depth: usize,
}

/// Per-feature-value label statistics.
#[derive(Clone, Copy, Debug, Default)]
struct Group {
    value: u8,
    count: u64,
    sum: [u64; 4],
}

impl Group {
    fn add(&mut self, other: &Group) {
        self.count += other.count;
        for o in 0..4 {
            self.sum[o] += other.sum[o];
        }
    }

    fn sub(&self, other: &Group) -> Group {
        let mut g = *self;
        g.count -= other.count;
        for o in 0..4 {
            g.sum[o] -= other.sum[o];
        }
        g
    }

    /// Sum over outputs of squared label sums, the `s^2` in `SSE = ss - s^2/n`.
    fn sum_sq(&self) -> u128 {
        self.sum.iter().map(|&s| s as u128 * s as u128).sum()
    }

    fn mean(&self) -> [f64; 4] {
        self.sum.map(|s| s as f64 / self.count as f64)
    }
}

/// Between-child score `A/nL + B/nR` as an exact fraction. Minimizing child
/// SSE is equivalent to maximizing it because the total sum of squares is
/// fixed within a node.
#[derive(Clone, Copy, Debug)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(left: &Group, right: &Group) -> Self {
        let (nl, nr) = (left.count as u128, right.count as u128);
        SplitScore {
            num: left.sum_sq() * nr + right.sum_sq() * nl,
            den: nl * nr,
        }
    }

    fn better_than(&self, other: &SplitScore) -> bool {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a > b,
            // Only reachable for multi-million sample nodes.
            _ => self.num as f64 / self.den as f64 > other.num as f64 / other.den as f64,
        }
    }
}

impl RegressionTree {
    pub fn fit(ts: &TrainingSet, params: FitParams) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut table = [Group::default(); 256];
        for (i, g) in table.iter_mut().enumerate() {
            g.value = i as u8;
        }
        for pair in ts.pairs() {
            let g = &mut table[pair.feature as usize];
            g.count += 1;
            for o in 0..4 {
                g.sum[o] += pair.labels[o] as u64;
            }
        }
        let groups: Vec<Group> = table.into_iter().filter(|g| g.count > 0).collect();
        // prefix[i] = sum of groups[..i]
        let mut prefix = Vec::with_capacity(groups.len() + 1);
        prefix.push(Group::default());
        for g in &groups {
            let mut next = *prefix.last().unwrap();
            next.add(g);
            prefix.push(next);
        }
        let root = grow(&groups, &prefix, 0, groups.len(), params);
        let n_samples = root.count();
        let n_leaves = root.leaves();
        let depth = root.depth();
        Ok(RegressionTree {
            root,
            n_samples,
            n_leaves,
            depth,
        })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Unrounded leaf mean reached by `g`.
    pub fn predict(&self, g: f64) -> [f64; 4] {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { mean, .. } => return *mean,
                TreeNode::Internal {
                    threshold,
                    left,
                    right,
                } => node = if g <= *threshold { left } else { right },
            }
        }
    }

    /// Quantized prediction for every 8-bit input.
    pub fn lookup_table(&self) -> Box<[[u8; 4]; 256]> {
        let mut lut = Box::new([[0u8; 4]; 256]);
        for (g, out) in lut.iter_mut().enumerate() {
            *out = self.predict(g as f64).map(quantize);
        }
        lut
    }

    /// Leaf regions in left-to-right order as `(lower, upper]` threshold
    /// bounds; the outermost bounds are infinite.
    pub fn leaf_intervals(&self) -> Vec<(f64, f64, [f64; 4])> {
        fn walk(node: &TreeNode, lo: f64, hi: f64, out: &mut Vec<(f64, f64, [f64; 4])>) {
            match node {
                TreeNode::Leaf { mean, .. } => out.push((lo, hi, *mean)),
                TreeNode::Internal {
                    threshold,
                    left,
                    right,
                } => {
                    walk(left, lo, *threshold, out);
                    walk(right, *threshold, hi, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.n_leaves);
        walk(&self.root, f64::NEG_INFINITY, f64::INFINITY, &mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut nodes = Vec::with_capacity(2 * self.n_leaves);
        preorder(&self.root, &mut nodes);
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            n_samples: self.n_samples,
            nodes,
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedModel("missing format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::ModelVersion {
                found: version.min(u32::MAX as u64) as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::MalformedModel(e.to_string()))?;
        let mut records = file.nodes.into_iter();
        let root = rebuild(&mut records, f64::NEG_INFINITY, f64::INFINITY, 0)?;
        if records.next().is_some() {
            return Err(Error::MalformedModel("trailing nodes after the tree".into()));
        }
        let n_samples = root.count();
        if n_samples != file.n_samples {
            return Err(Error::MalformedModel(format!(
                "n_samples is {} but leaf counts sum to {n_samples}",
                file.n_samples
            )));
        }
        let n_leaves = root.leaves();
        let depth = root.depth();
        Ok(RegressionTree {
            root,
            n_samples,
            n_leaves,
            depth,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn grow(groups: &[Group], prefix: &[Group], lo: usize, hi: usize, params: FitParams) -> TreeNode {
    let total = prefix[hi].sub(&prefix[lo]);
    if hi - lo == 1 || (total.count as usize) < params.min_samples_split {
        return TreeNode::Leaf {
            mean: total.mean(),
            count: total.count,
        };
    }
    let mut best: Option<(usize, SplitScore)> = None;
    for split in lo + 1..hi {
        let left = prefix[split].sub(&prefix[lo]);
        let right = total.sub(&left);
        let score = SplitScore::new(&left, &right);
        // strict improvement keeps the smallest threshold on ties
        if best.as_ref().is_none_or(|(_, b)| score.better_than(b)) {
            best = Some((split, score));
        }
    }
    let (split, _) = best.expect("at least two groups");
    let threshold = (groups[split - 1].value as f64 + groups[split].value as f64) / 2.0;
    TreeNode::Internal {
        threshold,
        left: Box::new(grow(groups, prefix, lo, split, params)),
        right: Box::new(grow(groups, prefix, split, hi, params)),
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    n_samples: u64,
    nodes: Vec<NodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum NodeRecord {
    Split { threshold: f64, count: u64 },
    Leaf { mean: [f64; 4], count: u64 },
}

fn preorder(node: &TreeNode, out: &mut Vec<NodeRecord>) {
    match node {
        TreeNode::Leaf { mean, count } => out.push(NodeRecord::Leaf {
            mean: *mean,
            count: *count,
        }),
        TreeNode::Internal {
            threshold,
            left,
            right,
        } => {
            out.push(NodeRecord::Split {
                threshold: *threshold,
                count: node.count(),
            });
            preorder(left, out);
            preorder(right, out);
        }
    }
}

const MAX_DEPTH: usize = 512;

fn rebuild(
    records: &mut impl Iterator<Item = NodeRecord>,
    lo: f64,
    hi: f64,
    depth: usize,
) -> Result<TreeNode> {
    if depth > MAX_DEPTH {
        return Err(Error::MalformedModel("tree is too deep".into()));
    }
    match records.next() {
        None => Err(Error::MalformedModel("node list ends inside the tree".into())),
        Some(NodeRecord::Leaf { mean, count }) => {
            if count == 0 {
                return Err(Error::MalformedModel("leaf with zero samples".into()));
            }
            if mean.iter().any(|m| !(0.0..=255.0).contains(m)) {
                return Err(Error::MalformedModel(format!("leaf mean {mean:?} out of range")));
            }
            Ok(TreeNode::Leaf { mean, count })
        }
        Some(NodeRecord::Split { threshold, count }) => {
            if !threshold.is_finite() || threshold <= lo || threshold >= hi {
                return Err(Error::MalformedModel(format!(
                    "threshold {threshold} outside its region ({lo}, {hi})"
                )));
            }
            let left = rebuild(records, lo, threshold, depth + 1)?;
            let right = rebuild(records, threshold, hi, depth + 1)?;
            let node = TreeNode::Internal {
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            };
            if node.count() != count {
                return Err(Error::MalformedModel(format!(
                    "split count {count} does not match its children"
                )));
            }
            Ok(node)
        }
    }
}

/// Training-set coefficient of determination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub r2_per_output: [f64; 4],
    pub r2_uniform: f64,
    pub n_samples: u64,
    pub n_leaves: usize,
    pub depth: usize,
    pub fit_time_s: f64,
}

/// Per-output `R^2 = 1 - SSE/SST` over `ts`. An output with constant labels
/// scores 1 when the tree reproduces it exactly and 0 otherwise.
pub fn score_r2(tree: &RegressionTree, ts: &TrainingSet) -> Result<FitReport> {
    if ts.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n = ts.len() as f64;
    let mut mean = [0.0; 4];
    for p in ts.pairs() {
        for o in 0..4 {
            mean[o] += p.labels[o] as f64;
        }
    }
    mean = mean.map(|m| m / n);
    let mut sse = [0.0; 4];
    let mut sst = [0.0; 4];
    let mut cache: [Option<[f64; 4]>; 256] = [None; 256];
    for p in ts.pairs() {
        let pred = *cache[p.feature as usize].get_or_insert_with(|| tree.predict(p.feature as f64));
        for o in 0..4 {
            let y = p.labels[o] as f64;
            sse[o] += (y - pred[o]).powi(2);
            sst[o] += (y - mean[o]).powi(2);
        }
    }
    let mut r2 = [0.0; 4];
    for o in 0..4 {
        r2[o] = if sst[o] == 0.0 {
            if sse[o] == 0.0 { 1.0 } else { 0.0 }
        } else {
            1.0 - sse[o] / sst[o]
        };
    }
    Ok(FitReport {
        r2_per_output: r2,
        r2_uniform: r2.iter().sum::<f64>() / 4.0,
        n_samples: tree.n_samples(),
        n_leaves: tree.n_leaves(),
        depth: tree.depth(),
        fit_time_s: 0.0,
    })
}

/// Fits with default parameters and scores on the same set.
pub fn fit_and_score(ts: &TrainingSet) -> Result<(RegressionTree, FitReport)> {
    let start = Instant::now();
    let tree = RegressionTree::fit(ts, FitParams::default())?;
    let mut report = score_r2(&tree, ts)?;
    report.fit_time_s = start.elapsed().as_secs_f64();
    Ok((tree, report))
}
