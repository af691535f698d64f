//! CART classification tree with exact Gini split search.
//!
//! Split candidates are compared with exact integer arithmetic, so the
//! documented tie-break (lowest feature index, then lowest threshold) is
//! deterministic even when two candidates have mathematically equal gain.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;

/// Arena node. Internal nodes route `x[feature] <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity (CART) or loss (boosting) reduction of this split.
        gain: f64,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, n_features: usize, n_samples: usize) -> Self {
        Tree {
            n_features,
            nodes: vec![TreeNode::Leaf { value, n_samples }],
        }
    }

    /// Leaf value reached by `row`.
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { feature, gain, .. } => Some((*feature, *gain)),
            TreeNode::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

/// Row ids sorted by each feature (ties by row id), computed once per dataset.
#[derive(Debug, Clone)]
pub(crate) struct Presorted {
    pub(crate) order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(d: &Dataset) -> Self {
        let n = d.n_rows();
        let order = (0..d.n_features())
            .map(|j| {
                let col = d.column(j);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { order }
    }

    /// Sorted columns of a sample in which row `r` appears `counts[r]` times.
    pub(crate) fn expand(&self, counts: Option<&[u32]>) -> SortedColumns {
        let cols = self
            .order
            .iter()
            .map(|col| match counts {
                None => col.clone(),
                Some(c) => col
                    .iter()
                    .flat_map(|&r| std::iter::repeat_n(r, c[r as usize] as usize))
                    .collect(),
            })
            .collect();
        SortedColumns { cols }
    }
}

/// Per-feature sorted sample arrays. Every tree node owns the same
/// contiguous range in each array.
pub(crate) struct SortedColumns {
    pub(crate) cols: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub(crate) fn len(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    /// Stable-partitions `lo..hi` of every column so rows with
    /// `goes_left[row]` come first. Returns the boundary.
    pub(crate) fn partition(&mut self, lo: usize, hi: usize, goes_left: &[bool], scratch: &mut Vec<u32>) -> usize {
        let mut mid = lo;
        for col in &mut self.cols {
            scratch.clear();
            let mut w = lo;
            for k in lo..hi {
                let r = col[k];
                if goes_left[r as usize] {
                    col[w] = r;
                    w += 1;
                } else {
                    scratch.push(r);
                }
            }
            col[w..hi].copy_from_slice(scratch);
            mid = w;
        }
        mid
    }
}

/// Threshold between two consecutive distinct sorted values.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

/// Exact Gini split score: Σ_children (c0² + c1²)/n_child, kept as a
/// fraction so candidates compare without rounding. Larger is better.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GiniScore {
    num: u128,
    den: u128,
}

impl GiniScore {
    pub(crate) fn new(left: [u64; 2], right: [u64; 2]) -> Self {
        let sq = |c: [u64; 2]| (c[0] as u128) * (c[0] as u128) + (c[1] as u128) * (c[1] as u128);
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        GiniScore {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    pub(crate) fn better_than(&self, other: &GiniScore) -> bool {
        self.num * other.den > other.num * self.den
    }

    /// Count-weighted impurity decrease n·G(parent) − nL·G(L) − nR·G(R).
    pub(crate) fn impurity_decrease(&self, parent: [u64; 2]) -> f64 {
        let n = (parent[0] + parent[1]) as f64;
        let parent_sq = (parent[0] as f64).powi(2) + (parent[1] as f64).powi(2);
        (self.num as f64 / self.den as f64 - parent_sq / n).max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GiniSplit {
    pub(crate) feature: usize,
    /// Number of samples (from the node start, in this feature's order) going left.
    pub(crate) n_left: usize,
    pub(crate) threshold: f64,
    pub(crate) score: GiniScore,
}

/// Best Gini split of `samples` (sorted by `feature`), or `None`.
pub(crate) fn best_gini_split_on(
    d: &Dataset,
    feature: usize,
    samples: &[u32],
    min_samples_leaf: usize,
) -> Option<GiniSplit> {
    let y = d.y();
    let total = class_counts(y, samples);
    let m = samples.len();
    let mut left = [0u64; 2];
    let mut best: Option<GiniSplit> = None;
    for k in 0..m.saturating_sub(1) {
        let r = samples[k] as usize;
        left[y[r] as usize] += 1;
        let v = d.value(r, feature);
        let next = d.value(samples[k + 1] as usize, feature);
        if next <= v {
            continue;
        }
        let n_left = k + 1;
        if n_left < min_samples_leaf || m - n_left < min_samples_leaf {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let score = GiniScore::new(left, right);
        if best.as_ref().is_none_or(|b| score.better_than(&b.score)) {
            best = Some(GiniSplit {
                feature,
                n_left,
                threshold: midpoint(v, next),
                score,
            });
        }
    }
    best
}

pub(crate) fn class_counts(y: &[u8], samples: &[u32]) -> [u64; 2] {
    let mut c = [0u64; 2];
    for &r in samples {
        c[y[r as usize] as usize] += 1;
    }
    c
}

/// Per-split feature subsampling for forests.
pub(crate) struct FeatureSampler<'a, R: Rng> {
    pub(crate) rng: &'a mut R,
    pub(crate) mtry: usize,
}

pub(crate) struct CartBuilder<'a, R: Rng> {
    d: &'a Dataset,
    params: TreeParams,
    cols: SortedColumns,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<TreeNode>,
    sampler: Option<FeatureSampler<'a, R>>,
}

impl<'a, R: Rng> CartBuilder<'a, R> {
    pub(crate) fn new(
        d: &'a Dataset,
        params: TreeParams,
        cols: SortedColumns,
        sampler: Option<FeatureSampler<'a, R>>,
    ) -> Self {
        CartBuilder {
            d,
            params,
            cols,
            goes_left: vec![false; d.n_rows()],
            scratch: Vec::new(),
            nodes: Vec::new(),
            sampler,
        }
    }

    pub(crate) fn build(mut self) -> Tree {
        let m = self.cols.len();
        if self.d.n_features() == 0 {
            let all: Vec<u32> = (0..self.d.n_rows() as u32).collect();
            let c = class_counts(self.d.y(), &all);
            return Tree::leaf(c[1] as f64 / (c[0] + c[1]).max(1) as f64, 0, m);
        }
        self.grow(0, m, 0);
        Tree {
            n_features: self.d.n_features(),
            nodes: self.nodes,
        }
    }

    fn candidate_features(&mut self, lo: usize, hi: usize) -> Vec<usize> {
        let p = self.d.n_features();
        let Some(sampler) = self.sampler.as_mut() else {
            return (0..p).collect();
        };
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(sampler.rng);
        // Visit features in random order until `mtry` non-constant ones are found.
        let mut picked = Vec::with_capacity(sampler.mtry);
        for f in perm {
            if picked.len() >= sampler.mtry {
                break;
            }
            let col = &self.cols.cols[f];
            let first = self.d.value(col[lo] as usize, f);
            let last = self.d.value(col[hi - 1] as usize, f);
            if last > first {
                picked.push(f);
            }
        }
        picked.sort_unstable();
        picked
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = class_counts(self.d.y(), &self.cols.cols[0][lo..hi]);
        let n = hi - lo;
        self.nodes.push(TreeNode::Leaf {
            value: counts[1] as f64 / n as f64,
            n_samples: n,
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }

        let mut best: Option<GiniSplit> = None;
        for f in self.candidate_features(lo, hi) {
            let split = best_gini_split_on(self.d, f, &self.cols.cols[f][lo..hi], self.params.min_samples_leaf);
            if let Some(s) = split {
                if best.as_ref().is_none_or(|b| s.score.better_than(&b.score)) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return id;
        };

        let col = &self.cols.cols[split.feature];
        for &r in &col[lo..lo + split.n_left] {
            self.goes_left[r as usize] = true;
        }
        let mid = self.cols.partition(lo, hi, &self.goes_left, &mut self.scratch);
        for &r in &self.cols.cols[0][lo..mid] {
            self.goes_left[r as usize] = false;
        }
        debug_assert_eq!(mid - lo, split.n_left);

        let left = self.grow(lo, mid, depth + 1);
        let right = self.grow(mid, hi, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.score.impurity_decrease(counts),
            n_samples: n,
        };
        id
    }
}

/// Trains a CART tree on every row of `d`.
pub fn train_tree(d: &Dataset, params: &TreeParams) -> Result<Tree> {
    if d.n_rows() == 0 {
        return Err(Error::Empty("cannot train a tree on zero rows".into()));
    }
    let cols = Presorted::new(d).expand(None);
    Ok(CartBuilder::<rand_chacha::ChaCha8Rng>::new(d, *params, cols, None).build())
}
