//! Second-order gradient boosting with logistic loss.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{midpoint, Presorted, SortedColumns, Tree, TreeNode};
use crate::error::{Error, Result};
use crate::flowdata::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2_lambda: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// Minimum loss reduction required to split.
    pub gamma: f64,
    /// Fraction of rows sampled (without replacement) per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            l2_lambda: 1.0,
            min_child_weight: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if [self.l2_lambda, self.min_child_weight, self.gamma]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return Err(Error::Invalid(
                "l2_lambda, min_child_weight and gamma must be non-negative".into(),
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Invalid(format!(
                "subsample must lie in (0, 1], got {}",
                self.subsample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Leaf values are unscaled weights; the learning rate is applied at prediction.
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub rounds: usize,
    pub l2_lambda: f64,
    pub n_features: usize,
    /// Mean training log-loss before boosting and after each round.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.evaluate(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_score(row))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of raw scores, computed stably.
pub fn log_loss_raw(raw: &[f64], y: &[u8]) -> f64 {
    // −[y log σ(z) + (1−y) log(1−σ(z))] = softplus(z) − y·z
    let softplus = |z: f64| {
        if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        }
    };
    let total: f64 = raw.iter().zip(y).map(|(&z, &t)| softplus(z) - f64::from(t) * z).sum();
    total / raw.len() as f64
}

pub fn train_gbdt(d: &Dataset, params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    if d.n_rows() == 0 {
        return Err(Error::Empty("cannot boost on zero rows".into()));
    }
    d.require_both_classes()?;
    let n = d.n_rows();
    let y = d.y();
    let [neg, pos] = d.class_counts();
    let base_score = (pos as f64 / neg as f64).ln();

    let presorted = Presorted::new(d);
    let mut raw = vec![base_score; n];
    let mut train_loss = vec![log_loss_raw(&raw, y)];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let cols = if params.subsample < 1.0 {
            let m = ((n as f64 * params.subsample).round() as usize).max(1);
            let mut counts = vec![0u32; n];
            for i in sample(&mut rng, n, m) {
                counts[i] = 1;
            }
            presorted.expand(Some(&counts))
        } else {
            presorted.expand(None)
        };
        let tree = RegressionBuilder::new(d, params, &grad, &hess, cols).build();
        for (i, r) in raw.iter_mut().enumerate() {
            *r += params.learning_rate * tree.evaluate(d.row(i));
        }
        train_loss.push(log_loss_raw(&raw, y));
        trees.push(tree);
    }

    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        rounds: params.rounds,
        l2_lambda: params.l2_lambda,
        n_features: d.n_features(),
        train_loss,
    })
}

struct RegSplit {
    feature: usize,
    n_left: usize,
    threshold: f64,
    gain: f64,
}

struct RegressionBuilder<'a> {
    d: &'a Dataset,
    params: &'a GbdtParams,
    grad: &'a [f64],
    hess: &'a [f64],
    cols: SortedColumns,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<TreeNode>,
}

impl<'a> RegressionBuilder<'a> {
    fn new(d: &'a Dataset, params: &'a GbdtParams, grad: &'a [f64], hess: &'a [f64], cols: SortedColumns) -> Self {
        RegressionBuilder {
            d,
            params,
            grad,
            hess,
            cols,
            goes_left: vec![false; d.n_rows()],
            scratch: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn build(mut self) -> Tree {
        let m = self.cols.len();
        if self.d.n_features() == 0 {
            let (g, h) = self.sums(&(0..self.d.n_rows() as u32).collect::<Vec<_>>());
            return Tree::leaf(-g / (h + self.params.l2_lambda), 0, m);
        }
        self.grow(0, m, 0);
        Tree {
            n_features: self.d.n_features(),
            nodes: self.nodes,
        }
    }

    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        })
    }

    fn best_split_on(&self, feature: usize, rows: &[u32], g_total: f64, h_total: f64) -> Option<RegSplit> {
        let lambda = self.params.l2_lambda;
        let parent = g_total * g_total / (h_total + lambda);
        let mut gl = 0.0;
        let mut hl = 0.0;
        let mut best: Option<RegSplit> = None;
        for k in 0..rows.len().saturating_sub(1) {
            let r = rows[k] as usize;
            gl += self.grad[r];
            hl += self.hess[r];
            let v = self.d.value(r, feature);
            let next = self.d.value(rows[k + 1] as usize, feature);
            if next <= v {
                continue;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                continue;
            }
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - self.params.gamma;
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(RegSplit {
                    feature,
                    n_left: k + 1,
                    threshold: midpoint(v, next),
                    gain,
                });
            }
        }
        best
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let (g, h) = self.sums(&self.cols.cols[0][lo..hi]);
        let n = hi - lo;
        self.nodes.push(TreeNode::Leaf {
            value: -g / (h + self.params.l2_lambda),
            n_samples: n,
        });
        if depth >= self.params.max_depth || n < 2 {
            return id;
        }
        let mut best: Option<RegSplit> = None;
        for f in 0..self.d.n_features() {
            if let Some(s) = self.best_split_on(f, &self.cols.cols[f][lo..hi], g, h) {
                if best.as_ref().is_none_or(|b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return id;
        };
        for &r in &self.cols.cols[split.feature][lo..lo + split.n_left] {
            self.goes_left[r as usize] = true;
        }
        let mid = self.cols.partition(lo, hi, &self.goes_left, &mut self.scratch);
        for &r in &self.cols.cols[0][lo..mid] {
            self.goes_left[r as usize] = false;
        }
        let left = self.grow(lo, mid, depth + 1);
        let right = self.grow(mid, hi, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.gain,
            n_samples: n,
        };
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold_data(n: usize, offset: f64) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + offset) / n as f64).collect();
        let y = x.iter().map(|&v| u8::from(v >= 0.0)).collect();
        Dataset::new(vec!["x".into()], x, y).unwrap()
    }

    #[test]
    fn zero_rounds_predicts_prior() {
        let d = Dataset::new(vec!["x".into()], vec![0.0, 1.0, 2.0, 3.0], vec![0, 0, 0, 1]).unwrap();
        let m = train_gbdt(
            &d,
            &GbdtParams {
                rounds: 0,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        assert!(m.trees.is_empty());
        assert!((m.score(&[5.0]) - 0.25).abs() < 1e-15);

        let balanced = Dataset::new(vec!["x".into()], vec![0.0, 1.0], vec![0, 1]).unwrap();
        let m = train_gbdt(
            &balanced,
            &GbdtParams {
                rounds: 0,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        assert_eq!(m.score(&[0.0]), 0.5);
    }

    #[test]
    fn learns_threshold() {
        let train = threshold_data(1000, 0.0);
        let test = threshold_data(1000, 0.5);
        let m = train_gbdt(
            &train,
            &GbdtParams {
                rounds: 10,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let hits = (0..test.n_rows())
            .filter(|&i| u8::from(m.score(test.row(i)) >= 0.5) == test.y()[i])
            .count();
        assert_eq!(hits, test.n_rows());
    }

    #[test]
    fn loss_non_increasing() {
        let d = threshold_data(200, 0.0);
        let m = train_gbdt(
            &d,
            &GbdtParams {
                rounds: 20,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        assert_eq!(m.train_loss.len(), 21);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{w:?}");
        }
    }

    #[test]
    fn leaf_weight_formula() {
        // one round, depth 0: single leaf with w = −Σg/(Σh+λ)
        let d = Dataset::new(vec!["x".into()], vec![0.0, 1.0, 2.0, 3.0], vec![0, 1, 1, 1]).unwrap();
        let m = train_gbdt(
            &d,
            &GbdtParams {
                rounds: 1,
                max_depth: 0,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let p = 0.75f64;
        let g = 4.0 * p - 3.0;
        let h = 4.0 * p * (1.0 - p);
        let expected = -g / (h + 1.0);
        assert!((m.trees[0].evaluate(&[0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        let l = log_loss_raw(&[0.0, 0.0], &[0, 1]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bad_params_rejected() {
        let d = threshold_data(10, 0.0);
        let bad = GbdtParams {
            learning_rate: 0.0,
            ..GbdtParams::default()
        };
        assert!(train_gbdt(&d, &bad).is_err());
    }
}
