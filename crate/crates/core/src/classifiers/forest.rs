//! Random forest of CART trees with bootstrap sampling and per-split
//! feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{CartBuilder, FeatureSampler, Presorted, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::flowdata::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means ⌊√p⌋ (at least 1).
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Seed each tree's bootstrap and feature sampling was drawn from.
    pub tree_seeds: Vec<u64>,
    pub mtry: usize,
    pub n_features: usize,
}

impl ForestModel {
    /// Fraction of trees voting for class 1.
    pub fn score(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.evaluate(row) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

/// Seed for tree `i`, independent of how many threads build the forest.
fn tree_seed(base: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(i as u64 + 1);
    rng.random()
}

pub fn train_forest(d: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    if d.n_rows() == 0 {
        return Err(Error::Empty("cannot train a forest on zero rows".into()));
    }
    d.require_both_classes()?;
    if params.n_trees == 0 {
        return Err(Error::Invalid("forest needs at least one tree".into()));
    }
    let n = d.n_rows();
    let p = d.n_features();
    let mtry = params.resolved_mtry(p);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let presorted = Presorted::new(d);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|i| tree_seed(params.seed, i)).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols = if params.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                presorted.expand(Some(&counts))
            } else {
                presorted.expand(None)
            };
            let sampler = (mtry < p).then_some(FeatureSampler { rng: &mut rng, mtry });
            CartBuilder::new(d, tree_params, cols, sampler).build()
        })
        .collect();
    Ok(ForestModel {
        trees,
        tree_seeds,
        mtry,
        n_features: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::tree::train_tree;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn single_full_tree_matches_cart() {
        let d = generate(&SynthSpec {
            n_rows: 300,
            n_informative: 2,
            n_noise: 3,
            separation: 1.0,
            seed: 5,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset;
        let f = train_forest(
            &d,
            &ForestParams {
                n_trees: 1,
                bootstrap: false,
                mtry: Some(d.n_features()),
                ..ForestParams::default()
            },
        )
        .unwrap();
        let t = train_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn deterministic_per_seed() {
        let d = generate(&SynthSpec {
            n_rows: 200,
            seed: 9,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset;
        let params = ForestParams {
            n_trees: 10,
            seed: 3,
            ..ForestParams::default()
        };
        let a = train_forest(&d, &params).unwrap();
        let b = train_forest(&d, &params).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&d, &ForestParams { seed: 4, ..params }).unwrap();
        assert_ne!(a.tree_seeds, c.tree_seeds);
    }

    #[test]
    fn mtry_default_is_floor_sqrt() {
        let p = ForestParams::default();
        assert_eq!(p.resolved_mtry(10), 3);
        assert_eq!(p.resolved_mtry(1), 1);
        assert_eq!(p.resolved_mtry(80), 8);
    }

    #[test]
    fn vote_fraction() {
        let leaf = |v| Tree::leaf(v, 1, 1);
        let m = ForestModel {
            trees: vec![leaf(1.0), leaf(0.9), leaf(0.1)],
            tree_seeds: vec![0, 1, 2],
            mtry: 1,
            n_features: 1,
        };
        assert!((m.score(&[0.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new(vec!["a".into()], vec![1.0, 2.0], vec![1, 1]).unwrap();
        assert!(train_forest(&d, &ForestParams::default()).is_err());
    }
}
