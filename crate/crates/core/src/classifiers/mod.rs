//! Binary classifiers and a uniform training / inference contract.

pub mod forest;
pub mod gbdt;
pub mod knn;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestModel, ForestParams};
pub use gbdt::{train_gbdt, GbdtModel, GbdtParams};
pub use knn::{train_knn, KnnModel, KnnParams};
pub use tree::{train_tree, Tree, TreeNode, TreeParams};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;

/// Which model to train, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Gbdt(GbdtParams),
    Knn(KnnParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Gbdt(GbdtParams::default())
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Tree(_) => "tree",
            ClassifierSpec::Forest(_) => "forest",
            ClassifierSpec::Gbdt(_) => "gbdt",
            ClassifierSpec::Knn(_) => "knn",
        }
    }

    /// Default hyperparameters for a model kind name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "tree" => ClassifierSpec::Tree(TreeParams::default()),
            "forest" => ClassifierSpec::Forest(ForestParams::default()),
            "gbdt" => ClassifierSpec::Gbdt(GbdtParams::default()),
            "knn" => ClassifierSpec::Knn(KnnParams::default()),
            other => {
                return Err(Error::Config(format!(
                    "unknown model kind {other:?} (tree, forest, gbdt, knn)"
                )))
            }
        })
    }

    /// Same spec with its random seed replaced (no-op for deterministic models).
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ClassifierSpec::Forest(p) => ClassifierSpec::Forest(ForestParams { seed, ..p }),
            ClassifierSpec::Gbdt(p) => ClassifierSpec::Gbdt(GbdtParams { seed, ..p }),
            other => other,
        }
    }

    pub fn train(&self, d: &Dataset) -> Result<ClassifierModel> {
        Ok(match self {
            ClassifierSpec::Tree(p) => ClassifierModel::Tree(train_tree(d, p)?),
            ClassifierSpec::Forest(p) => ClassifierModel::Forest(train_forest(d, p)?),
            ClassifierSpec::Gbdt(p) => ClassifierModel::Gbdt(train_gbdt(d, p)?),
            ClassifierSpec::Knn(p) => ClassifierModel::Knn(train_knn(d, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    Tree(Tree),
    Forest(ForestModel),
    Gbdt(GbdtModel),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: Vec<u8>,
    /// Class-1 probabilities.
    pub scores: Vec<f64>,
}

impl ClassifierModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierModel::Tree(_) => "tree",
            ClassifierModel::Forest(_) => "forest",
            ClassifierModel::Gbdt(_) => "gbdt",
            ClassifierModel::Knn(_) => "knn",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ClassifierModel::Tree(t) => t.n_features,
            ClassifierModel::Forest(f) => f.n_features,
            ClassifierModel::Gbdt(g) => g.n_features,
            ClassifierModel::Knn(k) => k.n_features,
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            ClassifierModel::Tree(t) => t.evaluate(row),
            ClassifierModel::Forest(f) => f.score(row),
            ClassifierModel::Gbdt(g) => g.score(row),
            ClassifierModel::Knn(k) => k.score(row),
        }
    }

    /// `score ≥ 0.5`, except k-NN which needs a strict majority.
    fn label_for(&self, score: f64) -> u8 {
        match self {
            ClassifierModel::Knn(k) => u8::from(2 * (score * k.k as f64).round() as usize > k.k),
            _ => u8::from(score >= 0.5),
        }
    }

    /// Scores and labels for a row-major matrix with `n_features` columns.
    pub fn predict_matrix(&self, x: &[f64], n_features: usize) -> Result<Prediction> {
        if n_features == 0 {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: 0,
            });
        }
        if !x.len().is_multiple_of(n_features) {
            return Err(Error::Invalid(format!(
                "matrix of {} values is not a multiple of {n_features} columns",
                x.len()
            )));
        }
        self.predict_rows(x, n_features, x.len() / n_features)
    }

    pub fn predict(&self, d: &Dataset) -> Result<Prediction> {
        self.predict_rows(d.x(), d.n_features(), d.n_rows())
    }

    fn predict_rows(&self, x: &[f64], p: usize, n: usize) -> Result<Prediction> {
        if p != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: p,
            });
        }
        let (scores, labels) = (0..n)
            .into_par_iter()
            .map(|i| {
                let s = self.score_row(&x[i * p..(i + 1) * p]).clamp(0.0, 1.0);
                (s, self.label_for(s))
            })
            .unzip();
        Ok(Prediction { labels, scores })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_only_tree_scores() {
        let m = ClassifierModel::Tree(Tree::leaf(0.7, 2, 1));
        let p = m.predict_matrix(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(p.scores, vec![0.7, 0.7]);
        assert_eq!(p.labels, vec![1, 1]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ClassifierModel::Tree(Tree::leaf(0.7, 2, 1));
        assert!(matches!(
            m.predict_matrix(&[0.0; 3], 3),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let d = crate::synth::generate(&crate::synth::SynthSpec {
            n_rows: 200,
            seed: 1,
            ..Default::default()
        })
        .unwrap()
        .dataset;
        for spec in ["tree", "forest", "gbdt", "knn"] {
            let mut spec = ClassifierSpec::from_name(spec).unwrap();
            if let ClassifierSpec::Forest(p) = &mut spec {
                p.n_trees = 5;
            }
            if let ClassifierSpec::Gbdt(p) = &mut spec {
                p.rounds = 5;
            }
            let m = spec.train(&d).unwrap();
            let back = ClassifierModel::from_json(&m.to_json().unwrap()).unwrap();
            let a = m.predict(&d).unwrap();
            let b = back.predict(&d).unwrap();
            assert_eq!(a.labels, b.labels);
            let bits = |v: &[f64]| v.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.scores), bits(&b.scores), "{}", m.kind());
        }
    }

    #[test]
    fn spec_json_shape() {
        let s: ClassifierSpec = serde_json::from_str(r#"{"kind":"forest","n_trees":7}"#).unwrap();
        match s {
            ClassifierSpec::Forest(p) => assert_eq!((p.n_trees, p.mtry), (7, None)),
            other => panic!("{other:?}"),
        }
        assert!(ClassifierSpec::from_name("svm").is_err());
    }
}
