//! Brute-force k-nearest neighbours under Euclidean distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_features: usize,
    /// Row-major training matrix.
    pub x: Vec<f64>,
    pub y: Vec<u8>,
}

pub fn train_knn(d: &Dataset, params: &KnnParams) -> Result<KnnModel> {
    let k = params.k;
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    if k > d.n_rows() {
        return Err(Error::Invalid(format!(
            "k = {k} exceeds the {} training rows",
            d.n_rows()
        )));
    }
    if k.is_multiple_of(2) {
        log::warn!("even k = {k}: tied votes resolve to class 0");
    }
    Ok(KnnModel {
        k,
        n_features: d.n_features(),
        x: d.x().to_vec(),
        y: d.y().to_vec(),
    })
}

impl KnnModel {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Training-row indices of the k nearest neighbours, nearest first;
    /// equal distances resolve to the lower index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let p = self.n_features;
        let mut dist: Vec<(f64, usize)> = (0..self.n_rows())
            .map(|i| {
                let row = &self.x[i * p..(i + 1) * p];
                let d2: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
            dist.truncate(self.k);
        }
        dist.sort_by(by_dist);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Fraction of the k neighbours labelled 1.
    pub fn score(&self, query: &[f64]) -> f64 {
        let ones = self.neighbours(query).iter().filter(|&&i| self.y[i] == 1).count();
        ones as f64 / self.k as f64
    }

    /// Strict-majority vote, so a tie goes to class 0.
    pub fn label(&self, query: &[f64]) -> u8 {
        let ones = self.neighbours(query).iter().filter(|&&i| self.y[i] == 1).count();
        u8::from(2 * ones > self.k)
    }
}
