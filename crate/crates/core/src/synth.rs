//! Synthetic flow-like data with a known set of informative features.
//!
//! Each informative feature is drawn from `N(∓separation/2, 1)` depending on
//! the class; noise features are `N(0, 1)` regardless of class. With `k`
//! informative features the Bayes error is `Φ(−separation·√k / 2)`, e.g.
//! about 0.13% for a single feature at 6σ.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    /// Fraction of rows in class 1.
    pub imbalance: f64,
    /// Probability that a row's label is flipped after its features are drawn.
    pub label_noise: f64,
    /// Distance between class means of each informative feature, in σ.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_rows: 1000,
            n_informative: 3,
            n_noise: 5,
            imbalance: 0.5,
            label_noise: 0.0,
            separation: 6.0,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 10 {
            return Err(Error::Invalid(format!("need at least 10 rows, got {}", self.n_rows)));
        }
        if self.n_informative + self.n_noise == 0 {
            return Err(Error::Invalid("need at least one feature".into()));
        }
        if !(self.imbalance > 0.0 && self.imbalance < 1.0) {
            return Err(Error::Invalid(format!(
                "imbalance must lie in (0, 1), got {}",
                self.imbalance
            )));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Invalid(format!(
                "label_noise must lie in [0, 1), got {}",
                self.label_noise
            )));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::Invalid(format!(
                "separation must be finite and non-negative, got {}",
                self.separation
            )));
        }
        let n1 = self.n_positive();
        if n1 == 0 || n1 == self.n_rows {
            return Err(Error::Invalid(format!(
                "imbalance {} leaves one class empty at {} rows",
                self.imbalance, self.n_rows
            )));
        }
        Ok(())
    }

    /// Rows labelled 1 before label noise.
    pub fn n_positive(&self) -> usize {
        (self.n_rows as f64 * self.imbalance).round() as usize
    }

    /// Analytic Bayes error with zero label noise and equal priors.
    pub fn bayes_error(&self) -> f64 {
        normal_cdf(-self.separation * (self.n_informative as f64).sqrt() / 2.0)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// Ground-truth informative feature names, in column order.
    pub informative: Vec<String>,
    pub noise: Vec<String>,
    pub spec: SynthSpec,
}

#[derive(Serialize)]
struct Truth<'a> {
    schema_version: u32,
    spec: &'a SynthSpec,
    informative: &'a [String],
    noise: &'a [String],
    bayes_error: f64,
}

impl SynthOutput {
    pub fn truth_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Truth {
            schema_version: crate::SCHEMA_VERSION,
            spec: &self.spec,
            informative: &self.informative,
            noise: &self.noise,
            bayes_error: self.spec.bayes_error(),
        })?)
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.n_informative + spec.n_noise;
    let n = spec.n_rows;

    // Column positions of informative features are scattered, not leading.
    let mut is_informative: Vec<bool> = (0..p).map(|j| j < spec.n_informative).collect();
    is_informative.shuffle(&mut rng);
    let width = (p - 1).to_string().len().max(2);
    let names: Vec<String> = (0..p).map(|j| format!("f{j:0width$}")).collect();

    let n1 = spec.n_positive();
    let mut y: Vec<u8> = (0..n).map(|i| u8::from(i >= n - n1)).collect();
    y.shuffle(&mut rng);

    let half = spec.separation / 2.0;
    let mut x = Vec::with_capacity(n * p);
    for &label in &y {
        let shift = if label == 1 { half } else { -half };
        for &inf in &is_informative {
            let z: f64 = rng.sample(StandardNormal);
            x.push(if inf { z + shift } else { z });
        }
    }
    if spec.label_noise > 0.0 {
        for label in &mut y {
            if rng.random::<f64>() < spec.label_noise {
                *label ^= 1;
            }
        }
    }

    let (informative, noise): (Vec<_>, Vec<_>) = names.iter().cloned().zip(&is_informative).partition(|(_, inf)| **inf);
    let dataset = Dataset::new(names, x, y)?;
    Ok(SynthOutput {
        dataset,
        informative: informative.into_iter().map(|(n, _)| n).collect(),
        noise: noise.into_iter().map(|(n, _)| n).collect(),
        spec: *spec,
    })
}
