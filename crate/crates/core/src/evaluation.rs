//! Stratified splitting, k-fold cross-validation and confusion-matrix metrics.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierModel, ClassifierSpec};
use crate::error::{Error, Result};
use crate::flowdata::Dataset;

/// Row indices of each class, shuffled by `rng` (class 0 first).
fn shuffled_classes(y: &[u8], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut classes = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        classes[label as usize].push(i);
    }
    for c in &mut classes {
        c.shuffle(rng);
    }
    classes
}

/// Per-class test counts: `class_count × fraction` with largest-remainder
/// rounding so the counts sum to `round(n × fraction)`.
pub fn stratified_test_counts(class_counts: [usize; 2], test_fraction: f64) -> [usize; 2] {
    let n: usize = class_counts.iter().sum();
    let quotas = class_counts.map(|c| c as f64 * test_fraction);
    let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
    let target = (n as f64 * test_fraction).round() as usize;
    let mut order = [0usize, 1];
    // Larger fractional part first; equal parts favour class 0.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - counts[a] as f64;
        let fb = quotas[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(2 * missing.max(1)) {
        if missing == 0 {
            break;
        }
        if counts[c] < class_counts[c] {
            counts[c] += 1;
            missing -= 1;
        }
    }
    counts
}

/// `(train, test)` row indices, each in ascending order.
pub fn stratified_split_indices(y: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut counts = [0usize; 2];
    for &label in y {
        counts[label as usize] += 1;
    }
    if let Some(c) = (0..2).find(|&c| counts[c] < 2) {
        return Err(Error::SingleClass(format!(
            "class {c} has {} rows; a stratified split needs at least 2",
            counts[c]
        )));
    }
    let test_counts = stratified_test_counts(counts, test_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = shuffled_classes(y, &mut rng);
    let mut is_test = vec![false; y.len()];
    for (members, &t) in classes.iter().zip(&test_counts) {
        for &i in &members[..t] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

pub fn stratified_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(d.y(), test_fraction, seed)?;
    Ok((d.subset_rows(&train), d.subset_rows(&test)))
}

/// Fold index of every row: classes are shuffled, concatenated and dealt
/// round-robin, so per-class and total fold sizes differ by at most one.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut counts = [0usize; 2];
    for &label in y {
        counts[label as usize] += 1;
    }
    if let Some(c) = (0..2).find(|&c| counts[c] < k) {
        return Err(Error::Invalid(format!(
            "class {c} has {} rows, fewer than {k} folds",
            counts[c]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = shuffled_classes(y, &mut rng);
    let mut fold = vec![0; y.len()];
    for (pos, &i) in classes.iter().flatten().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p != 0, a != 0) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    /// Quantities whose denominator was zero and were reported as 0.
    pub degenerate: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if den == 0 {
        degenerate.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if p + r == 0.0 {
        degenerate.push(name.to_string());
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Positive-class and support-weighted one-vs-rest metrics. Zero
/// denominators yield 0 and are listed in `degenerate`.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("no evaluated rows".into()));
    }
    let mut deg = Vec::new();
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;

    let p1 = ratio(cm.tp, cm.tp + cm.fp, "precision_pos", &mut deg);
    let r1 = ratio(cm.tp, cm.tp + cm.fn_, "recall_pos", &mut deg);
    let f1 = harmonic(p1, r1, "f1_pos", &mut deg);

    let p0 = ratio(cm.tn, cm.tn + cm.fn_, "precision_neg", &mut deg);
    let r0 = ratio(cm.tn, cm.tn + cm.fp, "recall_neg", &mut deg);
    let f0 = harmonic(p0, r0, "f1_neg", &mut deg);

    let s1 = (cm.tp + cm.fn_) as f64;
    let s0 = (cm.tn + cm.fp) as f64;
    let weighted = |a: f64, b: f64| (s0 * a + s1 * b) / total as f64;
    Ok(Metrics {
        accuracy,
        precision_pos: p1,
        recall_pos: r1,
        f1_pos: f1,
        precision_weighted: weighted(p0, p1),
        recall_weighted: weighted(r0, r1),
        f1_weighted: weighted(f0, f1),
        degenerate: deg,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MseMode {
    /// Squared error of the predicted 0/1 label.
    #[default]
    HardLabel,
    /// Squared error of the class-1 probability (Brier score).
    Probability,
}

/// Mean of `(value − actual)²`; `values` are labels or probabilities.
pub fn mse(values: &[f64], actual: &[u8]) -> Result<f64> {
    if values.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: actual.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::Empty("mse of zero rows".into()));
    }
    let total: f64 = values
        .iter()
        .zip(actual)
        .map(|(v, &a)| (v - f64::from(a)).powi(2))
        .sum();
    Ok(total / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub model_kind: String,
    pub n_test: u64,
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mse: f64,
    pub mse_mode: MseMode,
    /// Wall-clock training time, when known. Kept out of the JSON and the
    /// written reports so reruns are byte-identical.
    #[serde(skip_serializing, default)]
    pub train_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_fold_accuracies: Option<Vec<f64>>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Markdown table: weighted and attack-class metrics, time and MSE.
    pub fn to_table(&self) -> String {
        let m = &self.metrics;
        let mut s = String::from("| Metric | Weighted | Attack class |\n|---|---|---|\n");
        let _ = writeln!(s, "| Accuracy | {:.5} | |", m.accuracy);
        let _ = writeln!(
            s,
            "| Precision | {:.5} | {:.5} |",
            m.precision_weighted, m.precision_pos
        );
        let _ = writeln!(s, "| Recall | {:.5} | {:.5} |", m.recall_weighted, m.recall_pos);
        let _ = writeln!(s, "| F1-Score | {:.5} | {:.5} |", m.f1_weighted, m.f1_pos);
        if let Some(t) = self.train_seconds {
            let _ = writeln!(s, "| Training Time | {t:.2} s | |");
        }
        let _ = writeln!(s, "| Mean Squared Error | {:.5} | |", self.mse);
        if let Some(folds) = &self.cv_fold_accuracies {
            let list: Vec<String> = folds.iter().map(|a| format!("{a:.5}")).collect();
            let _ = writeln!(s, "| CV fold accuracy | {} | |", list.join(", "));
        }
        s
    }
}

/// Trains `spec` on `train`, timing only the training call.
pub fn timed_train(spec: &ClassifierSpec, train: &Dataset) -> Result<(ClassifierModel, f64)> {
    let start = Instant::now();
    let model = spec.train(train)?;
    Ok((model, start.elapsed().as_secs_f64()))
}

pub fn evaluate(
    model: &ClassifierModel,
    test: &Dataset,
    train_seconds: Option<f64>,
    mse_mode: MseMode,
) -> Result<EvalReport> {
    let pred = model.predict(test)?;
    let cm = confusion(&pred.labels, test.y())?;
    let values: Vec<f64> = match mse_mode {
        MseMode::HardLabel => pred.labels.iter().map(|&l| f64::from(l)).collect(),
        MseMode::Probability => pred.scores.clone(),
    };
    Ok(EvalReport {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: None,
        model_kind: model.kind().to_string(),
        n_test: cm.total(),
        confusion: cm,
        metrics: metrics(&cm)?,
        mse: mse(&values, test.y())?,
        mse_mode,
        train_seconds,
        cv_fold_accuracies: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    #[serde(skip_serializing, default)]
    pub fold_train_seconds: Vec<f64>,
}

/// Stratified k-fold CV; folds train in parallel and report in fold order.
pub fn kfold_cv(d: &Dataset, k: usize, spec: &ClassifierSpec, seed: u64) -> Result<CvReport> {
    let fold = stratified_folds(d.y(), k, seed)?;
    let results: Vec<(f64, f64)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..d.n_rows()).partition(|&i| fold[i] == f);
            let (model, secs) = timed_train(spec, &d.subset_rows(&train_idx))?;
            let test = d.subset_rows(&test_idx);
            let pred = model.predict(&test)?;
            let cm = confusion(&pred.labels, test.y())?;
            Ok(((cm.tp + cm.tn) as f64 / cm.total() as f64, secs))
        })
        .collect::<Result<_>>()?;
    let mut fold_sizes = vec![0; k];
    for &f in &fold {
        fold_sizes[f] += 1;
    }
    Ok(CvReport {
        schema_version: crate::SCHEMA_VERSION,
        k,
        seed,
        fold_sizes,
        fold_accuracies: results.iter().map(|r| r.0).collect(),
        fold_train_seconds: results.iter().map(|r| r.1).collect(),
    })
}
