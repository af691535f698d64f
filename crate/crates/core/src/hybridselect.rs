//! Hybrid correlation / information-gain feature selection.
//!
//! Three passes over the per-feature statistics of [`CorrelationTable`]:
//!
//! 1. **Pearson.** μ⁺ and μ⁻ are the means of the strictly positive and the
//!    strictly negative Pearson values. A feature joins `a1` when its value
//!    is positive and ≥ μ⁺, or negative and ≤ μ⁻. Everything else is `a2`.
//! 2. **Rank rescue.** Over the features of `a2` only, the positive and
//!    negative means of Spearman and of Kendall are taken separately and
//!    averaged: μsk⁺ = (μkendall⁺ + μspearman⁺)/2, likewise for μsk⁻. A
//!    feature of `a2` joins `a3` when s = (spearman + kendall)/2 is positive
//!    and ≥ μsk⁺, or negative and ≤ μsk⁻. Then `a4 = a1 ∪ a3`.
//! 3. **Information gain.** Over *all* features, `a5` holds those whose
//!    information gain is strictly above the mean.
//!
//! The selection is `a6 = a4 ∩ a5`.
//!
//! Zero and undefined statistics are neither positive nor negative: they
//! never enter a mean and are never admitted by steps 1–2. A mean over an
//! empty subset is undefined and its branch admits nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;
use crate::numeric::mean;
use crate::stats::{correlation_table, CorrelationTable};

/// Which features the step-2 component means are taken over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMeanScope {
    /// Only the features rejected by step 1.
    #[default]
    Rejected,
    /// Every feature.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub bins: usize,
    /// `≥` against the positive means (else `>`).
    pub inclusive_positive: bool,
    /// `≤` against the negative means (else `<`).
    pub inclusive_negative: bool,
    /// Information gain must be strictly above its mean (else `≥`).
    pub ig_strict: bool,
    pub rank_mean_scope: RankMeanScope,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            bins: 10,
            inclusive_positive: true,
            inclusive_negative: true,
            ig_strict: true,
            rank_mean_scope: RankMeanScope::Rejected,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        Ok(())
    }

    fn admits(&self, value: Option<f64>, mu_pos: Option<f64>, mu_neg: Option<f64>) -> Option<Sign> {
        let v = value?;
        if v > 0.0 {
            let mu = mu_pos?;
            let ok = if self.inclusive_positive { v >= mu } else { v > mu };
            ok.then_some(Sign::Positive)
        } else if v < 0.0 {
            let mu = mu_neg?;
            let ok = if self.inclusive_negative { v <= mu } else { v < mu };
            ok.then_some(Sign::Negative)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Positive,
    Negative,
}

/// How the correlation steps treated a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationRule {
    PearsonAbovePositiveMean,
    PearsonBelowNegativeMean,
    RankAbovePositiveMean,
    RankBelowNegativeMean,
    /// Rejected by both steps; the averaged rank statistic was defined and
    /// nonzero but did not reach its mean.
    RankBelowThreshold,
    /// Rejected by both steps; the averaged rank statistic was exactly 0.
    RankZero,
    /// Rejected by both steps; Spearman or Kendall undefined (constant feature).
    RankUndefined,
}

impl CorrelationRule {
    pub fn admitted(self) -> bool {
        matches!(
            self,
            CorrelationRule::PearsonAbovePositiveMean
                | CorrelationRule::PearsonBelowNegativeMean
                | CorrelationRule::RankAbovePositiveMean
                | CorrelationRule::RankBelowNegativeMean
        )
    }
}

/// The first rule that decided a feature's fate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Selected,
    RejectedByCorrelation,
    RejectedByInfoGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecision {
    pub feature: String,
    pub correlation_rule: CorrelationRule,
    /// Averaged Spearman/Kendall value, recorded for features of `a2`.
    pub rank_average: Option<f64>,
    pub info_gain_pass: bool,
    pub fate: Fate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub mu_pearson_pos: Option<f64>,
    pub mu_pearson_neg: Option<f64>,
    pub mu_spearman_pos: Option<f64>,
    pub mu_spearman_neg: Option<f64>,
    pub mu_kendall_pos: Option<f64>,
    pub mu_kendall_neg: Option<f64>,
    pub mu_sk_pos: Option<f64>,
    pub mu_sk_neg: Option<f64>,
    pub mu_ig: Option<f64>,
}

/// Complete record of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub schema_version: u32,
    pub config: SelectionConfig,
    pub a1: Vec<String>,
    pub a2: Vec<String>,
    pub a3: Vec<String>,
    pub a4: Vec<String>,
    pub a5: Vec<String>,
    pub a6: Vec<String>,
    pub thresholds: Thresholds,
    pub decisions: Vec<FeatureDecision>,
    pub table: CorrelationTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl SelectionTrace {
    /// The selected features, in original order.
    pub fn selected(&self) -> &[String] {
        &self.a6
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the set identities every trace must satisfy.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let all: Vec<&String> = self.table.features.iter().map(|f| &f.feature).collect();
        let has = |set: &[String], f: &String| set.contains(f);
        for f in &all {
            if has(&self.a1, f) == has(&self.a2, f) {
                return Err(format!("`{f}` must be in exactly one of a1, a2"));
            }
            if has(&self.a3, f) && !has(&self.a2, f) {
                return Err(format!("`{f}` in a3 but not a2"));
            }
            if has(&self.a4, f) != (has(&self.a1, f) || has(&self.a3, f)) {
                return Err(format!("a4 ≠ a1 ∪ a3 at `{f}`"));
            }
            if has(&self.a6, f) != (has(&self.a4, f) && has(&self.a5, f)) {
                return Err(format!("a6 ≠ a4 ∩ a5 at `{f}`"));
            }
        }
        for set in [&self.a1, &self.a2, &self.a3, &self.a4, &self.a5, &self.a6] {
            let pos: Vec<usize> = set
                .iter()
                .map(|f| all.iter().position(|a| *a == f).ok_or(format!("unknown feature `{f}`")))
                .collect::<std::result::Result<_, _>>()?;
            if pos.windows(2).any(|w| w[0] >= w[1]) {
                return Err("set not in original feature order".into());
            }
        }
        Ok(())
    }
}

fn mean_of_sign(values: impl Iterator<Item = Option<f64>>, positive: bool) -> Option<f64> {
    let picked: Vec<f64> = values
        .flatten()
        .filter(|&v| if positive { v > 0.0 } else { v < 0.0 })
        .collect();
    mean(&picked)
}

fn names_where<'a>(table: &'a CorrelationTable, keep: impl Fn(usize) -> bool + 'a) -> Vec<String> {
    table
        .features
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, f)| f.feature.clone())
        .collect()
}

/// Step 1: returns `(a1, a2, μ⁺, μ⁻)`.
pub fn step1_pearson(
    table: &CorrelationTable,
    cfg: &SelectionConfig,
) -> (Vec<String>, Vec<String>, Option<f64>, Option<f64>) {
    let p = || table.features.iter().map(|f| f.pearson);
    let mu_pos = mean_of_sign(p(), true);
    let mu_neg = mean_of_sign(p(), false);
    let admitted: Vec<bool> = table
        .features
        .iter()
        .map(|f| cfg.admits(f.pearson, mu_pos, mu_neg).is_some())
        .collect();
    let a1 = names_where(table, |i| admitted[i]);
    let a2 = names_where(table, |i| !admitted[i]);
    (a1, a2, mu_pos, mu_neg)
}

/// Step 2 result.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRescue {
    pub a3: Vec<String>,
    pub mu_spearman_pos: Option<f64>,
    pub mu_spearman_neg: Option<f64>,
    pub mu_kendall_pos: Option<f64>,
    pub mu_kendall_neg: Option<f64>,
    pub mu_sk_pos: Option<f64>,
    pub mu_sk_neg: Option<f64>,
}

fn average_of(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? + b?) / 2.0)
}

/// Step 2 over the features named in `a2`.
pub fn step2_rank_rescue(table: &CorrelationTable, a2: &[String], cfg: &SelectionConfig) -> RankRescue {
    let in_a2: Vec<bool> = table.features.iter().map(|f| a2.contains(&f.feature)).collect();
    let scope = |i: usize| match cfg.rank_mean_scope {
        RankMeanScope::Rejected => in_a2[i],
        RankMeanScope::All => true,
    };
    let spearman = || {
        table
            .features
            .iter()
            .enumerate()
            .filter(move |(i, _)| scope(*i))
            .map(|(_, f)| f.spearman)
    };
    let kendall = || {
        table
            .features
            .iter()
            .enumerate()
            .filter(move |(i, _)| scope(*i))
            .map(|(_, f)| f.kendall)
    };
    let mu_spearman_pos = mean_of_sign(spearman(), true);
    let mu_spearman_neg = mean_of_sign(spearman(), false);
    let mu_kendall_pos = mean_of_sign(kendall(), true);
    let mu_kendall_neg = mean_of_sign(kendall(), false);
    let mu_sk_pos = average_of(mu_kendall_pos, mu_spearman_pos);
    let mu_sk_neg = average_of(mu_kendall_neg, mu_spearman_neg);
    let a3 = names_where(table, |i| {
        let f = &table.features[i];
        in_a2[i]
            && cfg
                .admits(average_of(f.spearman, f.kendall), mu_sk_pos, mu_sk_neg)
                .is_some()
    });
    RankRescue {
        a3,
        mu_spearman_pos,
        mu_spearman_neg,
        mu_kendall_pos,
        mu_kendall_neg,
        mu_sk_pos,
        mu_sk_neg,
    }
}

/// Step 3: returns `(a5, μ_ig)`.
pub fn step3_infogain(table: &CorrelationTable, cfg: &SelectionConfig) -> (Vec<String>, Option<f64>) {
    let ig: Vec<f64> = table.features.iter().map(|f| f.info_gain).collect();
    let mu = mean(&ig);
    let a5 = match mu {
        Some(mu) => names_where(table, |i| if cfg.ig_strict { ig[i] > mu } else { ig[i] >= mu }),
        None => Vec::new(),
    };
    (a5, mu)
}

/// Runs all three steps on a precomputed table.
pub fn select_from_table(table: CorrelationTable, cfg: &SelectionConfig) -> Result<SelectionTrace> {
    cfg.validate()?;
    if table.is_empty() {
        return Err(Error::Empty("no features to select from".into()));
    }
    let (a1, a2, mu_pearson_pos, mu_pearson_neg) = step1_pearson(&table, cfg);
    let rescue = step2_rank_rescue(&table, &a2, cfg);
    let (a5, mu_ig) = step3_infogain(&table, cfg);

    let mut a4 = Vec::new();
    let mut a6 = Vec::new();
    let mut decisions = Vec::with_capacity(table.len());
    for f in &table.features {
        let name = &f.feature;
        let rank_average = average_of(f.spearman, f.kendall);
        let rule = match cfg.admits(f.pearson, mu_pearson_pos, mu_pearson_neg) {
            Some(Sign::Positive) => CorrelationRule::PearsonAbovePositiveMean,
            Some(Sign::Negative) => CorrelationRule::PearsonBelowNegativeMean,
            None => match cfg.admits(rank_average, rescue.mu_sk_pos, rescue.mu_sk_neg) {
                Some(Sign::Positive) => CorrelationRule::RankAbovePositiveMean,
                Some(Sign::Negative) => CorrelationRule::RankBelowNegativeMean,
                None => match rank_average {
                    None => CorrelationRule::RankUndefined,
                    Some(0.0) => CorrelationRule::RankZero,
                    Some(_) => CorrelationRule::RankBelowThreshold,
                },
            },
        };
        let in_a4 = a1.contains(name) || rescue.a3.contains(name);
        debug_assert_eq!(in_a4, rule.admitted());
        let ig_pass = a5.contains(name);
        if in_a4 {
            a4.push(name.clone());
            if ig_pass {
                a6.push(name.clone());
            }
        }
        let fate = if !in_a4 {
            Fate::RejectedByCorrelation
        } else if !ig_pass {
            Fate::RejectedByInfoGain
        } else {
            Fate::Selected
        };
        decisions.push(FeatureDecision {
            feature: name.clone(),
            correlation_rule: rule,
            rank_average: if a2.contains(name) { rank_average } else { None },
            info_gain_pass: ig_pass,
            fate,
        });
    }

    Ok(SelectionTrace {
        schema_version: crate::SCHEMA_VERSION,
        config: *cfg,
        a1,
        a2,
        a3: rescue.a3,
        a4,
        a5,
        a6,
        thresholds: Thresholds {
            mu_pearson_pos,
            mu_pearson_neg,
            mu_spearman_pos: rescue.mu_spearman_pos,
            mu_spearman_neg: rescue.mu_spearman_neg,
            mu_kendall_pos: rescue.mu_kendall_pos,
            mu_kendall_neg: rescue.mu_kendall_neg,
            mu_sk_pos: rescue.mu_sk_pos,
            mu_sk_neg: rescue.mu_sk_neg,
            mu_ig,
        },
        decisions,
        table,
        config_hash: None,
    })
}

/// Computes the correlation table of `d` and selects features from it.
pub fn select(d: &Dataset, cfg: &SelectionConfig) -> Result<SelectionTrace> {
    cfg.validate()?;
    if d.n_features() == 0 {
        return Err(Error::Empty("dataset has no features".into()));
    }
    d.require_both_classes()?;
    let table = correlation_table(d, cfg.bins)?;
    select_from_table(table, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::FeatureStats;

    type Row<'a> = (&'a str, Option<f64>, Option<f64>, Option<f64>, f64);

    fn table(rows: &[Row]) -> CorrelationTable {
        CorrelationTable {
            bins: 10,
            label_entropy: 1.0,
            features: rows
                .iter()
                .map(|&(n, p, s, k, ig)| FeatureStats {
                    feature: n.into(),
                    pearson: p,
                    spearman: s,
                    kendall: k,
                    info_gain: ig,
                })
                .collect(),
        }
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn step1_worked_example() {
        let t = table(&[
            ("A", Some(0.9), None, None, 0.0),
            ("B", Some(0.1), None, None, 0.0),
            ("C", Some(-0.8), None, None, 0.0),
            ("D", Some(-0.1), None, None, 0.0),
        ]);
        let (a1, a2, pos, neg) = step1_pearson(&t, &SelectionConfig::default());
        assert!((pos.unwrap() - 0.5).abs() < 1e-15);
        assert!((neg.unwrap() + 0.45).abs() < 1e-15);
        assert_eq!(a1, names(&["A", "C"]));
        assert_eq!(a2, names(&["B", "D"]));
    }

    #[test]
    fn step1_equal_values_all_admitted() {
        let t = table(&[
            ("A", Some(0.5), None, None, 0.0),
            ("B", Some(0.5), None, None, 0.0),
            ("C", Some(0.5), None, None, 0.0),
        ]);
        let (a1, a2, pos, _) = step1_pearson(&t, &SelectionConfig::default());
        assert_eq!(pos, Some(0.5));
        assert_eq!(a1.len(), 3);
        assert!(a2.is_empty());

        let t = table(&[
            ("A", Some(0.3), None, None, 0.0),
            ("B", Some(0.3), None, None, 0.0),
            ("C", Some(0.3), None, None, 0.0),
        ]);
        assert_eq!(step1_pearson(&t, &SelectionConfig::default()).0.len(), 3);
        let strict = SelectionConfig {
            inclusive_positive: false,
            ..Default::default()
        };
        assert!(step1_pearson(&t, &strict).0.is_empty());
    }

    #[test]
    fn step1_undefined_goes_to_a2() {
        let t = table(&[("A", None, None, None, 0.0), ("B", None, None, None, 0.0)]);
        let (a1, a2, pos, neg) = step1_pearson(&t, &SelectionConfig::default());
        assert!(a1.is_empty());
        assert_eq!(a2, names(&["A", "B"]));
        assert_eq!((pos, neg), (None, None));
    }

    #[test]
    fn step2_worked_example() {
        let t = table(&[
            ("B", Some(0.1), Some(0.4), Some(0.2), 0.0),
            ("D", Some(-0.1), Some(-0.3), Some(-0.1), 0.0),
        ]);
        let r = step2_rank_rescue(&t, &names(&["B", "D"]), &SelectionConfig::default());
        assert!((r.mu_sk_pos.unwrap() - 0.3).abs() < 1e-15);
        assert!((r.mu_sk_neg.unwrap() + 0.2).abs() < 1e-15);
        assert_eq!(r.a3, names(&["B", "D"]));
    }

    #[test]
    fn step2_empty_and_singleton() {
        let t = table(&[("A", Some(0.9), Some(0.9), Some(0.9), 0.0)]);
        let r = step2_rank_rescue(&t, &[], &SelectionConfig::default());
        assert!(r.a3.is_empty());

        let t = table(&[("A", Some(0.0), Some(0.37), Some(0.21), 0.0)]);
        let r = step2_rank_rescue(&t, &names(&["A"]), &SelectionConfig::default());
        assert_eq!(r.a3, names(&["A"]));
    }

    #[test]
    fn step2_means_only_over_a2() {
        // A is in a1 and must not raise μsk⁺ for B.
        let t = table(&[
            ("A", Some(0.9), Some(0.9), Some(0.9), 0.0),
            ("B", Some(0.01), Some(0.2), Some(0.1), 0.0),
        ]);
        let cfg = SelectionConfig::default();
        let r = step2_rank_rescue(&t, &names(&["B"]), &cfg);
        assert_eq!(r.a3, names(&["B"]));
        let all = SelectionConfig {
            rank_mean_scope: RankMeanScope::All,
            ..cfg
        };
        assert!(step2_rank_rescue(&t, &names(&["B"]), &all).a3.is_empty());
    }

    #[test]
    fn step3_examples() {
        let cfg = SelectionConfig::default();
        let t = table(&[
            ("A", None, None, None, 0.9),
            ("B", None, None, None, 0.1),
            ("C", None, None, None, 0.5),
        ]);
        let (a5, mu) = step3_infogain(&t, &cfg);
        assert!((mu.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(a5, names(&["A"]));

        let t = table(&[("A", None, None, None, 0.2), ("B", None, None, None, 0.2)]);
        assert!(step3_infogain(&t, &cfg).0.is_empty());
        let loose = SelectionConfig {
            ig_strict: false,
            ..cfg
        };
        assert_eq!(step3_infogain(&t, &loose).0.len(), 2);

        let t = table(&[
            ("A", None, None, None, 0.0),
            ("B", None, None, None, 0.3),
            ("C", None, None, None, 0.0),
        ]);
        assert_eq!(step3_infogain(&t, &cfg).0, names(&["B"]));
    }

    #[test]
    fn full_trace_records_decisions() {
        let t = table(&[
            ("A", Some(0.9), Some(0.9), Some(0.8), 0.9),
            ("B", Some(0.1), Some(0.4), Some(0.2), 0.1),
            ("C", Some(-0.8), Some(-0.7), Some(-0.6), 0.7),
            ("D", Some(-0.1), Some(-0.3), Some(-0.1), 0.6),
            ("E", None, None, None, 0.0),
        ]);
        let trace = select_from_table(t, &SelectionConfig::default()).unwrap();
        trace.check_invariants().unwrap();
        assert_eq!(trace.a1, names(&["A", "C"]));
        assert_eq!(trace.a3, names(&["B", "D"]));
        assert_eq!(trace.a5, names(&["A", "C", "D"]));
        assert_eq!(trace.a6, names(&["A", "C", "D"]));
        let fate: Vec<Fate> = trace.decisions.iter().map(|d| d.fate).collect();
        assert_eq!(
            fate,
            vec![
                Fate::Selected,
                Fate::RejectedByInfoGain,
                Fate::Selected,
                Fate::Selected,
                Fate::RejectedByCorrelation
            ]
        );
        assert_eq!(trace.decisions[4].correlation_rule, CorrelationRule::RankUndefined);
        let back = SelectionTrace::from_json(&trace.to_json().unwrap()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn select_rejects_degenerate_datasets() {
        let d = Dataset::new(vec!["f".into()], vec![1.0, 2.0], vec![0, 0]).unwrap();
        assert!(matches!(
            select(&d, &SelectionConfig::default()),
            Err(Error::SingleClass(_))
        ));
        let d = Dataset::new(vec![], vec![], vec![0, 1]).unwrap();
        assert!(matches!(select(&d, &SelectionConfig::default()), Err(Error::Empty(_))));
        let bad = SelectionConfig {
            bins: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
