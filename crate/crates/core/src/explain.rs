//! Gain-based feature importance and the combined selection / metrics /
//! importance report.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierModel, Tree};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::hybridselect::SelectionTrace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMode {
    /// Sum of split gains (Gini decrease for CART/forest, loss reduction for boosting).
    #[default]
    Gain,
    /// Number of splits.
    Weight,
}

impl FromStr for ImportanceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain" => Ok(ImportanceMode::Gain),
            "weight" => Ok(ImportanceMode::Weight),
            other => Err(Error::Config(format!(
                "unknown importance mode {other:?} (gain, weight)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub feature_index: usize,
    pub importance: f64,
    pub normalized: f64,
    pub n_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub model_kind: String,
    pub model_hash: String,
    pub mode: ImportanceMode,
    /// Sum of the importance of every split in the model.
    pub total: f64,
    /// Every model feature, by descending importance then feature index.
    pub ranking: Vec<ImportanceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
}

impl ImportanceReport {
    pub fn has_splits(&self) -> bool {
        self.ranking.iter().any(|e| e.n_splits > 0)
    }

    pub fn top(&self, n: usize) -> &[ImportanceEntry] {
        &self.ranking[..n.min(self.ranking.len())]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn trees(model: &ClassifierModel) -> Result<Vec<&Tree>> {
    match model {
        ClassifierModel::Tree(t) => Ok(vec![t]),
        ClassifierModel::Forest(f) => Ok(f.trees.iter().collect()),
        ClassifierModel::Gbdt(g) => Ok(g.trees.iter().collect()),
        ClassifierModel::Knn(_) => Err(Error::Unsupported("k-NN has no split-based importance".into())),
    }
}

/// Per-feature importance of a tree model. `feature_names` are the model's
/// input columns in training order.
pub fn feature_importance(
    model: &ClassifierModel,
    feature_names: &[String],
    mode: ImportanceMode,
) -> Result<ImportanceReport> {
    let trees = trees(model)?;
    if feature_names.len() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: feature_names.len(),
        });
    }
    let p = feature_names.len();
    let mut importance = vec![0.0; p];
    let mut n_splits = vec![0usize; p];
    let mut total = 0.0;
    for (feature, gain) in trees.iter().flat_map(|t| t.splits()) {
        let v = match mode {
            ImportanceMode::Gain => gain,
            ImportanceMode::Weight => 1.0,
        };
        importance[feature] += v;
        n_splits[feature] += 1;
        total += v;
    }
    let norm_total: f64 = importance.iter().sum();
    let mut ranking: Vec<ImportanceEntry> = feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| ImportanceEntry {
            feature: name.clone(),
            feature_index: j,
            importance: importance[j],
            normalized: if norm_total > 0.0 {
                importance[j] / norm_total
            } else {
                0.0
            },
            n_splits: n_splits[j],
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.feature_index.cmp(&b.feature_index))
    });
    Ok(ImportanceReport {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: None,
        model_kind: model.kind().to_string(),
        model_hash: model.hash()?,
        mode,
        total,
        ranking,
        trace_ref: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    #[default]
    Md,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Md),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown report format {other:?} (json, md, csv)"
            ))),
        }
    }
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    selected: Vec<&'a crate::stats::FeatureStats>,
    metrics: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    importance_mode: Option<ImportanceMode>,
    importance_top: &'a [ImportanceEntry],
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

const NO_SPLITS: &str = "no splits: the model never partitioned the data";
const NO_IMPORTANCE: &str = "feature importance is not defined for this model kind";

/// Combined document: selected features with their statistics, the metrics
/// table and the top-`top_n` importance ranking. `imp` is `None` for models
/// without split-based importance.
pub fn render_report(
    trace: &SelectionTrace,
    eval: &EvalReport,
    imp: Option<&ImportanceReport>,
    top_n: usize,
    format: ReportFormat,
) -> Result<String> {
    if let Some(stray) = imp
        .iter()
        .flat_map(|r| &r.ranking)
        .find(|e| !trace.a6.contains(&e.feature))
    {
        return Err(Error::FeatureMismatch(format!(
            "importance feature `{}` is not among the selected features",
            stray.feature
        )));
    }
    let selected: Vec<_> = trace.a6.iter().filter_map(|f| trace.table.get(f)).collect();
    let top = imp.map_or(&[][..], |r| r.top(top_n));
    let note = match imp {
        None => Some(NO_IMPORTANCE),
        Some(r) if !r.has_splits() => Some(NO_SPLITS),
        Some(_) => None,
    };

    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(&ReportDoc {
            schema_version: crate::SCHEMA_VERSION,
            config_hash: trace.config_hash.as_deref(),
            selected,
            metrics: eval,
            importance_mode: imp.map(|r| r.mode),
            importance_top: top,
            note,
        })?,
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["rank", "feature", "importance", "normalized"])?;
            for (i, e) in top.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    e.feature.clone(),
                    e.importance.to_string(),
                    e.normalized.to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?)
                .map_err(|e| Error::Invalid(e.to_string()))?
        }
        ReportFormat::Md => {
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
            let mut s = String::from("# Flow classification report\n\n");
            if let Some(h) = &trace.config_hash {
                let _ = writeln!(s, "Config hash: `{h}`\n");
            }
            let _ = writeln!(s, "## Selected features ({})\n", selected.len());
            s.push_str("| Feature | Pearson | Spearman | Kendall | Info gain |\n|---|---|---|---|---|\n");
            for f in &selected {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {:.4} |",
                    f.feature,
                    fmt(f.pearson),
                    fmt(f.spearman),
                    fmt(f.kendall),
                    f.info_gain
                );
            }
            let _ = writeln!(s, "\n## Metrics ({})\n", eval.model_kind);
            s.push_str(&eval.to_table());
            let _ = writeln!(s, "\n## Feature importance (top {})\n", top.len());
            if let Some(n) = note {
                let _ = writeln!(s, "_{n}_\n");
            }
            s.push_str("| Rank | Feature | Importance | Normalized |\n|---|---|---|---|\n");
            for (i, e) in top.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.6} | {:.4} |",
                    i + 1,
                    e.feature,
                    e.importance,
                    e.normalized
                );
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{GbdtModel, KnnModel, TreeNode};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("f{j}")).collect()
    }

    fn stump_on(feature: usize, p: usize) -> ClassifierModel {
        ClassifierModel::Tree(Tree {
            n_features: p,
            nodes: vec![
                TreeNode::Split {
                    feature,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    gain: 3.5,
                    n_samples: 10,
                },
                TreeNode::Leaf {
                    value: 0.0,
                    n_samples: 5,
                },
                TreeNode::Leaf {
                    value: 1.0,
                    n_samples: 5,
                },
            ],
        })
    }

    #[test]
    fn single_split_takes_everything() {
        let r = feature_importance(&stump_on(2, 3), &names(3), ImportanceMode::Gain).unwrap();
        assert_eq!(r.ranking[0].feature, "f2");
        assert_eq!(r.ranking[0].normalized, 1.0);
        assert_eq!(r.ranking[1].importance, 0.0);
        assert_eq!(r.ranking[1].feature, "f0");
        assert_eq!(r.total, 3.5);

        let w = feature_importance(&stump_on(2, 3), &names(3), ImportanceMode::Weight).unwrap();
        assert_eq!(w.ranking[0].importance, 1.0);
    }

    #[test]
    fn no_splits_is_all_zero() {
        let m = ClassifierModel::Gbdt(GbdtModel {
            trees: vec![],
            learning_rate: 0.3,
            base_score: 0.0,
            rounds: 0,
            l2_lambda: 1.0,
            n_features: 2,
            train_loss: vec![std::f64::consts::LN_2],
        });
        let r = feature_importance(&m, &names(2), ImportanceMode::Gain).unwrap();
        assert!(!r.has_splits());
        assert!(r.ranking.iter().all(|e| e.importance == 0.0 && e.normalized == 0.0));
    }

    #[test]
    fn knn_unsupported() {
        let m = ClassifierModel::Knn(KnnModel {
            k: 1,
            n_features: 1,
            x: vec![0.0],
            y: vec![0],
        });
        assert!(matches!(
            feature_importance(&m, &names(1), ImportanceMode::Gain),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("pdf".parse::<ReportFormat>().is_err());
        assert_eq!("weight".parse::<ImportanceMode>().unwrap(), ImportanceMode::Weight);
    }
}
