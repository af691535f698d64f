//! End-to-end orchestration: ingest → clean → drop columns → binarize →
//! scale → select → split → train → evaluate → cv → explain.
//!
//! Every JSON artifact written to the output directory carries the hash of
//! the configuration that produced it. Wall-clock timings go to
//! `metadata.json` only, so two runs of one configuration produce
//! byte-identical artifacts.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ClassifierModel, ClassifierSpec};
use crate::error::{Error, Result, Stage, StageExt};
use crate::evaluation::{evaluate, kfold_cv, stratified_split_indices, timed_train, CvReport, EvalReport, MseMode};
use crate::explain::{feature_importance, render_report, ImportanceMode, ImportanceReport, ReportFormat};
use crate::flowdata::{ingest, ClassCounts, Dataset, IngestOptions, IngestReport, LabelRule, Profile};
use crate::hybridselect::{select, SelectionConfig, SelectionTrace};
use crate::scaling::{fit_scaler_with, ScalerParams, StdMode};
use crate::synth::{generate, SynthSpec};

/// Which rows the scaler is fit on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    /// Every row, before the split.
    #[default]
    All,
    /// Training rows only; selection then also sees only training rows.
    Train,
}

fn is_unset(p: &Path) -> bool {
    p.as_os_str().is_empty()
}

fn default_test_fraction() -> f64 {
    0.3
}

fn default_top_n() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Flow CSV files (one source of `inputs`, `dataset`, `synth`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    /// A dataset snapshot written by `ingest`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub profile: Profile,
    /// Defaults to the profile's label column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    /// JSON label rule; defaults to the profile's rule (0/1 for `custom`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_rules: Option<PathBuf>,
    /// Dropped in addition to the profile's identifier columns.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub model: ClassifierSpec,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_folds: Option<usize>,
    pub seed: u64,
    /// Required to run; left out of the written `config.json`.
    #[serde(default, skip_serializing_if = "is_unset")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub scaler_fit: ScalerFit,
    #[serde(default)]
    pub std_mode: StdMode,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub mse_mode: MseMode,
    #[serde(default)]
    pub importance_mode: ImportanceMode,
}

impl PipelineConfig {
    /// Also accepts a written `config.json`: its `schema_version` and
    /// `config_hash` stamps are checked and dropped.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("config_hash");
            match obj.remove("schema_version") {
                Some(ver) if ver != crate::SCHEMA_VERSION => {
                    return Err(Error::Config(format!("unsupported schema_version {ver}")));
                }
                _ => {}
            }
        }
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The config without its output location.
    pub fn canonical(&self) -> PipelineConfig {
        PipelineConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir` so the same
    /// run written to two places hashes identically.
    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        let sources = usize::from(!self.inputs.is_empty())
            + usize::from(self.dataset.is_some())
            + usize::from(self.synth.is_some());
        if sources != 1 {
            return Err(Error::Config(
                "exactly one of `inputs`, `dataset`, `synth` must be set".into(),
            ));
        }
        if is_unset(&self.output_dir) {
            return Err(Error::Config("`output_dir` is required".into()));
        }
        for p in self.inputs.iter().chain(&self.dataset).chain(&self.label_rules) {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(s) = &self.synth {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.cv_folds.is_some_and(|k| k < 2) {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be positive".into()));
        }
        self.selection.validate()?;
        match &self.model {
            ClassifierSpec::Gbdt(p) => p.validate().map_err(|e| Error::Config(e.to_string()))?,
            ClassifierSpec::Knn(p) if p.k == 0 => return Err(Error::Config("knn k must be positive".into())),
            ClassifierSpec::Forest(p) if p.n_trees == 0 => {
                return Err(Error::Config("forest n_trees must be positive".into()))
            }
            _ => {}
        }
        if self.profile == Profile::Custom && self.label_rules.is_none() && self.label_column.is_none() {
            log::info!("custom profile without label rules: expecting 0/1 labels in `label`");
        }
        Ok(())
    }

    pub fn ingest_options(&self) -> Result<IngestOptions> {
        let rule = match &self.label_rules {
            Some(p) => LabelRule::from_json_file(p)?,
            None => self.profile.label_rule().unwrap_or_else(LabelRule::binary),
        };
        let mut drop: Vec<String> = self
            .profile
            .identifier_columns()
            .iter()
            .map(|s| s.to_string())
            .collect();
        drop.extend(self.drop_columns.iter().cloned());
        Ok(IngestOptions {
            label_column: self
                .label_column
                .clone()
                .unwrap_or_else(|| self.profile.default_label_column().to_string()),
            rule,
            drop_columns: drop,
            schema: HashMap::new(),
        })
    }

    /// Model spec with the pipeline seed applied.
    pub fn seeded_model(&self) -> ClassifierSpec {
        self.model.with_seed(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub test_fraction: f64,
    pub seed: u64,
}

/// A trained model plus everything needed to apply it to raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Model input columns, in order.
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<ScalerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitInfo>,
    pub model: ClassifierModel,
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Scales `d` (unless already scaled) and projects it onto the model inputs.
    pub fn prepare(&self, d: &Dataset) -> Result<Dataset> {
        let scaled = match (&self.scaler, d.scaled_with()) {
            (Some(s), None) => s.transform(d)?,
            _ => d.clone(),
        };
        scaled.select_features(&self.feature_names)
    }
}

/// SHA-256 of the compact JSON form of any configuration value.
pub fn config_hash(value: &impl Serialize) -> String {
    let text = serde_json::to_string(value).expect("configuration serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `value` as pretty JSON stamped with `schema_version` (when absent)
/// and `config_hash`.
pub fn write_json(path: &Path, value: &impl Serialize, config_hash: &str) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.entry("schema_version").or_insert(crate::SCHEMA_VERSION.into());
        map.insert("config_hash".into(), config_hash.into());
    }
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub config_hash: String,
    pub ingest: IngestReport,
    pub trace: SelectionTrace,
    pub model: ModelArtifact,
    pub eval: EvalReport,
    pub cv: Option<CvReport>,
    pub importance: Option<ImportanceReport>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    config_hash: &'a str,
    /// File name → SHA-256 of its contents.
    artifacts: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Metadata {
    schema_version: u32,
    config_hash: String,
    finished_unix_seconds: u64,
    train_seconds: f64,
    cv_fold_train_seconds: Vec<f64>,
    stage_seconds: Vec<(String, f64)>,
}

fn load_source(cfg: &PipelineConfig, out: &Path, hash: &str) -> Result<(Dataset, IngestReport)> {
    if let Some(spec) = &cfg.synth {
        let s = generate(spec)?;
        write_json(
            &out.join("truth.json"),
            &serde_json::from_str::<serde_json::Value>(&s.truth_json()?)?,
            hash,
        )?;
        let [benign, attack] = s.dataset.class_counts();
        let report = IngestReport {
            schema_version: crate::SCHEMA_VERSION,
            rows_in: s.dataset.n_rows(),
            rows_dropped: 0,
            rows_dropped_invalid: 0,
            rows_dropped_unknown_label: 0,
            per_class_counts: ClassCounts { benign, attack },
            n_features: s.dataset.n_features(),
            warnings: vec![],
        };
        return Ok((s.dataset, report));
    }
    if let Some(path) = &cfg.dataset {
        let d = Dataset::load(path)?;
        let [benign, attack] = d.class_counts();
        let report = IngestReport {
            schema_version: crate::SCHEMA_VERSION,
            rows_in: d.n_rows(),
            rows_dropped: 0,
            rows_dropped_invalid: 0,
            rows_dropped_unknown_label: 0,
            per_class_counts: ClassCounts { benign, attack },
            n_features: d.n_features(),
            warnings: vec![],
        };
        return Ok((d, report));
    }
    ingest(&cfg.inputs, &cfg.ingest_options()?)
}

/// Validates the configuration without touching any data; returns its hash.
pub fn dry_run(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate().stage(Stage::Config)?;
    cfg.ingest_options().stage(Stage::Config)?;
    Ok(cfg.hash())
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let hash = dry_run(cfg)?;
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out)
        .map_err(|e| Error::io(out, e))
        .stage(Stage::Write)?;
    let mut artifacts = Vec::new();
    let mut stage_seconds = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, clock: &mut Instant| {
        stage_seconds.push((name.to_string(), clock.elapsed().as_secs_f64()));
        *clock = Instant::now();
    };

    write_json(&out.join("config.json"), &cfg.canonical(), &hash).stage(Stage::Write)?;
    artifacts.push(out.join("config.json"));

    // ingest → clean → drop columns → binarize
    let (data, ingest_report) = load_source(cfg, out, &hash).stage(Stage::Ingest)?;
    data.require_both_classes().stage(Stage::Ingest)?;
    for w in &ingest_report.warnings {
        log::warn!("{w}");
    }
    data.save(out.join("dataset.fsds")).stage(Stage::Write)?;
    write_json(&out.join("ingest_report.json"), &ingest_report, &hash).stage(Stage::Write)?;
    artifacts.push(out.join("dataset.fsds"));
    artifacts.push(out.join("ingest_report.json"));
    if cfg.synth.is_some() {
        artifacts.push(out.join("truth.json"));
    }
    lap("ingest", &mut clock);

    // The split depends only on labels, so it is fixed before scaling.
    let (train_idx, test_idx) = stratified_split_indices(data.y(), cfg.test_fraction, cfg.seed).stage(Stage::Split)?;

    // scale
    let (scaled, scaler) = if let Some(prev) = data.scaled_with() {
        log::warn!("input dataset is already standardised ({prev}); skipping scaling");
        (data, None)
    } else {
        let fit_on = match cfg.scaler_fit {
            ScalerFit::All => data.clone(),
            ScalerFit::Train => data.subset_rows(&train_idx),
        };
        let scaler = fit_scaler_with(&fit_on, cfg.std_mode).stage(Stage::Scale)?;
        let scaled = scaler.transform(&data).stage(Stage::Scale)?;
        write_json(&out.join("scaler.json"), &scaler, &hash).stage(Stage::Write)?;
        artifacts.push(out.join("scaler.json"));
        (scaled, Some(scaler))
    };
    lap("scale", &mut clock);

    // select
    let select_on = match cfg.scaler_fit {
        ScalerFit::All => scaled.clone(),
        ScalerFit::Train => scaled.subset_rows(&train_idx),
    };
    let mut trace = select(&select_on, &cfg.selection).stage(Stage::Select)?;
    trace.config_hash = Some(hash.clone());
    write_json(&out.join("trace.json"), &trace, &hash).stage(Stage::Write)?;
    write_text(&out.join("correlations.csv"), &trace.table.to_csv()).stage(Stage::Write)?;
    artifacts.push(out.join("trace.json"));
    artifacts.push(out.join("correlations.csv"));
    if trace.a6.is_empty() {
        return Err(Error::Empty("no features survived selection".into()).at(Stage::Select));
    }
    log::info!("selected {} of {} features", trace.a6.len(), scaled.n_features());
    lap("select", &mut clock);

    // split
    let selected = scaled.select_features(&trace.a6).stage(Stage::Split)?;
    let train = selected.subset_rows(&train_idx);
    let test = selected.subset_rows(&test_idx);
    lap("split", &mut clock);

    // train
    let spec = cfg.seeded_model();
    let (model, train_seconds) = timed_train(&spec, &train).stage(Stage::Train)?;
    let artifact = ModelArtifact {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: Some(hash.clone()),
        feature_names: trace.a6.clone(),
        scaler,
        split: Some(SplitInfo {
            test_fraction: cfg.test_fraction,
            seed: cfg.seed,
        }),
        model,
    };
    write_json(&out.join("model.json"), &artifact, &hash).stage(Stage::Write)?;
    artifacts.push(out.join("model.json"));
    lap("train", &mut clock);

    // evaluate
    let mut eval = evaluate(&artifact.model, &test, None, cfg.mse_mode).stage(Stage::Evaluate)?;
    eval.config_hash = Some(hash.clone());
    lap("evaluate", &mut clock);

    // cv
    let cv = match cfg.cv_folds {
        Some(k) => {
            let cv = kfold_cv(&selected, k, &spec, cfg.seed).stage(Stage::Cv)?;
            eval.cv_fold_accuracies = Some(cv.fold_accuracies.clone());
            write_json(&out.join("cv.json"), &cv, &hash).stage(Stage::Write)?;
            artifacts.push(out.join("cv.json"));
            Some(cv)
        }
        None => None,
    };
    write_json(&out.join("eval.json"), &eval, &hash).stage(Stage::Write)?;
    artifacts.push(out.join("eval.json"));
    lap("cv", &mut clock);

    // explain
    let importance = match feature_importance(&artifact.model, &artifact.feature_names, cfg.importance_mode) {
        Ok(mut imp) => {
            imp.config_hash = Some(hash.clone());
            imp.trace_ref = Some("trace.json".into());
            write_json(&out.join("importance.json"), &imp, &hash).stage(Stage::Write)?;
            let csv = render_report(&trace, &eval, Some(&imp), cfg.top_n, ReportFormat::Csv).stage(Stage::Explain)?;
            write_text(&out.join("importance.csv"), &csv).stage(Stage::Write)?;
            artifacts.push(out.join("importance.json"));
            artifacts.push(out.join("importance.csv"));
            Some(imp)
        }
        Err(Error::Unsupported(why)) => {
            log::info!("skipping importance: {why}");
            None
        }
        Err(e) => return Err(e.at(Stage::Explain)),
    };
    let md = render_report(&trace, &eval, importance.as_ref(), cfg.top_n, ReportFormat::Md).stage(Stage::Explain)?;
    write_text(&out.join("report.md"), &md).stage(Stage::Write)?;
    artifacts.push(out.join("report.md"));
    lap("explain", &mut clock);

    let manifest = Manifest {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: &hash,
        artifacts: artifacts
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                let name = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok((name, hex::encode(Sha256::digest(&bytes))))
            })
            .collect::<Result<_>>()
            .stage(Stage::Write)?,
    };
    write_json(&out.join("manifest.json"), &manifest, &hash).stage(Stage::Write)?;
    artifacts.push(out.join("manifest.json"));

    let metadata = Metadata {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: hash.clone(),
        finished_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        train_seconds,
        cv_fold_train_seconds: cv.as_ref().map(|c| c.fold_train_seconds.clone()).unwrap_or_default(),
        stage_seconds,
    };
    write_json(&out.join("metadata.json"), &metadata, &hash).stage(Stage::Write)?;

    Ok(PipelineOutcome {
        config_hash: hash,
        ingest: ingest_report,
        trace,
        model: artifact,
        eval,
        cv,
        importance,
        artifacts,
    })
}
