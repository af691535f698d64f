use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use flowsieve::classifiers::ClassifierSpec;
use flowsieve::evaluation::{evaluate as score, kfold_cv, stratified_split_indices, timed_train, EvalReport, MseMode};
use flowsieve::explain::{feature_importance, render_report, ImportanceMode, ReportFormat};
use flowsieve::flowdata::{ingest as ingest_csvs, IngestOptions, LabelRule, Profile};
use flowsieve::hybridselect::{select as run_select, SelectionConfig, SelectionTrace};
use flowsieve::pipeline::{config_hash, dry_run, run_pipeline, write_json, ModelArtifact, PipelineConfig, SplitInfo};
use flowsieve::scaling::{fit_scaler_with, ScalerParams, StdMode};
use flowsieve::synth::{generate, SynthSpec};
use flowsieve::{Dataset, Error, Result, Stage, StageExt};

use crate::{
    CvArgs, EvaluateArgs, ExplainArgs, IngestArgs, ModelChoice, PipelineArgs, SelectArgs, SynthArgs, TrainArgs,
};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Parses a snake_case enum value the same way a config file would.
fn parse_choice<T: DeserializeOwned>(value: &str, what: &str) -> Result<T> {
    serde_json::from_value(Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} `{value}`")))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    emit(&text)
}

/// Input files named on the command line must exist before any work starts.
fn require_files<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    match paths.into_iter().find(|p| !p.is_file()) {
        Some(p) => Err(Error::Config(format!("{} does not exist", p.display()))),
        None => Ok(()),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).stage(Stage::Ingest)
}

fn load_trace(path: &Path) -> Result<SelectionTrace> {
    SelectionTrace::from_json(&read(path)?).stage(Stage::Select)
}

fn model_spec(m: &ModelChoice) -> Result<ClassifierSpec> {
    let mut v = match &m.params {
        Some(text) => serde_json::from_str::<Value>(text).map_err(|e| Error::Config(format!("--params: {e}")))?,
        None => json!({}),
    };
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Config("--params must be a JSON object".into()))?;
    obj.insert("kind".into(), m.model.clone().into());
    let spec: ClassifierSpec =
        serde_json::from_value(v).map_err(|e| Error::Config(format!("model `{}`: {e}", m.model)))?;
    Ok(spec.with_seed(m.seed))
}

/// Scales (when a scaler is given and the data is raw) and keeps the selected columns.
fn selected_view(d: &Dataset, trace: &SelectionTrace, scaler: Option<&ScalerParams>) -> Result<Dataset> {
    let scaled = match (scaler, d.scaled_with()) {
        (Some(s), None) => s.transform(d).stage(Stage::Scale)?,
        _ => d.clone(),
    };
    if trace.a6.is_empty() {
        return Err(Error::Empty("the trace selects no features".into()).at(Stage::Select));
    }
    scaled.select_features(&trace.a6).stage(Stage::Split)
}

fn load_scaler(path: Option<&PathBuf>) -> Result<Option<ScalerParams>> {
    path.map(|p| ScalerParams::from_json(&read(p)?))
        .transpose()
        .stage(Stage::Scale)
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    require_files(a.inputs.iter().chain(&a.label_rules))?;
    let profile: Profile = a.profile.parse().stage(Stage::Config)?;
    let rule = match &a.label_rules {
        Some(p) => LabelRule::from_json_file(p).stage(Stage::Config)?,
        None => profile.label_rule().unwrap_or_else(LabelRule::binary),
    };
    let mut drop: Vec<String> = profile.identifier_columns().iter().map(|s| s.to_string()).collect();
    drop.extend(a.drop_columns.iter().cloned());
    let opts = IngestOptions {
        label_column: a
            .label_column
            .clone()
            .unwrap_or_else(|| profile.default_label_column().to_string()),
        rule,
        drop_columns: drop,
        schema: Default::default(),
    };
    let hash = config_hash(&json!({
        "command": "ingest",
        "inputs": a.inputs,
        "profile": profile,
        "label_column": opts.label_column,
        "label_rules": a.label_rules,
        "drop_columns": opts.drop_columns,
    }));
    let (d, report) = ingest_csvs(&a.inputs, &opts).stage(Stage::Ingest)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    create_dir(&a.out)?;
    d.save(a.out.join("dataset.fsds")).stage(Stage::Write)?;
    write_json(&a.out.join("ingest_report.json"), &report, &hash).stage(Stage::Write)?;
    print_json(&report)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_rows: a.rows,
        n_informative: a.informative,
        n_noise: a.noise,
        imbalance: a.imbalance,
        label_noise: a.label_noise,
        separation: a.separation,
        seed: a.seed,
    };
    let s = generate(&spec).stage(Stage::Config)?;
    let hash = config_hash(&json!({"command": "synth", "spec": spec}));
    create_dir(&a.out)?;
    s.dataset.save(a.out.join("dataset.fsds")).stage(Stage::Write)?;
    let truth: Value = serde_json::from_str(&s.truth_json()?)?;
    write_json(&a.out.join("truth.json"), &truth, &hash).stage(Stage::Write)?;
    if a.csv {
        s.dataset
            .write_csv(a.out.join("dataset.csv"), "label")
            .stage(Stage::Write)?;
    }
    print_json(&truth)
}

pub fn select(a: SelectArgs) -> Result<()> {
    require_files([&a.dataset].into_iter().chain(&a.config))?;
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<SelectionConfig>(&read(p)?).map_err(|e| Error::Config(e.to_string()))?,
        None => SelectionConfig::default(),
    };
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    cfg.validate().stage(Stage::Config)?;
    let std_mode: StdMode = parse_choice(&a.std_mode, "std mode")?;
    let d = load_dataset(&a.dataset)?;
    let hash = config_hash(&json!({
        "command": "select",
        "dataset": d.fingerprint(),
        "selection": cfg,
        "std_mode": std_mode,
    }));
    create_dir(&a.out)?;
    let scaled = match d.scaled_with() {
        Some(_) => d,
        None => {
            let scaler = fit_scaler_with(&d, std_mode).stage(Stage::Scale)?;
            write_json(&a.out.join("scaler.json"), &scaler, &hash).stage(Stage::Write)?;
            scaler.transform(&d).stage(Stage::Scale)?
        }
    };
    let mut trace = run_select(&scaled, &cfg).stage(Stage::Select)?;
    trace.config_hash = Some(hash.clone());
    write_json(&a.out.join("trace.json"), &trace, &hash).stage(Stage::Write)?;
    fs::write(a.out.join("correlations.csv"), trace.table.to_csv()).map_err(|e| Error::io(&a.out, e))?;
    print_json(&json!({"selected": trace.a6, "n_features": scaled.n_features()}))
}

pub fn train(a: TrainArgs) -> Result<()> {
    require_files([&a.dataset, &a.trace].into_iter().chain(&a.scaler))?;
    let spec = model_spec(&a.model)?;
    let d = load_dataset(&a.dataset)?;
    let trace = load_trace(&a.trace)?;
    let scaler = load_scaler(a.scaler.as_ref())?;
    let hash = config_hash(&json!({
        "command": "train",
        "dataset": d.fingerprint(),
        "trace": trace.a6,
        "scaler": scaler.as_ref().map(ScalerParams::fingerprint),
        "model": spec,
        "test_fraction": a.test_fraction,
        "seed": a.model.seed,
    }));
    let view = selected_view(&d, &trace, scaler.as_ref())?;
    let (train_idx, _) = stratified_split_indices(view.y(), a.test_fraction, a.model.seed).stage(Stage::Split)?;
    let train_rows = view.subset_rows(&train_idx);
    let (model, secs) = timed_train(&spec, &train_rows).stage(Stage::Train)?;
    log::info!("trained {} in {secs:.3} s", model.kind());
    let artifact = ModelArtifact {
        schema_version: flowsieve::SCHEMA_VERSION,
        config_hash: Some(hash.clone()),
        feature_names: trace.a6.clone(),
        scaler,
        split: Some(SplitInfo {
            test_fraction: a.test_fraction,
            seed: a.model.seed,
        }),
        model,
    };
    create_dir(&a.out)?;
    write_json(&a.out.join("model.json"), &artifact, &hash).stage(Stage::Write)?;
    print_json(&json!({"model": artifact.model.kind(), "train_rows": train_rows.n_rows(), "train_seconds": secs}))
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_files([&a.model, &a.dataset])?;
    let mode: MseMode = parse_choice(&a.mse_mode, "mse mode")?;
    let artifact = ModelArtifact::load(&a.model).stage(Stage::Evaluate)?;
    let d = load_dataset(&a.dataset)?;
    let view = artifact.prepare(&d).stage(Stage::Evaluate)?;
    let rows = match (&artifact.split, a.all_rows) {
        (Some(s), false) => {
            stratified_split_indices(view.y(), s.test_fraction, s.seed)
                .stage(Stage::Split)?
                .1
        }
        _ => (0..view.n_rows()).collect(),
    };
    let test = view.subset_rows(&rows);
    let mut report = score(&artifact.model, &test, None, mode).stage(Stage::Evaluate)?;
    let hash = config_hash(&json!({
        "command": "evaluate",
        "model": artifact.model.hash()?,
        "dataset": d.fingerprint(),
        "all_rows": a.all_rows,
        "mse_mode": mode,
    }));
    report.config_hash = Some(hash.clone());
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("eval.json"), &report, &hash).stage(Stage::Write)?;
    }
    emit(&report.to_table())
}

pub fn cv(a: CvArgs) -> Result<()> {
    require_files([&a.dataset, &a.trace].into_iter().chain(&a.scaler))?;
    let spec = model_spec(&a.model)?;
    let d = load_dataset(&a.dataset)?;
    let trace = load_trace(&a.trace)?;
    let scaler = load_scaler(a.scaler.as_ref())?;
    let view = selected_view(&d, &trace, scaler.as_ref())?;
    let report = kfold_cv(&view, a.folds, &spec, a.model.seed).stage(Stage::Cv)?;
    let hash = config_hash(&json!({
        "command": "cv",
        "dataset": d.fingerprint(),
        "trace": trace.a6,
        "model": spec,
        "folds": a.folds,
        "seed": a.model.seed,
    }));
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("cv.json"), &report, &hash).stage(Stage::Write)?;
    }
    print_json(&report)
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    require_files([&a.model, &a.trace, &a.eval])?;
    let format: ReportFormat = a.format.parse().stage(Stage::Config)?;
    let mode: ImportanceMode = a.mode.parse().stage(Stage::Config)?;
    let artifact = ModelArtifact::load(&a.model).stage(Stage::Explain)?;
    let trace = load_trace(&a.trace)?;
    let eval = EvalReport::from_json(&read(&a.eval)?).stage(Stage::Explain)?;
    let importance = match feature_importance(&artifact.model, &artifact.feature_names, mode) {
        Ok(imp) => Some(imp),
        Err(Error::Unsupported(why)) => {
            log::info!("{why}");
            None
        }
        Err(e) => return Err(e.at(Stage::Explain)),
    };
    let text = render_report(&trace, &eval, importance.as_ref(), a.top, format).stage(Stage::Explain)?;
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => emit(&text),
    }
}

fn apply_overrides(cfg: &mut Value, a: &PipelineArgs) -> Result<()> {
    let obj = cfg
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    if let Some(out) = &a.out {
        obj.insert("output_dir".into(), json!(out));
    }
    if let Some(seed) = a.seed {
        obj.insert("seed".into(), seed.into());
    }
    if let Some(kind) = &a.model {
        let same = obj.get("model").and_then(|m| m.get("kind")).and_then(Value::as_str) == Some(kind);
        if !same {
            obj.insert("model".into(), json!({"kind": kind}));
        }
    }
    if let Some(k) = a.cv_folds {
        obj.insert("cv_folds".into(), k.into());
    }
    if let Some(f) = a.test_fraction {
        obj.insert("test_fraction".into(), f.into());
    }
    if let Some(n) = a.top {
        obj.insert("top_n".into(), n.into());
    }
    for kv in &a.overrides {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(key.to_string(), value);
    }
    Ok(())
}

pub fn pipeline(a: PipelineArgs) -> Result<()> {
    require_files(&a.config)?;
    let mut raw = match &a.config {
        Some(p) => serde_json::from_str::<Value>(&read(p).stage(Stage::Config)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => json!({}),
    };
    apply_overrides(&mut raw, &a)?;
    let cfg = PipelineConfig::from_json(&raw.to_string())?;
    if a.dry_run {
        let hash = dry_run(&cfg)?;
        return print_json(&json!({"config_hash": hash, "valid": true}));
    }
    let o = run_pipeline(&cfg)?;
    print_json(&json!({
        "config_hash": o.config_hash,
        "output_dir": cfg.output_dir,
        "selected": o.trace.a6,
        "model": o.eval.model_kind,
        "accuracy": o.eval.metrics.accuracy,
        "f1_weighted": o.eval.metrics.f1_weighted,
        "cv_fold_accuracies": o.cv.as_ref().map(|c| &c.fold_accuracies),
    }))
}
