//! Flow CSV ingestion: load, clean, drop identifier columns, binarize labels.
//!
//! Loading is two passes over the input files. The first pass validates row
//! shape and infers a type per column (numeric unless some non-missing cell
//! fails to parse); the second materialises the columns. Memory during the
//! first pass is bounded by one record.

mod dataset;
mod labels;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::Dataset;
pub use labels::{LabelClass, LabelPattern, LabelRule, Profile, UnknownPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Numeric,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnData::Numeric(_) => ColumnType::Numeric,
            ColumnData::Text(_) => ColumnType::Text,
        }
    }

    fn retain_rows(&mut self, keep: &[bool]) {
        fn filter<T>(v: &mut Vec<T>, keep: &[bool]) {
            let mut i = 0;
            v.retain(|_| {
                let k = keep[i];
                i += 1;
                k
            });
        }
        match self {
            ColumnData::Numeric(v) => filter(v, keep),
            ColumnData::Text(v) => filter(v, keep),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// Pre-cleaning table: named numeric or text columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<Column>,
    row_count: usize,
}

impl RawTable {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, |c| c.data.len());
        let mut names = HashSet::new();
        for c in &columns {
            if c.data.len() != row_count {
                return Err(Error::LengthMismatch {
                    left: c.data.len(),
                    right: row_count,
                });
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(RawTable { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Writes the table as CSV. Non-finite numbers are written as `NaN`,
    /// `inf` or `-inf`, which the loader reads back.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for i in 0..self.row_count {
            record.clear();
            for c in &self.columns {
                record.push(match &c.data {
                    ColumnData::Numeric(v) => format_number(v[i]),
                    ColumnData::Text(v) => v[i].clone(),
                });
            }
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        v.to_string()
    }
}

/// Parsed numeric cell. `None` means the cell is not a number at all.
/// Missing cells and the NaN / infinity spellings found in CIC exports
/// parse to NaN / ±inf so that `clean` removes them.
fn parse_numeric(cell: &str) -> Option<f64> {
    let s = cell.trim();
    if s.is_empty() {
        return Some(f64::NAN);
    }
    match s {
        "∞" | "+∞" => return Some(f64::INFINITY),
        "-∞" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    // std accepts nan / inf / infinity case-insensitively with an optional sign.
    s.parse::<f64>().ok()
}

fn is_missing(cell: &str) -> bool {
    cell.trim().is_empty()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub files: Vec<PathBuf>,
    pub rows_in: usize,
    /// `(original header, assigned name)` for every renamed duplicate.
    pub renamed_headers: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &HashMap<String, ColumnType>) -> Result<(RawTable, LoadReport)> {
    load_csvs(&[path.as_ref().to_path_buf()], schema)
}

/// Loads and concatenates several CSV files that share one header.
pub fn load_csvs(paths: &[PathBuf], schema: &HashMap<String, ColumnType>) -> Result<(RawTable, LoadReport)> {
    if paths.is_empty() {
        return Err(Error::Config("no input files".into()));
    }
    let mut report = LoadReport {
        files: paths.to_vec(),
        ..Default::default()
    };

    // Pass 1: header agreement, row shape, type inference.
    let mut header: Option<Vec<String>> = None;
    let mut numeric: Vec<bool> = Vec::new();
    let mut rows = 0usize;
    for path in paths {
        let mut rdr = open_reader(path)?;
        let names = read_header(&mut rdr, path)?;
        match &header {
            None => {
                numeric = vec![true; names.len()];
                header = Some(names);
            }
            Some(h) if *h != names => {
                return Err(Error::HeaderMismatch(format!(
                    "{} differs from {}",
                    path.display(),
                    paths[0].display()
                )));
            }
            Some(_) => {}
        }
        let width = numeric.len();
        let mut record = csv::StringRecord::new();
        while rdr.read_record(&mut record)? {
            check_width(&record, width, path)?;
            for (j, cell) in record.iter().enumerate() {
                if numeric[j] && !is_missing(cell) && parse_numeric(cell).is_none() {
                    numeric[j] = false;
                }
            }
            rows += 1;
        }
    }
    let raw_header = header.expect("at least one file");
    let names = dedup_headers(&raw_header, &mut report);
    for (name, &ty) in schema {
        match names.iter().position(|n| n == name) {
            Some(j) => numeric[j] = ty == ColumnType::Numeric,
            None => report
                .warnings
                .push(format!("schema override for unknown column `{name}`")),
        }
    }

    // Pass 2: materialise.
    let mut data: Vec<ColumnData> = numeric
        .iter()
        .map(|&is_num| {
            if is_num {
                ColumnData::Numeric(Vec::with_capacity(rows))
            } else {
                ColumnData::Text(Vec::with_capacity(rows))
            }
        })
        .collect();
    for path in paths {
        let mut rdr = open_reader(path)?;
        rdr.headers()?;
        let mut record = csv::StringRecord::new();
        while rdr.read_record(&mut record)? {
            let line = record.position().map_or(0, |p| p.line());
            for (j, cell) in record.iter().enumerate() {
                match &mut data[j] {
                    ColumnData::Numeric(v) => {
                        let value = parse_numeric(cell).ok_or_else(|| {
                            Error::Invalid(format!(
                                "{}, line {line}: `{cell}` in numeric column `{}`",
                                path.display(),
                                names[j]
                            ))
                        })?;
                        v.push(value);
                    }
                    ColumnData::Text(v) => v.push(cell.to_string()),
                }
            }
        }
    }
    report.rows_in = rows;
    let columns = names
        .into_iter()
        .zip(data)
        .map(|(name, data)| Column { name, data })
        .collect();
    Ok((
        RawTable {
            columns,
            row_count: rows,
        },
        report,
    ))
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn read_header(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    let h = rdr.headers()?;
    if h.is_empty() || (h.len() == 1 && h[0].trim().is_empty()) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(h.iter()
        .map(|s| s.trim().trim_start_matches('\u{feff}').trim().to_string())
        .collect())
}

fn check_width(record: &csv::StringRecord, width: usize, path: &Path) -> Result<()> {
    if record.len() != width {
        return Err(Error::RaggedRow {
            path: path.to_path_buf(),
            line: record.position().map_or(0, |p| p.line()),
            expected: width,
            found: record.len(),
        });
    }
    Ok(())
}

/// Later duplicates get `_1`, `_2`, ... appended.
fn dedup_headers(raw: &[String], report: &mut LoadReport) -> Vec<String> {
    let mut used: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for name in raw {
        let mut candidate = name.clone();
        let mut k = 1;
        while used.contains(&candidate) {
            candidate = format!("{name}_{k}");
            k += 1;
        }
        if candidate != *name {
            report.renamed_headers.push((name.clone(), candidate.clone()));
            report
                .warnings
                .push(format!("duplicate header `{name}` renamed to `{candidate}`"));
        }
        used.insert(candidate.clone());
        out.push(candidate);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_in: usize,
    pub rows_dropped: usize,
}

/// Keeps exactly the rows whose numeric cells are all finite.
pub fn clean(t: &RawTable) -> (RawTable, CleanReport) {
    let mut keep = vec![true; t.row_count];
    for c in &t.columns {
        if let ColumnData::Numeric(v) = &c.data {
            for (k, x) in keep.iter_mut().zip(v) {
                *k &= x.is_finite();
            }
        }
    }
    let kept = keep.iter().filter(|&&k| k).count();
    let mut out = t.clone();
    if kept != t.row_count {
        for c in &mut out.columns {
            c.data.retain_rows(&keep);
        }
        out.row_count = kept;
    }
    let report = CleanReport {
        rows_in: t.row_count,
        rows_dropped: t.row_count - kept,
    };
    (out, report)
}

/// Removes the named columns. Names not present produce warnings.
pub fn drop_columns<S: AsRef<str>>(t: &RawTable, names: &[S]) -> Result<(RawTable, Vec<String>)> {
    let drop: HashSet<&str> = names.iter().map(AsRef::as_ref).collect();
    let warnings = names
        .iter()
        .map(AsRef::as_ref)
        .filter(|n| t.column(n).is_none())
        .map(|n| format!("column `{n}` not present; nothing dropped"))
        .collect();
    let columns: Vec<Column> = t
        .columns
        .iter()
        .filter(|c| !drop.contains(c.name.as_str()))
        .cloned()
        .collect();
    if columns.is_empty() && !t.columns.is_empty() {
        return Err(Error::Invalid("dropping every column".into()));
    }
    Ok((
        RawTable {
            columns,
            row_count: t.row_count,
        },
        warnings,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinarizeReport {
    pub rows_in: usize,
    pub rows_dropped_unknown: usize,
    /// Raw label string → row count, over kept and dropped rows.
    pub label_counts: BTreeMap<String, usize>,
    pub benign: usize,
    pub attack: usize,
    pub warnings: Vec<String>,
}

/// Splits off the label column and maps it to {0, 1}.
///
/// A numeric label column is matched through its decimal rendering, so a
/// rule with `benign_labels = {"0"}` works on already-encoded files.
pub fn binarize_labels(t: &RawTable, rule: &LabelRule, label_column: &str) -> Result<(Dataset, BinarizeReport)> {
    let label_col = t
        .column(label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let labels: Vec<String> = match &label_col.data {
        ColumnData::Text(v) => v.iter().map(|s| s.trim().to_string()).collect(),
        ColumnData::Numeric(v) => v.iter().map(|x| x.to_string()).collect(),
    };
    let features: Vec<(&str, &Vec<f64>)> = t
        .columns
        .iter()
        .filter(|c| c.name != label_column)
        .map(|c| match &c.data {
            ColumnData::Numeric(v) => Ok((c.name.as_str(), v)),
            ColumnData::Text(_) => Err(Error::NonNumericFeature(c.name.clone())),
        })
        .collect::<Result<_>>()?;

    let mut report = BinarizeReport {
        rows_in: t.row_count,
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(t.row_count);
    let mut y = Vec::with_capacity(t.row_count);
    for (i, label) in labels.iter().enumerate() {
        *report.label_counts.entry(label.clone()).or_default() += 1;
        match rule.classify(label) {
            LabelClass::Benign => {
                rows.push(i);
                y.push(0u8);
            }
            LabelClass::Attack => {
                rows.push(i);
                y.push(1u8);
            }
            LabelClass::Unknown => match rule.unknown_policy {
                UnknownPolicy::Drop => report.rows_dropped_unknown += 1,
                UnknownPolicy::Error => {
                    return Err(Error::UnknownLabel {
                        label: label.clone(),
                        row: i,
                    })
                }
            },
        }
    }
    report.attack = y.iter().filter(|&&l| l == 1).count();
    report.benign = y.len() - report.attack;
    if y.is_empty() {
        return Err(Error::SingleClass("no rows matched the label rule".into()));
    }
    if report.benign == 0 || report.attack == 0 {
        report.warnings.push(format!(
            "single-class output ({} benign, {} attack); selection and training need both classes",
            report.benign, report.attack
        ));
    }

    let p = features.len();
    let mut x = Vec::with_capacity(rows.len() * p);
    for &i in &rows {
        x.extend(features.iter().map(|(_, col)| col[i]));
    }
    let names = features.iter().map(|(n, _)| n.to_string()).collect();
    let d = Dataset::new(names, x, y)?;
    Ok((d, report))
}

/// Ingestion summary written next to a dataset snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub schema_version: u32,
    pub rows_in: usize,
    pub rows_dropped: usize,
    pub rows_dropped_invalid: usize,
    pub rows_dropped_unknown_label: usize,
    pub per_class_counts: ClassCounts,
    pub n_features: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub benign: usize,
    pub attack: usize,
}

/// Everything needed to turn flow CSVs into a [`Dataset`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub label_column: String,
    pub rule: LabelRule,
    pub drop_columns: Vec<String>,
    pub schema: HashMap<String, ColumnType>,
}

/// load → clean → drop columns → binarize.
pub fn ingest(paths: &[PathBuf], opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let (table, load) = load_csvs(paths, &opts.schema)?;
    let (table, cleaned) = clean(&table);
    log::info!(
        "loaded {} rows, dropped {} with NaN/infinite values",
        load.rows_in,
        cleaned.rows_dropped
    );
    let (table, drop_warnings) = drop_columns(&table, &opts.drop_columns)?;
    let (dataset, bin) = binarize_labels(&table, &opts.rule, &opts.label_column)?;
    let mut warnings = load.warnings;
    warnings.extend(drop_warnings);
    warnings.extend(bin.warnings);
    let report = IngestReport {
        schema_version: crate::SCHEMA_VERSION,
        rows_in: load.rows_in,
        rows_dropped: cleaned.rows_dropped + bin.rows_dropped_unknown,
        rows_dropped_invalid: cleaned.rows_dropped,
        rows_dropped_unknown_label: bin.rows_dropped_unknown,
        per_class_counts: ClassCounts {
            benign: bin.benign,
            attack: bin.attack,
        },
        n_features: dataset.n_features(),
        warnings,
    };
    Ok((dataset, report))
}
