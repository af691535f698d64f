use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Cleaned numeric feature matrix with binary labels.
///
/// `x` is row-major: row `i` occupies `x[i * n_features .. (i + 1) * n_features]`.
/// Construction checks that every value is finite and every label is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    x: Vec<f64>,
    y: Vec<u8>,
    scaled_with: Option<String>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        let p = feature_names.len();
        let mut seen = HashSet::with_capacity(p);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Invalid(format!("duplicate feature name `{name}`")));
            }
        }
        let expected = y
            .len()
            .checked_mul(p)
            .ok_or_else(|| Error::Invalid("dataset too large".into()))?;
        if x.len() != expected {
            return Err(Error::Invalid(format!(
                "matrix has {} values, expected {} rows x {} features",
                x.len(),
                y.len(),
                p
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite value at row {}, feature `{}`",
                pos / p,
                feature_names[pos % p]
            )));
        }
        if let Some(pos) = y.iter().position(|&l| l > 1) {
            return Err(Error::Invalid(format!("label {} at row {pos} is not 0/1", y[pos])));
        }
        Ok(Dataset {
            feature_names,
            x,
            y,
            scaled_with: None,
        })
    }

    /// Builds a dataset from column vectors.
    pub fn from_columns(feature_names: Vec<String>, columns: &[Vec<f64>], y: Vec<u8>) -> Result<Self> {
        if columns.len() != feature_names.len() {
            return Err(Error::Invalid(format!(
                "{} columns for {} feature names",
                columns.len(),
                feature_names.len()
            )));
        }
        let n = y.len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: c.len(),
                right: n,
            });
        }
        let p = columns.len();
        let mut x = vec![0.0; n * p];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                x[i * p + j] = *v;
            }
        }
        Dataset::new(feature_names, x, y)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.n_features() + feature]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.n_features();
        self.x
            .iter()
            .skip(j)
            .step_by(p.max(1))
            .copied()
            .take(self.n_rows())
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// `[benign, attack]` row counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - ones, ones]
    }

    pub fn has_both_classes(&self) -> bool {
        let [neg, pos] = self.class_counts();
        neg > 0 && pos > 0
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let [neg, pos] = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::SingleClass(format!("{neg} benign rows, {pos} attack rows")));
        }
        Ok(())
    }

    /// Fingerprint of the scaler that standardised this dataset, if any.
    pub fn scaled_with(&self) -> Option<&str> {
        self.scaled_with.as_deref()
    }

    pub(crate) fn mark_scaled(&mut self, fingerprint: String) {
        self.scaled_with = Some(fingerprint);
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<f64>, Vec<u8>, Option<String>) {
        (self.feature_names, self.x, self.y, self.scaled_with)
    }

    pub(crate) fn from_parts_unchecked(
        feature_names: Vec<String>,
        x: Vec<f64>,
        y: Vec<u8>,
        scaled_with: Option<String>,
    ) -> Self {
        Dataset {
            feature_names,
            x,
            y,
            scaled_with,
        }
    }

    /// Rows at `indices`, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Dataset {
        let p = self.n_features();
        let mut x = Vec::with_capacity(indices.len() * p);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            x,
            y,
            scaled_with: self.scaled_with.clone(),
        }
    }

    /// Projects onto the named features, in the order given.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| Error::MissingColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = self.n_features();
        let mut x = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.x.chunks_exact(p.max(1)).take(self.n_rows()) {
            x.extend(idx.iter().map(|&j| row[j]));
        }
        let names = names.iter().map(|n| n.as_ref().to_string()).collect();
        // Column projection of a standardised dataset stays standardised.
        Ok(Dataset {
            feature_names: names,
            x,
            y: self.y.clone(),
            scaled_with: self.scaled_with.clone(),
        })
    }

    /// SHA-256 over names, values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for name in &self.feature_names {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
        }
        for v in &self.x {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(&self.y);
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_from(&mut BufReader::new(file))
    }

    /// Writes the features plus a trailing 0/1 `label_column` as CSV.
    /// Values use the shortest representation that parses back exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.feature_names.iter().map(String::as_str).chain([label_column]))?;
        let mut record = Vec::with_capacity(self.n_features() + 1);
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.row(i).iter().map(f64::to_string));
            record.push(self.y[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Serialises in the `FSDS` v1 container:
    ///
    /// ```text
    /// magic      4 bytes  "FSDS"
    /// version    u32 LE   1
    /// n_rows     u64 LE
    /// n_features u64 LE
    /// labels     u8       1 when a label vector follows the matrix
    /// scaled     u32 LE length + UTF-8 scaler fingerprint (length 0 = unscaled)
    /// names      n_features x (u32 LE length + UTF-8 bytes)
    /// matrix     n_rows * n_features f64 LE, row-major
    /// labels     n_rows u8
    /// ```
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_rows() as u64).to_le_bytes())?;
        w.write_all(&(self.n_features() as u64).to_le_bytes())?;
        w.write_all(&[1u8])?;
        write_str(w, self.scaled_with.as_deref().unwrap_or(""))?;
        for name in &self.feature_names {
            write_str(w, name)?;
        }
        for v in &self.x {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.y)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n_rows = u64::from_le_bytes(read_array(r)?) as usize;
        let n_features = u64::from_le_bytes(read_array(r)?) as usize;
        let [has_labels] = read_array::<_, 1>(r)?;
        if has_labels != 1 {
            return Err(Error::Format("unlabelled datasets are not supported".into()));
        }
        let scaled = read_str(r)?;
        let mut names = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            names.push(read_str(r)?);
        }
        let len = n_rows
            .checked_mul(n_features)
            .ok_or_else(|| Error::Format("header overflow".into()))?;
        let mut x = Vec::with_capacity(len);
        for _ in 0..len {
            x.push(f64::from_le_bytes(read_array(r)?));
        }
        let mut y = vec![0u8; n_rows];
        read_exact(r, &mut y)?;
        let mut d = Dataset::new(names, x, y)?;
        if !scaled.is_empty() {
            d.scaled_with = Some(scaled);
        }
        Ok(d)
    }
}

const MAGIC: &[u8; 4] = b"FSDS";
const FORMAT_VERSION: u32 = 1;

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid UTF-8: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn csv_export_round_trips_through_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0],
            vec![1, 0],
        )
        .unwrap();
        d.write_csv(&path, "label").unwrap();
        let opts = crate::flowdata::IngestOptions {
            label_column: "label".into(),
            rule: crate::flowdata::LabelRule::binary(),
            drop_columns: vec![],
            schema: Default::default(),
        };
        let (back, _) = crate::flowdata::ingest(&[path], &opts).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(Dataset::new(vec!["a".into()], vec![f64::NAN], vec![0]).is_err());
        assert!(Dataset::new(vec!["a".into()], vec![f64::INFINITY], vec![0]).is_err());
        assert!(Dataset::new(vec!["a".into()], vec![1.0], vec![2]).is_err());
        assert!(Dataset::new(vec!["a".into(), "a".into()], vec![1.0, 2.0], vec![0]).is_err());
    }

    #[test]
    fn accessors() {
        let d = small();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.column(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(d.class_counts(), [1, 2]);
        let s = d.select_features(&["b"]).unwrap();
        assert_eq!(s.x(), &[2.0, 4.0, 6.0]);
        let r = d.subset_rows(&[2, 0]);
        assert_eq!(r.x(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(r.y(), &[1, 0]);
    }

    #[test]
    fn binary_round_trip() {
        let mut d = small();
        d.mark_scaled("abc".into());
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.fingerprint(), d.fingerprint());
        assert!(Dataset::read_from(&mut &buf[..buf.len() - 1]).is_err());
    }
}
