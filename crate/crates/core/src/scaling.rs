//! Z-score standardisation, fit on one dataset and applied to any dataset
//! with the same feature names.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    pub std: f64,
}

/// Per-feature mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    feature_names: Vec<String>,
    scales: Vec<FeatureScale>,
    mode: StdMode,
    fingerprint: String,
}

impl ScalerParams {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn scales(&self) -> &[FeatureScale] {
        &self.scales
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.scales[j].mean
    }

    pub fn std(&self, j: usize) -> f64 {
        self.scales[j].std
    }

    pub fn mode(&self) -> StdMode {
        self.mode
    }

    /// Fingerprint of the dataset these parameters were fit on.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Identifies this scaler; stamped on datasets it transforms.
    pub fn id(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.fingerprint.as_bytes());
        for s in &self.scales {
            h.update(s.mean.to_bits().to_le_bytes());
            h.update(s.std.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScalerFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScalerFile = serde_json::from_str(text)?;
        Ok(file.into())
    }

    /// Applies `x' = (x − mean) / std`; zero-variance features map to 0.
    ///
    /// A dataset already standardised by any scaler is rejected. Applying
    /// parameters fit on a different dataset (held-out rows) is allowed and
    /// logged.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        if d.feature_names() != self.feature_names.as_slice() {
            return Err(Error::FeatureMismatch(format!(
                "scaler has {:?}, dataset has {:?}",
                self.feature_names,
                d.feature_names()
            )));
        }
        if let Some(prev) = d.scaled_with() {
            return Err(Error::AlreadyScaled(prev.to_string()));
        }
        if d.fingerprint() != self.fingerprint {
            log::warn!("applying scaler to a dataset other than the one it was fit on");
        }
        let p = self.scales.len();
        let (names, mut x, y, _) = d.clone().into_parts();
        if p > 0 {
            for row in x.chunks_exact_mut(p) {
                for (v, s) in row.iter_mut().zip(&self.scales) {
                    *v = if s.std > 0.0 { (*v - s.mean) / s.std } else { 0.0 };
                }
            }
        }
        let mut out = Dataset::from_parts_unchecked(names, x, y, None);
        out.mark_scaled(self.id());
        Ok(out)
    }
}

pub fn fit_scaler(d: &Dataset) -> Result<ScalerParams> {
    fit_scaler_with(d, StdMode::Population)
}

pub fn fit_scaler_with(d: &Dataset, mode: StdMode) -> Result<ScalerParams> {
    let n = d.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit a scaler on zero rows".into()));
    }
    let scales = (0..d.n_features())
        .into_par_iter()
        .map(|j| {
            let col = d.column(j);
            let mean = compensated_sum(col.iter().copied()) / n as f64;
            let ss = compensated_sum(col.iter().map(|v| (v - mean) * (v - mean)));
            let denom = match mode {
                StdMode::Population => n as f64,
                StdMode::Sample if n > 1 => (n - 1) as f64,
                StdMode::Sample => 1.0,
            };
            FeatureScale {
                mean,
                std: (ss / denom).sqrt(),
            }
        })
        .collect();
    Ok(ScalerParams {
        feature_names: d.feature_names().to_vec(),
        scales,
        mode,
        fingerprint: d.fingerprint(),
    })
}

/// JSON shape: `{"schema_version", "mode", "fitted_on", "features": {name: {mean, std}}}`.
#[derive(Serialize, Deserialize)]
struct ScalerFile {
    schema_version: u32,
    mode: StdMode,
    fitted_on: String,
    features: serde_json::Map<String, serde_json::Value>,
}

impl From<&ScalerParams> for ScalerFile {
    fn from(p: &ScalerParams) -> Self {
        let features = p
            .feature_names
            .iter()
            .zip(&p.scales)
            .map(|(n, s)| (n.clone(), serde_json::to_value(s).expect("finite scale")))
            .collect();
        ScalerFile {
            schema_version: crate::SCHEMA_VERSION,
            mode: p.mode,
            fitted_on: p.fingerprint.clone(),
            features,
        }
    }
}

impl From<ScalerFile> for ScalerParams {
    fn from(f: ScalerFile) -> Self {
        let mut feature_names = Vec::with_capacity(f.features.len());
        let mut scales = Vec::with_capacity(f.features.len());
        for (name, v) in f.features {
            feature_names.push(name);
            scales.push(serde_json::from_value(v).unwrap_or(FeatureScale { mean: 0.0, std: 0.0 }));
        }
        ScalerParams {
            feature_names,
            scales,
            mode: f.mode,
            fingerprint: f.fitted_on,
        }
    }
}

impl Serialize for ScalerParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScalerFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalerParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ScalerFile::deserialize(d).map(Into::into)
    }
}
