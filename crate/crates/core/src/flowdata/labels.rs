use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPattern {
    Exact(String),
    Prefix(String),
}

impl LabelPattern {
    fn matches(&self, label: &str) -> bool {
        match self {
            LabelPattern::Exact(s) => label == s,
            LabelPattern::Prefix(p) => label.starts_with(p.as_str()),
        }
    }

    fn overlaps(&self, benign: &str) -> bool {
        self.matches(benign)
    }
}

/// Maps raw label strings onto {0 = benign, 1 = attack}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRule {
    pub benign_labels: BTreeSet<String>,
    pub attack_labels: Vec<LabelPattern>,
    pub unknown_policy: UnknownPolicy,
}

/// Result of classifying one label string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelClass {
    Benign,
    Attack,
    Unknown,
}

impl LabelRule {
    pub fn new(
        benign_labels: impl IntoIterator<Item = impl Into<String>>,
        attack_labels: Vec<LabelPattern>,
        unknown_policy: UnknownPolicy,
    ) -> Result<Self> {
        let rule = LabelRule {
            benign_labels: benign_labels.into_iter().map(Into::into).collect(),
            attack_labels,
            unknown_policy,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.benign_labels {
            if let Some(p) = self.attack_labels.iter().find(|p| p.overlaps(b)) {
                return Err(Error::Config(format!(
                    "benign label `{b}` also matches attack pattern {p:?}"
                )));
            }
        }
        Ok(())
    }

    /// CIC IDS 2017: `BENIGN` vs `DDoS`; every other attack family is dropped.
    pub fn cic_ids2017() -> Self {
        LabelRule {
            benign_labels: ["BENIGN".to_string()].into(),
            attack_labels: vec![LabelPattern::Exact("DDoS".into())],
            unknown_policy: UnknownPolicy::Drop,
        }
    }

    /// CIC IoT 2023: `BenignTraffic` vs every `DDoS-*` / `DoS-*` family.
    pub fn cic_iot2023() -> Self {
        LabelRule {
            benign_labels: ["BenignTraffic".to_string()].into(),
            attack_labels: vec![LabelPattern::Prefix("DDoS".into()), LabelPattern::Prefix("DoS".into())],
            unknown_policy: UnknownPolicy::Drop,
        }
    }

    /// Numeric `0` / `1` labels, as written by the synthetic generator.
    pub fn binary() -> Self {
        LabelRule {
            benign_labels: ["0".to_string()].into(),
            attack_labels: vec![LabelPattern::Exact("1".into())],
            unknown_policy: UnknownPolicy::Error,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rule: LabelRule = serde_json::from_str(&text)?;
        rule.validate()?;
        Ok(rule)
    }

    /// Labels are compared after trimming surrounding whitespace.
    pub fn classify(&self, label: &str) -> LabelClass {
        let label = label.trim();
        if self.benign_labels.contains(label) {
            LabelClass::Benign
        } else if self.attack_labels.iter().any(|p| p.matches(label)) {
            LabelClass::Attack
        } else {
            LabelClass::Unknown
        }
    }
}

/// Named dataset profiles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    CicIds2017,
    CicIot2023,
    #[default]
    Custom,
}

impl Profile {
    /// Identifier columns removed before any numeric processing.
    pub fn identifier_columns(self) -> &'static [&'static str] {
        match self {
            Profile::CicIds2017 => &["Flow ID", "Source IP", "Destination IP", "Timestamp"],
            Profile::CicIot2023 | Profile::Custom => &[],
        }
    }

    pub fn default_label_column(self) -> &'static str {
        match self {
            Profile::CicIds2017 => "Label",
            Profile::CicIot2023 => "label",
            Profile::Custom => "label",
        }
    }

    /// `None` for `Custom`, which needs an explicit rule file.
    pub fn label_rule(self) -> Option<LabelRule> {
        match self {
            Profile::CicIds2017 => Some(LabelRule::cic_ids2017()),
            Profile::CicIot2023 => Some(LabelRule::cic_iot2023()),
            Profile::Custom => None,
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cic-ids2017" => Ok(Profile::CicIds2017),
            "cic-iot2023" => Ok(Profile::CicIot2023),
            "custom" => Ok(Profile::Custom),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iot_profile_maps_dos_families() {
        let r = LabelRule::cic_iot2023();
        assert_eq!(r.classify("BenignTraffic"), LabelClass::Benign);
        assert_eq!(r.classify("DDoS-ICMP_Flood"), LabelClass::Attack);
        assert_eq!(r.classify("DoS-UDP_Flood"), LabelClass::Attack);
        assert_eq!(r.classify("Mirai-greeth_flood"), LabelClass::Unknown);
    }

    #[test]
    fn ids_profile_keeps_only_ddos() {
        let r = LabelRule::cic_ids2017();
        assert_eq!(r.classify(" BENIGN "), LabelClass::Benign);
        assert_eq!(r.classify("DDoS"), LabelClass::Attack);
        assert_eq!(r.classify("PortScan"), LabelClass::Unknown);
        assert_eq!(r.classify("DoS Hulk"), LabelClass::Unknown);
    }

    #[test]
    fn overlapping_rule_rejected() {
        let bad = LabelRule::new(
            ["DoS-benign"],
            vec![LabelPattern::Prefix("DoS".into())],
            UnknownPolicy::Drop,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rule_json_round_trip() {
        let r = LabelRule::cic_iot2023();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<LabelRule>(&text).unwrap(), r);
    }
}
