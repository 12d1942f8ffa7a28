//! Data model, ingestion and synthetic generation.

mod load;
mod stats;
mod store;
pub mod synth;

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use load::{load_dataset, load_dataset_dir, write_dataset, DATASET_FILES};
pub use stats::{descriptive_stats, StatsSummary};
pub use store::{Column, PatientStore, StoreBuilder};
pub use synth::{generate_synthetic, synthesize, SynthConfig, SynthReport};

/// Patient identifier as it appears in `clinical.csv`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Uid(pub String);

impl Uid {
    pub fn new(s: impl Into<String>) -> Self {
        Uid(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for Uid {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Uid {
    fn from(s: &str) -> Self {
        Uid(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Clinical,
    Bp,
    Events,
}

impl Table {
    pub fn as_str(self) -> &'static str {
        match self {
            Table::Clinical => "clinical",
            Table::Bp => "bp",
            Table::Events => "events",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Numeric,
    Categorical,
}

impl Dtype {
    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::Numeric => "numeric",
            Dtype::Categorical => "categorical",
        }
    }
}

/// Metadata for one column. This, and nothing drawn from the data itself, is
/// what the wrangler is allowed to show an LLM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub name: String,
    pub table: Table,
    pub dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding: Option<BTreeMap<i64, String>>,
    #[serde(default)]
    pub description: String,
}

impl FieldDescriptor {
    pub fn numeric(name: &str, table: Table, unit: Option<&str>, description: &str) -> Self {
        FieldDescriptor {
            name: name.to_owned(),
            table,
            dtype: Dtype::Numeric,
            unit: unit.map(str::to_owned),
            coding: None,
            description: description.to_owned(),
        }
    }

    pub fn categorical(name: &str, table: Table, coding: &[(i64, &str)], description: &str) -> Self {
        FieldDescriptor {
            name: name.to_owned(),
            table,
            dtype: Dtype::Categorical,
            unit: None,
            coding: Some(coding.iter().map(|(c, l)| (*c, (*l).to_owned())).collect()),
            description: description.to_owned(),
        }
    }

    /// Resolve a label to its code. Exact match first, then ASCII
    /// case-insensitive.
    pub fn code_for_label(&self, label: &str) -> Option<i64> {
        let coding = self.coding.as_ref()?;
        coding
            .iter()
            .find(|(_, l)| l.as_str() == label)
            .or_else(|| coding.iter().find(|(_, l)| l.eq_ignore_ascii_case(label)))
            .map(|(c, _)| *c)
    }

    pub fn label_for_code(&self, code: i64) -> Option<&str> {
        self.coding.as_ref()?.get(&code).map(String::as_str)
    }

    fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("empty field name".into());
        }
        match (self.dtype, &self.coding) {
            (Dtype::Categorical, None) => Err("categorical field without coding".into()),
            (Dtype::Categorical, Some(c)) if c.is_empty() => Err("categorical field with empty coding".into()),
            (Dtype::Numeric, Some(_)) => Err("numeric field must not carry a coding".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Codebook {
    pub dataset_name: String,
    pub version: String,
    pub fields: Vec<FieldDescriptor>,
}

impl Codebook {
    pub fn get(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn get_in(&self, table: Table, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.table == table && f.name == name)
    }

    pub fn fields_in(&self, table: Table) -> impl Iterator<Item = &FieldDescriptor> {
        self.fields.iter().filter(move |f| f.table == table)
    }

    /// Checks per-descriptor invariants and name uniqueness within a table.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for f in &self.fields {
            if let Err(reason) = f.validate() {
                out.push(Violation::Schema { field: f.name.clone(), reason });
            }
            if !seen.insert((f.table, f.name.as_str())) {
                out.push(Violation::Schema { field: f.name.clone(), reason: "duplicate descriptor".into() });
            }
        }
        out
    }

    /// Known event kind labels: the built-in four plus anything in the
    /// `events.kind` coding.
    pub fn event_kinds(&self) -> Vec<String> {
        let mut kinds: Vec<String> = EventKind::BUILTIN.iter().map(|k| k.label().to_owned()).collect();
        if let Some(coding) = self.get_in(Table::Events, "kind").and_then(|d| d.coding.as_ref()) {
            for label in coding.values() {
                if !kinds.iter().any(|k| k.eq_ignore_ascii_case(label)) {
                    kinds.push(label.clone());
                }
            }
        }
        kinds
    }

    /// Field names ranked by edit distance to `name`, closest first.
    pub fn nearest_names(&self, name: &str, limit: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &str)> = self
            .fields
            .iter()
            .filter(|f| f.table == Table::Clinical)
            .map(|f| (edit_distance(name, &f.name), f.name.as_str()))
            .collect();
        scored.sort();
        let cutoff = (name.len() / 2).max(3);
        scored
            .into_iter()
            .filter(|(d, n)| *d <= cutoff || n.contains(name) || name.contains(n))
            .take(limit)
            .map(|(_, n)| n.to_owned())
            .collect()
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Numeric(f64),
    Code(i64),
    Missing,
}

impl FieldValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            FieldValue::Numeric(v) => Some(v),
            FieldValue::Code(c) => Some(c as f64),
            FieldValue::Missing => None,
        }
    }
}

/// Row view of one patient's static clinical values.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub uid: Uid,
    pub clinical: BTreeMap<String, FieldValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpMeasurement {
    /// Hours since stroke onset.
    pub t: f64,
    pub sbp: f64,
    pub dbp: f64,
}

impl BpMeasurement {
    pub fn value(&self, bp: BpType) -> f64 {
        match bp {
            BpType::Sbp => self.sbp,
            BpType::Dbp => self.dbp,
            BpType::Map => mean_arterial(self.sbp, self.dbp),
        }
    }
}

pub fn mean_arterial(sbp: f64, dbp: f64) -> f64 {
    dbp + (sbp - dbp) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BpType {
    #[default]
    Sbp,
    Dbp,
    Map,
}

impl BpType {
    pub const ALL: [BpType; 3] = [BpType::Sbp, BpType::Dbp, BpType::Map];

    pub fn as_str(self) -> &'static str {
        match self {
            BpType::Sbp => "sbp",
            BpType::Dbp => "dbp",
            BpType::Map => "map",
        }
    }
}

impl std::str::FromStr for BpType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sbp" => Ok(BpType::Sbp),
            "dbp" => Ok(BpType::Dbp),
            "map" => Ok(BpType::Map),
            other => Err(format!("unknown bp type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Ivt,
    Iat,
    Recurrence,
    SymHt,
    Other(String),
}

impl EventKind {
    pub const BUILTIN: [EventKind; 4] = [EventKind::Ivt, EventKind::Iat, EventKind::Recurrence, EventKind::SymHt];

    pub fn label(&self) -> &str {
        match self {
            EventKind::Ivt => "IVT",
            EventKind::Iat => "IAT",
            EventKind::Recurrence => "recurrence",
            EventKind::SymHt => "symHT",
            EventKind::Other(s) => s,
        }
    }

    /// Case-insensitive for the built-in kinds; anything else becomes `Other`.
    pub fn from_label(s: &str) -> EventKind {
        EventKind::BUILTIN
            .iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .cloned()
            .unwrap_or_else(|| EventKind::Other(s.to_owned()))
    }

    pub fn matches(&self, label: &str) -> bool {
        self.label().eq_ignore_ascii_case(label)
    }
}

impl Serialize for EventKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(EventKind::from_label(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClinicalEvent {
    pub kind: EventKind,
    pub t_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl ClinicalEvent {
    /// Closed interval covered by the event; point events collapse to one instant.
    pub fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end.unwrap_or(self.t_start))
    }
}

/// One problem found while loading or validating a dataset.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{file}:{line}: {reason}")]
    Format { file: String, line: usize, reason: String },
    #[error("schema error on field `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("integrity error for uid `{uid}`: {reason}")]
    Integrity { uid: String, reason: String },
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset rejected with {} violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("unknown uid `{0}`")]
    UnknownUid(String),
}

impl DatasetError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            DatasetError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_is_one_third_pulse_pressure_above_dbp() {
        assert_eq!(mean_arterial(160.0, 100.0), 120.0);
        assert_eq!(mean_arterial(90.0, 90.0), 90.0);
    }

    #[test]
    fn descriptor_invariants() {
        let mut d = FieldDescriptor::numeric("age", Table::Clinical, Some("years"), "");
        assert!(d.validate().is_ok());
        d.coding = Some(BTreeMap::new());
        assert!(d.validate().is_err());
        let c = FieldDescriptor::categorical("toast", Table::Clinical, &[(1, "LAA")], "");
        assert!(c.validate().is_ok());
        assert_eq!(c.code_for_label("laa"), Some(1));
        assert_eq!(c.code_for_label("SVO"), None);
    }

    #[test]
    fn nearest_names_suggests_close_fields() {
        let cb = Codebook {
            dataset_name: "t".into(),
            version: "1".into(),
            fields: vec![
                FieldDescriptor::numeric("age", Table::Clinical, None, ""),
                FieldDescriptor::numeric("nihss_initial", Table::Clinical, None, ""),
            ],
        };
        assert_eq!(cb.nearest_names("agee", 3), vec!["age".to_owned()]);
        assert!(cb.nearest_names("antiplatelet_time", 3).is_empty());
    }

    #[test]
    fn event_kind_labels() {
        assert_eq!(EventKind::from_label("iat"), EventKind::Iat);
        assert_eq!(EventKind::from_label("thrombectomy"), EventKind::Other("thrombectomy".into()));
    }
}
