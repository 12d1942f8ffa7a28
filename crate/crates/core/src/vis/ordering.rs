//! Row ordering and outcome banding shared by the matrix and the cohort
//! manager.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fold::fold_time;
use super::VisError;
use crate::dataset::{BpType, PatientStore, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKey {
    #[default]
    MrsDischarge,
    Mrs3mo,
    NihssInitial,
}

impl OutcomeKey {
    pub fn field(self) -> &'static str {
        match self {
            OutcomeKey::MrsDischarge => "mrs_discharge",
            OutcomeKey::Mrs3mo => "mrs_3mo",
            OutcomeKey::NihssInitial => "nihss_initial",
        }
    }

    /// Band token for a score: mRS 0-1 / 2-3 / 4-6, NIHSS 0-4 / 5-15 / 16+.
    pub fn band(self, value: f64) -> &'static str {
        let (green_max, amber_max) = match self {
            OutcomeKey::MrsDischarge | OutcomeKey::Mrs3mo => (1.0, 3.0),
            OutcomeKey::NihssInitial => (4.0, 15.0),
        };
        if value <= green_max {
            "green"
        } else if value <= amber_max {
            "amber"
        } else {
            "red"
        }
    }

    /// Checks that the store actually has the outcome column.
    pub fn resolve(self, store: &PatientStore) -> Result<Self, VisError> {
        match store.codebook().get_in(Table::Clinical, self.field()) {
            Some(_) => Ok(self),
            None => Err(VisError::UnknownOutcomeKey(self.field().into())),
        }
    }
}

impl FromStr for OutcomeKey {
    type Err = VisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mrs_discharge" | "mrs" => Ok(OutcomeKey::MrsDischarge),
            "mrs_3mo" => Ok(OutcomeKey::Mrs3mo),
            "nihss_initial" | "nihss" => Ok(OutcomeKey::NihssInitial),
            other => Err(VisError::UnknownOutcomeKey(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum SortKey {
    ClinicalField {
        name: String,
    },
    /// Mean of the series inside window `window` of a `cycle_hours` folding.
    #[serde(rename_all = "camelCase")]
    WindowMean {
        bp_type: BpType,
        window: usize,
        cycle_hours: f64,
    },
    Outcome {
        kind: OutcomeKey,
    },
}

impl SortKey {
    pub fn field(name: &str) -> Self {
        SortKey::ClinicalField { name: name.to_owned() }
    }

    pub fn window_mean(bp_type: BpType, window: usize) -> Self {
        SortKey::WindowMean { bp_type, window, cycle_hours: 24.0 }
    }

    /// Per-row sort value, `None` when missing.
    pub fn values(&self, store: &PatientStore, rows: &[usize]) -> Result<Vec<Option<f64>>, VisError> {
        match self {
            SortKey::ClinicalField { name } => {
                if store.codebook().get_in(Table::Clinical, name).is_none() {
                    return Err(VisError::UnknownSortKey(self.to_string()));
                }
                let col = store.column(name).ok_or_else(|| VisError::UnknownSortKey(self.to_string()))?;
                Ok(rows.iter().map(|&r| col.get_f64(r)).collect())
            }
            SortKey::Outcome { kind } => {
                let col = store.column(kind.field()).ok_or_else(|| VisError::UnknownSortKey(self.to_string()))?;
                Ok(rows.iter().map(|&r| col.get_f64(r)).collect())
            }
            SortKey::WindowMean { bp_type, window, cycle_hours } => {
                if !(*cycle_hours > 0.0) {
                    return Err(VisError::UnknownSortKey(self.to_string()));
                }
                Ok(rows
                    .iter()
                    .map(|&r| {
                        let (sum, n) = store
                            .bp_at(r)
                            .iter()
                            .filter(|m| fold_time(m.t, *cycle_hours).0 == *window)
                            .fold((0.0, 0usize), |(s, n), m| (s + m.value(*bp_type), n + 1));
                        (n > 0).then(|| sum / n as f64)
                    })
                    .collect())
            }
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortKey::ClinicalField { name } => write!(f, "field:{name}"),
            SortKey::WindowMean { bp_type, window, cycle_hours } => {
                write!(f, "window_mean:{}:{window}:{cycle_hours}", bp_type.as_str())
            }
            SortKey::Outcome { kind } => write!(f, "outcome:{}", kind.field()),
        }
    }
}

/// Accepts `field:<name>` (or a bare name), `window_mean:<bp>:<n>[:<cycle>]`
/// and `outcome:<kind>`.
impl FromStr for SortKey {
    type Err = VisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || VisError::UnknownSortKey(s.to_owned());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [name] if !name.is_empty() => Ok(SortKey::field(name)),
            ["field", name] if !name.is_empty() => Ok(SortKey::field(name)),
            ["outcome", kind] => Ok(SortKey::Outcome { kind: kind.parse().map_err(|_| bad())? }),
            ["window_mean", bp, n, rest @ ..] if rest.len() <= 1 => {
                let cycle_hours = match rest {
                    [c] => c.parse::<f64>().map_err(|_| bad())?,
                    _ => 24.0,
                };
                Ok(SortKey::WindowMean {
                    bp_type: bp.parse().map_err(|_| bad())?,
                    window: n.parse().map_err(|_| bad())?,
                    cycle_hours,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    #[default]
    Ascending,
    Descending,
}

impl FromStr for SortDirection {
    type Err = VisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => Ok(SortDirection::Ascending),
            "desc" | "descending" => Ok(SortDirection::Descending),
            other => Err(VisError::InvalidConfig(format!("unknown sort direction `{other}`"))),
        }
    }
}

/// Orders rows by key. Missing values sink to the end in either direction and
/// ties fall back to ascending uid. Returns `(row, sort value)` pairs.
pub fn order_rows(
    store: &PatientStore,
    rows: &[usize],
    key: &SortKey,
    direction: SortDirection,
) -> Result<Vec<(usize, Option<f64>)>, VisError> {
    let values = key.values(store, rows)?;
    let mut pairs: Vec<(usize, Option<f64>)> = rows.iter().copied().zip(values).collect();
    pairs.sort_by(|(ra, va), (rb, vb)| {
        let primary = match (va, vb) {
            (Some(a), Some(b)) => match direction {
                SortDirection::Ascending => a.total_cmp(b),
                SortDirection::Descending => b.total_cmp(a),
            },
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        primary.then_with(|| store.uid_at(*ra).cmp(store.uid_at(*rb)))
    });
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_key_strings() {
        assert_eq!("age".parse::<SortKey>().unwrap(), SortKey::field("age"));
        assert_eq!("window_mean:sbp:0".parse::<SortKey>().unwrap(), SortKey::window_mean(BpType::Sbp, 0));
        assert_eq!(
            "outcome:nihss_initial".parse::<SortKey>().unwrap(),
            SortKey::Outcome { kind: OutcomeKey::NihssInitial }
        );
        assert!("window_mean:xyz:0".parse::<SortKey>().is_err());
        assert!("".parse::<SortKey>().is_err());
        let k = SortKey::WindowMean { bp_type: BpType::Map, window: 3, cycle_hours: 12.0 };
        assert_eq!(k.to_string().parse::<SortKey>().unwrap(), k);
    }

    #[test]
    fn outcome_bands() {
        let m = OutcomeKey::MrsDischarge;
        assert_eq!(
            [0.0, 1.0, 2.0, 3.0, 4.0, 6.0].map(|v| m.band(v)),
            ["green", "green", "amber", "amber", "red", "red"]
        );
        let n = OutcomeKey::NihssInitial;
        assert_eq!([4.0, 5.0, 15.0, 16.0].map(|v| n.band(v)), ["green", "amber", "amber", "red"]);
    }
}
