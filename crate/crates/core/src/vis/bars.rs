use serde::{Deserialize, Serialize};

use super::VisError;
use crate::dataset::{BpType, ClinicalEvent, PatientStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BarFlag {
    Above,
    Below,
    InRange,
    OutRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bar {
    pub t: f64,
    pub value: f64,
    pub flag: BarFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BarModel {
    pub bp_type: BpType,
    pub bars: Vec<Bar>,
    pub baseline_low: f64,
    pub baseline_high: Option<f64>,
    pub event_marks: Vec<ClinicalEvent>,
}

/// Single mode: `above` iff strictly greater than the baseline. Dual mode:
/// `inRange` iff `low <= value <= high`.
pub fn bar_flag(value: f64, low: f64, high: Option<f64>) -> BarFlag {
    match high {
        None if value > low => BarFlag::Above,
        None => BarFlag::Below,
        Some(h) if low <= value && value <= h => BarFlag::InRange,
        Some(_) => BarFlag::OutRange,
    }
}

pub fn build_bars(
    store: &PatientStore,
    uid: &str,
    bp_type: BpType,
    baseline_low: f64,
    baseline_high: Option<f64>,
) -> Result<BarModel, VisError> {
    if !baseline_low.is_finite() || baseline_high.is_some_and(|h| !(h.is_finite() && h > baseline_low)) {
        return Err(VisError::InvalidConfig("baselineHigh must exceed baselineLow".into()));
    }
    let series = store.derive_series(uid, bp_type).map_err(|_| VisError::UnknownUid(uid.to_owned()))?;
    let bars = series
        .into_iter()
        .map(|(t, value)| Bar { t, value, flag: bar_flag(value, baseline_low, baseline_high) })
        .collect();
    let event_marks = store.events(uid).map_err(|_| VisError::UnknownUid(uid.to_owned()))?.to_vec();
    Ok(BarModel { bp_type, bars, baseline_low, baseline_high, event_marks })
}
