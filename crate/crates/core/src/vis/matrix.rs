use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::fold::fold_time;
use super::ordering::{order_rows, OutcomeKey, SortDirection, SortKey};
use super::VisError;
use crate::dataset::{BpType, PatientStore, Uid};
use crate::dsl::candidate_rows;

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One legend band: values strictly below `upper_bound` (and at or above the
/// previous bound) get `category`. The last bound is +inf, serialized as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LegendEntry {
    #[serde(with = "infinite_as_null")]
    pub upper_bound: f64,
    pub category: String,
    pub color_token: String,
}

fn legend(entries: &[(f64, &str)]) -> Vec<LegendEntry> {
    entries
        .iter()
        .map(|(b, c)| LegendEntry { upper_bound: *b, category: (*c).into(), color_token: format!("bp-{c}") })
        .collect()
}

/// Default bands per series. SBP follows the usual adult categories; DBP and
/// MAP use the corresponding diastolic and derived cutoffs.
pub fn default_legend(bp: BpType) -> Vec<LegendEntry> {
    match bp {
        BpType::Sbp => legend(&[
            (120.0, "normal"),
            (130.0, "elevated"),
            (140.0, "stage1"),
            (180.0, "stage2"),
            (f64::INFINITY, "crisis"),
        ]),
        BpType::Dbp => legend(&[(80.0, "normal"), (90.0, "stage1"), (120.0, "stage2"), (f64::INFINITY, "crisis")]),
        BpType::Map => legend(&[
            (93.0, "normal"),
            (97.0, "elevated"),
            (107.0, "stage1"),
            (140.0, "stage2"),
            (f64::INFINITY, "crisis"),
        ]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FoldConfig {
    pub cycle_hours: f64,
    pub bp_type: BpType,
    pub category_legend: Vec<LegendEntry>,
    pub opacity_floor: f64,
    pub opacity_ref_count: u32,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig::for_series(BpType::Sbp)
    }
}

impl FoldConfig {
    pub fn for_series(bp: BpType) -> Self {
        FoldConfig {
            cycle_hours: 24.0,
            bp_type: bp,
            category_legend: default_legend(bp),
            opacity_floor: 0.15,
            opacity_ref_count: 6,
        }
    }

    pub fn validate(&self) -> Result<(), VisError> {
        let bad = |m: &str| Err(VisError::InvalidConfig(m.into()));
        if !(self.cycle_hours.is_finite() && self.cycle_hours > 0.0) {
            return bad("cycleHours must be > 0");
        }
        if !(self.opacity_floor > 0.0 && self.opacity_floor <= 1.0) {
            return bad("opacityFloor must be in (0, 1]");
        }
        if self.opacity_ref_count == 0 {
            return bad("opacityRefCount must be >= 1");
        }
        let bounds: Vec<f64> = self.category_legend.iter().map(|e| e.upper_bound).collect();
        if bounds.is_empty() || bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("legend bounds must be strictly increasing");
        }
        if bounds.last() != Some(&f64::INFINITY) {
            return bad("last legend bound must be +inf");
        }
        Ok(())
    }

    pub fn category(&self, value: f64) -> &LegendEntry {
        self.category_legend
            .iter()
            .find(|e| e.upper_bound > value)
            .unwrap_or_else(|| self.category_legend.last().expect("validated legend"))
    }

    pub fn alpha(&self, count: usize) -> f64 {
        let ramp = (count as f64 / f64::from(self.opacity_ref_count)).min(1.0);
        self.opacity_floor + (1.0 - self.opacity_floor) * ramp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixRow {
    pub uid: Uid,
    pub outcome_band: Option<String>,
    pub sort_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixCell {
    pub row: usize,
    pub window: usize,
    pub mean_value: f64,
    pub count: usize,
    pub category_name: String,
    pub color_token: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixModel {
    pub bp_type: BpType,
    pub cycle_hours: f64,
    pub rows: Vec<MatrixRow>,
    pub n_windows: usize,
    /// Non-empty cells only, ordered by `(row, window)`.
    pub cells: Vec<MatrixCell>,
}

impl MatrixModel {
    pub fn cell(&self, row: usize, window: usize) -> Option<&MatrixCell> {
        self.cells.binary_search_by(|c| (c.row, c.window).cmp(&(row, window))).ok().map(|i| &self.cells[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixParams {
    pub sort_key: SortKey,
    pub direction: SortDirection,
    pub outcome_key: OutcomeKey,
    /// Keeps only measurements whose in-cycle time is in `[lo, hi)`.
    pub cycle_filter: Option<(f64, f64)>,
}

impl Default for MatrixParams {
    fn default() -> Self {
        MatrixParams {
            sort_key: SortKey::window_mean(BpType::Sbp, 0),
            direction: SortDirection::Descending,
            outcome_key: OutcomeKey::MrsDischarge,
            cycle_filter: None,
        }
    }
}

pub fn build_matrix(
    store: &PatientStore,
    uids: &BTreeSet<Uid>,
    cfg: &FoldConfig,
    params: &MatrixParams,
) -> Result<MatrixModel, VisError> {
    cfg.validate()?;
    if let Some(u) = uids.iter().find(|u| store.row(u.as_str()).is_none()) {
        return Err(VisError::UnknownUid(u.to_string()));
    }
    let outcome = params.outcome_key.resolve(store)?;
    let outcome_col = store.column(outcome.field());
    let rows = candidate_rows(store, Some(uids));
    let ordered = order_rows(store, &rows, &params.sort_key, params.direction)?;

    let mut model_rows = Vec::with_capacity(ordered.len());
    let mut cells = Vec::new();
    let mut n_windows = 0;
    // per-window accumulators reused across patients
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for (out_row, (row, sort_value)) in ordered.into_iter().enumerate() {
        model_rows.push(MatrixRow {
            uid: store.uid_at(row).clone(),
            outcome_band: outcome_col.and_then(|c| c.get_f64(row)).map(|v| outcome.band(v).to_owned()),
            sort_value,
        });
        sums.clear();
        for m in store.bp_at(row) {
            let (w, t_in) = fold_time(m.t, cfg.cycle_hours);
            if let Some((lo, hi)) = params.cycle_filter {
                if !(lo <= t_in && t_in < hi) {
                    continue;
                }
            }
            if sums.len() <= w {
                sums.resize(w + 1, (0.0, 0));
            }
            sums[w].0 += m.value(cfg.bp_type);
            sums[w].1 += 1;
        }
        n_windows = n_windows.max(sums.len());
        for (w, &(sum, count)) in sums.iter().enumerate().filter(|(_, s)| s.1 > 0) {
            let mean = sum / count as f64;
            let entry = cfg.category(mean);
            cells.push(MatrixCell {
                row: out_row,
                window: w,
                mean_value: mean,
                count,
                category_name: entry.category.clone(),
                color_token: entry.color_token.clone(),
                alpha: cfg.alpha(count),
            });
        }
    }
    Ok(MatrixModel { bp_type: cfg.bp_type, cycle_hours: cfg.cycle_hours, rows: model_rows, n_windows, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleBin {
    pub bin_start: f64,
    pub count: usize,
}

/// Histogram of in-cycle times over every measurement of `uids`.
pub fn cycle_distribution(
    store: &PatientStore,
    uids: &BTreeSet<Uid>,
    cycle_hours: f64,
    n_bins: usize,
) -> Result<Vec<CycleBin>, VisError> {
    if n_bins == 0 || !(cycle_hours > 0.0) {
        return Err(VisError::InvalidConfig("need bins >= 1 and cycleHours > 0".into()));
    }
    let width = cycle_hours / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for row in candidate_rows(store, Some(uids)) {
        for m in store.bp_at(row) {
            let (_, t_in) = fold_time(m.t, cycle_hours);
            counts[((t_in / width) as usize).min(n_bins - 1)] += 1;
        }
    }
    Ok(counts.into_iter().enumerate().map(|(i, count)| CycleBin { bin_start: i as f64 * width, count }).collect())
}
