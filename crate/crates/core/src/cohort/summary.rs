use serde::Serialize;

use super::{CohortError, CohortTree};
use crate::dataset::{descriptive_stats, BpType, Dtype, PatientStore, StatsSummary, Table};
use crate::dsl::candidate_rows;

pub const HIST_LO: f64 = 40.0;
pub const HIST_HI: f64 = 260.0;
pub const HIST_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BpHistogram {
    pub bin_start: f64,
    pub bin_width: f64,
    /// Empty when the cohort has no measurements.
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BpSummary {
    pub bp_type: BpType,
    pub stats: StatsSummary,
    pub histogram: BpHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeRow {
    pub code: i64,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeTable {
    pub field: String,
    pub rows: Vec<AttributeRow>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupSummary {
    pub cohort_id: String,
    pub member_count: usize,
    pub per_bp_type: Vec<BpSummary>,
    pub attribute_tables: Vec<AttributeTable>,
}

fn histogram(values: &[f64]) -> BpHistogram {
    let n_bins = ((HIST_HI - HIST_LO) / HIST_WIDTH) as usize;
    let mut h = BpHistogram { bin_start: HIST_LO, bin_width: HIST_WIDTH, counts: Vec::new(), below: 0, above: 0 };
    if values.is_empty() {
        return h;
    }
    h.counts = vec![0; n_bins];
    for &v in values {
        if v < HIST_LO {
            h.below += 1;
        } else if v >= HIST_HI {
            h.above += 1;
        } else {
            h.counts[(((v - HIST_LO) / HIST_WIDTH) as usize).min(n_bins - 1)] += 1;
        }
    }
    h
}

/// Stats and 5-mmHg histograms over every measurement of the members, plus
/// per-code counts for each categorical clinical field.
pub fn group_summary(tree: &CohortTree, id: &str, store: &PatientStore) -> Result<GroupSummary, CohortError> {
    let node = tree.node(id)?;
    let rows = candidate_rows(store, Some(&node.member_uids));
    let per_bp_type = BpType::ALL
        .iter()
        .map(|&bp| {
            let values: Vec<f64> = rows.iter().flat_map(|&r| store.bp_at(r).iter().map(move |m| m.value(bp))).collect();
            BpSummary { bp_type: bp, stats: descriptive_stats(&values), histogram: histogram(&values) }
        })
        .collect();
    let attribute_tables = store
        .codebook()
        .fields_in(Table::Clinical)
        .filter(|f| f.dtype == Dtype::Categorical)
        .filter_map(|f| {
            let col = store.column(&f.name)?;
            let vals: Vec<Option<f64>> = rows.iter().map(|&r| col.get_f64(r)).collect();
            let rows = f
                .coding
                .iter()
                .flatten()
                .map(|(&code, label)| AttributeRow {
                    code,
                    label: label.clone(),
                    count: vals.iter().filter(|v| **v == Some(code as f64)).count(),
                })
                .collect();
            Some(AttributeTable { field: f.name.clone(), rows, missing: vals.iter().filter(|v| v.is_none()).count() })
        })
        .collect();
    Ok(GroupSummary { cohort_id: node.id.clone(), member_count: node.member_uids.len(), per_bp_type, attribute_tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = histogram(&[39.9, 40.0, 44.99, 45.0, 259.9, 260.0]);
        assert_eq!(h.counts.len(), 44);
        assert_eq!((h.below, h.above), (1, 1));
        assert_eq!((h.counts[0], h.counts[1], h.counts[43]), (2, 1, 1));
        assert!(histogram(&[]).counts.is_empty());
    }
}
